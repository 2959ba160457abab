//! Random forest of Gini-split decision trees over sparse features.
//!
//! Each tree is grown on a bootstrap resample (n draws with replacement) of
//! the training set. At every node a random subset of features is examined;
//! the subset is drawn from the features that are nonzero in at least one of
//! the node's samples, since a feature that is zero everywhere in the node
//! cannot separate it. Absent entries count as value 0.
//!
//! Split scores are compared exactly: the weighted child impurity
//! `nL·G(L) + nR·G(R)` equals `2·(aL·bL/nL + aR·bR/nR)` for class counts
//! `a, b`, which is kept as an integer fraction.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::linear::{check_training_data, LinearError};
use crate::rng::{self, PipelineRng};
use crate::sparse::SparseVector;

/// Per-feature cap on threshold candidates.
pub const MAX_THRESHOLDS: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("cannot grow a tree node from zero samples")]
    EmptyNode,
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("invalid forest hyperparameters: {0}")]
    InvalidHyper(String),
}

impl From<LinearError> for ForestError {
    fn from(e: LinearError) -> Self {
        match e {
            LinearError::SingleClassTraining => ForestError::SingleClassTraining,
            other => ForestError::InvalidData(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// `[fake, real]` sample counts that reached this leaf.
        counts: [usize; 2],
    },
}

impl TreeNode {
    /// Majority class at a leaf reached by `x`; equal counts vote real.
    pub fn predict(&self, x: &SparseVector) -> Label {
        let mut node = self;
        loop {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x.get(*feature) <= *threshold { left } else { right };
                }
                TreeNode::Leaf { counts } => {
                    return if counts[1] >= counts[0] { Label::Real } else { Label::Fake };
                }
            }
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features examined per split; `None` means `ceil(sqrt(dim))`.
    pub n_features_per_split: Option<usize>,
    /// Resample the training set per tree. Disabling this (together with
    /// examining every feature) makes tree growth exhaustive.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_trees: 100,
            max_depth: 40,
            n_features_per_split: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestHyper {
    /// Single tree on the full data, every feature examined at every split.
    pub fn exhaustive(max_depth: usize) -> Self {
        ForestHyper {
            n_trees: 1,
            max_depth,
            n_features_per_split: Some(usize::MAX),
            bootstrap: false,
            seed: 0,
        }
    }

    pub fn features_per_split(&self, dim: usize) -> usize {
        match self.n_features_per_split {
            Some(k) => k.min(dim).max(1),
            None => ((dim as f64).sqrt().ceil() as usize).max(1),
        }
    }

    fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidHyper("n_trees must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(ForestError::InvalidHyper("max_depth must be >= 1".into()));
        }
        if self.n_features_per_split == Some(0) {
            return Err(ForestError::InvalidHyper("n_features_per_split must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeNode>,
    max_depth: usize,
    n_features_per_split: usize,
    seed: u64,
    dim: usize,
}

impl ForestModel {
    pub fn from_parts(
        trees: Vec<TreeNode>,
        max_depth: usize,
        n_features_per_split: usize,
        seed: u64,
        dim: usize,
    ) -> Result<Self, ForestError> {
        if trees.is_empty() {
            return Err(ForestError::InvalidHyper("forest has no trees".into()));
        }
        if let Some(t) = trees.iter().find(|t| t.depth() > max_depth) {
            return Err(ForestError::InvalidHyper(format!(
                "tree depth {} exceeds max_depth {max_depth}",
                t.depth()
            )));
        }
        Ok(ForestModel {
            trees,
            max_depth,
            n_features_per_split,
            seed,
            dim,
        })
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn n_features_per_split(&self) -> usize {
        self.n_features_per_split
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Majority vote over trees. Returns the winning label and the fraction of
    /// trees that voted for it; an even split goes to real.
    pub fn predict(&self, x: &SparseVector) -> (Label, f64) {
        let real = self.trees.iter().filter(|t| t.predict(x) == Label::Real).count();
        let fake = self.trees.len() - real;
        let (label, votes) = if real >= fake { (Label::Real, real) } else { (Label::Fake, fake) };
        (label, votes as f64 / self.trees.len() as f64)
    }
}

/// Exact split score `aL·bL/nL + aR·bR/nR` as a fraction.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn node(counts: [usize; 2]) -> Score {
        Score {
            num: (counts[0] * counts[1]) as u128,
            den: (counts[0] + counts[1]) as u128,
        }
    }

    fn split(left: [usize; 2], right: [usize; 2]) -> Score {
        let (l, r) = (Score::node(left), Score::node(right));
        Score {
            num: l.num * r.den + r.num * l.den,
            den: l.den * r.den,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: Score,
}

/// Distinct observed values of one feature in a node with per-class counts.
fn value_groups(mut nonzero: Vec<(f64, u8)>, node_counts: [usize; 2]) -> Vec<(f64, [usize; 2])> {
    nonzero.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut zeros = node_counts;
    for &(_, c) in &nonzero {
        zeros[c as usize] -= 1;
    }
    let mut groups: Vec<(f64, [usize; 2])> = Vec::new();
    let mut zero_pending = zeros[0] + zeros[1] > 0;
    for (v, c) in nonzero {
        if zero_pending && v > 0.0 {
            groups.push((0.0, zeros));
            zero_pending = false;
        }
        match groups.last_mut() {
            Some((last, counts)) if *last == v => counts[c as usize] += 1,
            _ => {
                let mut counts = [0, 0];
                counts[c as usize] = 1;
                groups.push((v, counts));
            }
        }
    }
    if zero_pending {
        groups.push((0.0, zeros));
    }
    groups
}

/// Indices of the midpoints examined for `d` distinct values.
fn threshold_positions(d: usize) -> Vec<usize> {
    let mids = d.saturating_sub(1);
    if d <= MAX_THRESHOLDS {
        (0..mids).collect()
    } else {
        (0..MAX_THRESHOLDS).map(|k| (2 * k + 1) * mids / (2 * MAX_THRESHOLDS)).collect()
    }
}

fn best_threshold(feature: usize, groups: &[(f64, [usize; 2])], total: [usize; 2]) -> Option<Candidate> {
    let mut prefix = Vec::with_capacity(groups.len());
    let mut acc = [0usize, 0];
    for (_, c) in groups {
        acc[0] += c[0];
        acc[1] += c[1];
        prefix.push(acc);
    }
    let mut best: Option<Candidate> = None;
    for pos in threshold_positions(groups.len()) {
        let left = prefix[pos];
        let right = [total[0] - left[0], total[1] - left[1]];
        let score = Score::split(left, right);
        if best.as_ref().map_or(true, |b| score.cmp(&b.score) == Ordering::Less) {
            best = Some(Candidate {
                feature,
                threshold: 0.5 * (groups[pos].0 + groups[pos + 1].0),
                score,
            });
        }
    }
    best
}

struct TreeBuilder<'a> {
    xs: &'a [SparseVector],
    ys: &'a [Label],
    features_per_split: usize,
    depth_limit: usize,
    stamp: Vec<u32>,
    slot: Vec<u32>,
    epoch: u32,
}

impl<'a> TreeBuilder<'a> {
    fn new(xs: &'a [SparseVector], ys: &'a [Label], features_per_split: usize, depth_limit: usize) -> Self {
        let dim = xs.first().map_or(0, SparseVector::dim);
        TreeBuilder {
            xs,
            ys,
            features_per_split,
            depth_limit,
            stamp: vec![0; dim],
            slot: vec![0; dim],
            epoch: 0,
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch += 1;
        self.epoch
    }

    fn counts(&self, samples: &[usize]) -> [usize; 2] {
        let mut c = [0, 0];
        for &s in samples {
            c[self.ys[s].value() as usize] += 1;
        }
        c
    }

    fn grow(&mut self, samples: &[usize], depth: usize, rng: &mut PipelineRng) -> TreeNode {
        let counts = self.counts(samples);
        if depth >= self.depth_limit || counts[0] == 0 || counts[1] == 0 {
            return TreeNode::Leaf { counts };
        }
        let Some(best) = self.best_split(samples, counts, rng) else {
            return TreeNode::Leaf { counts };
        };
        if best.score.cmp(&Score::node(counts)) != Ordering::Less {
            return TreeNode::Leaf { counts };
        }
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.xs[s].get(best.feature) <= best.threshold);
        let left = self.grow(&left, depth + 1, rng);
        let right = self.grow(&right, depth + 1, rng);
        TreeNode::Internal {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&mut self, samples: &[usize], counts: [usize; 2], rng: &mut PipelineRng) -> Option<Candidate> {
        // Features present in the node, ascending.
        let pass = self.next_epoch();
        let mut pool = Vec::new();
        for &s in samples {
            for &f in self.xs[s].indices() {
                if self.stamp[f] != pass {
                    self.stamp[f] = pass;
                    pool.push(f);
                }
            }
        }
        pool.sort_unstable();
        let chosen: Vec<usize> = if pool.len() > self.features_per_split {
            let mut picked: Vec<usize> = index::sample(rng, pool.len(), self.features_per_split)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            picked.sort_unstable();
            picked
        } else {
            pool
        };
        if chosen.is_empty() {
            return None;
        }

        let pass = self.next_epoch();
        for (j, &f) in chosen.iter().enumerate() {
            self.stamp[f] = pass;
            self.slot[f] = j as u32;
        }
        let mut values: Vec<Vec<(f64, u8)>> = vec![Vec::new(); chosen.len()];
        for &s in samples {
            let class = self.ys[s].value();
            for (f, v) in self.xs[s].iter() {
                if self.stamp[f] == pass {
                    values[self.slot[f] as usize].push((v, class));
                }
            }
        }

        let mut best: Option<Candidate> = None;
        for (&f, vals) in chosen.iter().zip(values) {
            let groups = value_groups(vals, counts);
            if let Some(c) = best_threshold(f, &groups, counts) {
                if best.as_ref().map_or(true, |b| c.score.cmp(&b.score) == Ordering::Less) {
                    best = Some(c);
                }
            }
        }
        best
    }
}

/// Grows one tree over `samples` (indices into `xs`, repeats allowed).
pub fn train_tree(
    xs: &[SparseVector],
    ys: &[Label],
    samples: &[usize],
    features_per_split: usize,
    depth_limit: usize,
    rng: &mut PipelineRng,
) -> Result<TreeNode, ForestError> {
    if samples.is_empty() {
        return Err(ForestError::EmptyNode);
    }
    if xs.len() != ys.len() {
        return Err(ForestError::InvalidData(format!("{} vectors but {} labels", xs.len(), ys.len())));
    }
    if let Some(&s) = samples.iter().find(|&&s| s >= xs.len()) {
        return Err(ForestError::InvalidData(format!("sample index {s} out of range")));
    }
    let mut builder = TreeBuilder::new(xs, ys, features_per_split.max(1), depth_limit);
    Ok(builder.grow(samples, 0, rng))
}

/// Trains `n_trees` trees in parallel. Tree `i` draws all of its randomness
/// from a generator seeded with `seed + i`, so the result does not depend on
/// scheduling.
pub fn train_forest(xs: &[SparseVector], ys: &[Label], hyper: &ForestHyper) -> Result<ForestModel, ForestError> {
    hyper.validate()?;
    let dim = check_training_data(xs, ys)?;
    let k = hyper.features_per_split(dim);
    let n = xs.len();
    let trees = (0..hyper.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::seeded(hyper.seed.wrapping_add(i as u64));
            let samples: Vec<usize> = if hyper.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree(xs, ys, &samples, k, hyper.max_depth, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ForestModel::from_parts(trees, hyper.max_depth, k, hyper.seed, dim)
}
