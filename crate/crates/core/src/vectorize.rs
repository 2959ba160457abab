//! Tokenization and TF-IDF weighting.
//!
//! Weighting: raw term count `tf`, smoothed inverse document frequency
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1` over the `N` training documents,
//! then optional L2 normalization. Vocabulary indices follow lexicographic
//! term order.
//!
//! Floating-point order in [`TfidfModel::transform_text`]: entries are built in
//! increasing index order as `tf as f64 * idf`; the norm is the square root of
//! the sum of squares accumulated in that same order; each entry is then
//! divided by the norm.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::sparse::SparseVector;

#[derive(Debug, Error, PartialEq)]
pub enum VectorizeError {
    #[error("cannot fit a vectorizer on an empty corpus")]
    EmptyCorpus,
    #[error("no term appears in at least {min_df} documents")]
    EmptyVocabulary { min_df: usize },
    #[error("inconsistent vectorizer state: {0}")]
    Inconsistent(String),
}

/// Lowercased alphanumeric runs of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfConfig {
    /// Minimum number of training documents a term must occur in.
    pub min_df: usize,
    pub normalize: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            min_df: 2,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    document_frequency: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self) -> &[usize] {
        &self.document_frequency
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: Vocabulary,
    idf: Vec<f64>,
    config: TfidfConfig,
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfidfModel {
    pub fn fit(train: &Corpus, config: TfidfConfig) -> Result<Self, VectorizeError> {
        let texts: Vec<String> = train.iter().map(Document::text).collect();
        Self::fit_texts(&texts, config)
    }

    pub fn fit_texts<S: AsRef<str> + Sync>(texts: &[S], config: TfidfConfig) -> Result<Self, VectorizeError> {
        if texts.is_empty() {
            return Err(VectorizeError::EmptyCorpus);
        }
        let per_doc: Vec<HashSet<String>> = texts
            .par_iter()
            .map(|t| tokenize(t.as_ref()).into_iter().collect())
            .collect();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for terms in per_doc {
            for t in terms {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let min_df = config.min_df.max(1);
        let kept: Vec<(String, usize)> = df.into_iter().filter(|(_, c)| *c >= min_df).collect();
        if kept.is_empty() {
            return Err(VectorizeError::EmptyVocabulary { min_df });
        }
        let (terms, dfs): (Vec<String>, Vec<usize>) = kept.into_iter().unzip();
        Self::from_parts(terms, dfs, texts.len(), config)
    }

    /// Rebuilds a model from its vocabulary (terms in index order) and
    /// document frequencies; idf is recomputed.
    pub fn from_parts(
        terms: Vec<String>,
        document_frequency: Vec<usize>,
        n_docs: usize,
        config: TfidfConfig,
    ) -> Result<Self, VectorizeError> {
        if terms.len() != document_frequency.len() {
            return Err(VectorizeError::Inconsistent(format!(
                "{} terms but {} frequencies",
                terms.len(),
                document_frequency.len()
            )));
        }
        if let Some(bad) = document_frequency.iter().find(|&&d| d == 0 || d > n_docs) {
            return Err(VectorizeError::Inconsistent(format!(
                "document frequency {bad} outside 1..={n_docs}"
            )));
        }
        let index: HashMap<String, usize> = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != terms.len() {
            return Err(VectorizeError::Inconsistent("duplicate vocabulary term".into()));
        }
        let idf = document_frequency.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
        Ok(TfidfModel {
            vocabulary: Vocabulary {
                terms,
                index,
                document_frequency,
                n_docs,
            },
            idf,
            config,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn config(&self) -> TfidfConfig {
        self.config
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn transform(&self, doc: &Document) -> SparseVector {
        self.transform_text(&doc.text())
    }

    pub fn transform_text(&self, text: &str) -> SparseVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for tok in tokenize(text) {
            if let Some(i) = self.vocabulary.index_of(&tok) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, tf)| (i, tf as f64 * self.idf[i]))
            .collect();
        if self.config.normalize && !entries.is_empty() {
            let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            for (_, v) in entries.iter_mut() {
                *v /= norm;
            }
        }
        SparseVector::from_pairs(self.dim(), entries).expect("BTreeMap yields ordered indices")
    }

    pub fn transform_corpus(&self, corpus: &Corpus) -> Vec<SparseVector> {
        corpus.documents().par_iter().map(|d| self.transform(d)).collect()
    }
}
