//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use fakenews::corpus::Label;
use fakenews::sparse::SparseVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Character-by-character tokenizer: maximal alphanumeric runs, lowercased,
/// two characters or more.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else {
            if cur.chars().count() >= 2 {
                out.push(cur.to_lowercase());
            }
            cur.clear();
        }
    }
    out
}

pub struct OracleTfidf {
    pub terms: Vec<String>,
    pub df: Vec<usize>,
    pub idf: Vec<f64>,
}

/// Nested-loop fit: every candidate term is checked against every document.
pub fn oracle_fit(texts: &[String], min_df: usize) -> OracleTfidf {
    let docs: Vec<Vec<String>> = texts.iter().map(|t| oracle_tokens(t)).collect();
    let mut candidates: Vec<String> = docs.iter().flatten().cloned().collect();
    candidates.sort();
    candidates.dedup();
    let n = texts.len() as f64;
    let mut o = OracleTfidf {
        terms: vec![],
        df: vec![],
        idf: vec![],
    };
    for term in candidates {
        let mut df = 0;
        for d in &docs {
            if d.iter().any(|t| *t == term) {
                df += 1;
            }
        }
        if df >= min_df.max(1) {
            o.idf.push(((1.0 + n) / (1.0 + df as f64)).ln() + 1.0);
            o.terms.push(term);
            o.df.push(df);
        }
    }
    o
}

/// Nested-loop transform: dense tf·idf, then the L2 norm accumulated in index
/// order, then division.
pub fn oracle_transform(o: &OracleTfidf, text: &str, normalize: bool) -> Vec<f64> {
    let toks = oracle_tokens(text);
    let mut v = vec![0.0; o.terms.len()];
    for (i, term) in o.terms.iter().enumerate() {
        let mut tf = 0usize;
        for t in &toks {
            if t == term {
                tf += 1;
            }
        }
        v[i] = tf as f64 * o.idf[i];
    }
    if normalize {
        let mut ss = 0.0;
        for x in &v {
            if *x != 0.0 {
                ss += x * x;
            }
        }
        if ss > 0.0 {
            let norm = ss.sqrt();
            for x in v.iter_mut() {
                if *x != 0.0 {
                    *x /= norm;
                }
            }
        }
    }
    v
}

/// `|a - n| / max(|a|, |n|)`, with both-tiny treated as agreement.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn random_sparse(rng: &mut impl Rng, dim: usize, density: f64, scale: f64) -> SparseVector {
    let mut pairs = Vec::new();
    for i in 0..dim {
        if rng.gen::<f64>() < density {
            pairs.push((i, rng.gen_range(-scale..scale)));
        }
    }
    SparseVector::from_pairs(dim, pairs).unwrap()
}

pub fn random_labels(rng: &mut impl Rng, n: usize) -> Vec<Label> {
    let mut ys: Vec<Label> = (0..n).map(|_| if rng.gen() { Label::Real } else { Label::Fake }).collect();
    // both classes present
    if n >= 2 {
        ys[0] = Label::Real;
        ys[1] = Label::Fake;
    }
    ys
}

/// Exhaustive best root split under Gini impurity, returned as
/// `(feature, threshold)`, or `None` when no split strictly lowers impurity.
/// Ties go to the lowest feature, then the lowest threshold.
pub fn oracle_root_split(xs: &[Vec<f64>], ys: &[Label]) -> Option<(usize, f64)> {
    // weighted impurity n·gini = 2ab/n, kept as an exact fraction
    fn frac(c: [u128; 2]) -> (u128, u128) {
        (2 * c[0] * c[1], c[0] + c[1])
    }
    fn add(a: (u128, u128), b: (u128, u128)) -> (u128, u128) {
        (a.0 * b.1 + b.0 * a.1, a.1 * b.1)
    }
    fn less(a: (u128, u128), b: (u128, u128)) -> bool {
        a.0 * b.1 < b.0 * a.1
    }
    let mut total = [0u128; 2];
    for y in ys {
        total[y.value() as usize] += 1;
    }
    let parent = frac(total);
    let dim = xs[0].len();
    let mut best: Option<((u128, u128), usize, f64)> = None;
    for f in 0..dim {
        let mut vals: Vec<f64> = xs.iter().map(|x| x[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let mut left = [0u128; 2];
            let mut right = [0u128; 2];
            for (x, y) in xs.iter().zip(ys) {
                if x[f] <= thr {
                    left[y.value() as usize] += 1;
                } else {
                    right[y.value() as usize] += 1;
                }
            }
            let score = add(frac(left), frac(right));
            let better = match &best {
                None => true,
                Some((s, bf, bt)) => less(score, *s) || (!less(*s, score) && (f, thr) < (*bf, *bt)),
            };
            if better {
                best = Some((score, f, thr));
            }
        }
    }
    match best {
        Some((s, f, t)) if less(s, parent) => Some((f, t)),
        _ => None,
    }
}

/// Writes a synthetic corpus under `dir` and returns a config that trains
/// every model quickly on it, writing into `dir/out`.
pub fn quick_config(dir: &std::path::Path, n_docs: usize) -> fakenews::config::RunConfig {
    use fakenews::config::{ForestSettings, MlpSettings, RunConfig};
    use fakenews::synthetic::{generate, write_csv, SyntheticSpec};
    let corpus = generate(&SyntheticSpec {
        n_docs,
        signal: 0.15,
        ..SyntheticSpec::default()
    });
    let path = dir.join("news.csv");
    write_csv(&corpus, &path).unwrap();
    let mut cfg = RunConfig::default();
    cfg.dataset.path = path;
    cfg.run.output_dir = dir.join("out");
    cfg.forest = Some(ForestSettings {
        n_trees: 8,
        max_depth: 12,
        ..ForestSettings::default()
    });
    for block in [&mut cfg.mlp_baseline, &mut cfg.mlp_regularized] {
        let s: &mut MlpSettings = block.as_mut().unwrap();
        s.hidden_dims = vec![16];
        s.epochs = 3;
    }
    cfg
}
