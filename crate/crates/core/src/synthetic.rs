//! Seeded generator of labeled toy news corpora for tests and smoke runs.
//!
//! Each document draws its words from a shared pool and, with probability
//! `signal`, from a pool tied to its label. Word shapes are plain lowercase
//! alphanumerics so they survive tokenization unchanged.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::corpus::{Corpus, Document, Label};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    /// Probability that a document is real.
    pub real_fraction: f64,
    /// Words per document body; titles get a quarter of that (at least one).
    pub doc_len: usize,
    /// Probability that a word comes from the label's own pool.
    pub signal: f64,
    pub shared_vocab: usize,
    pub cue_vocab: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_docs: 200,
            real_fraction: 0.5,
            doc_len: 40,
            signal: 0.25,
            shared_vocab: 300,
            cue_vocab: 60,
            seed: 7,
        }
    }
}

fn word(rng: &mut impl Rng, spec: &SyntheticSpec, label: Label) -> String {
    if rng.gen::<f64>() < spec.signal {
        let k = rng.gen_range(0..spec.cue_vocab.max(1));
        match label {
            Label::Real => format!("report{k}"),
            Label::Fake => format!("shock{k}"),
        }
    } else {
        format!("word{}", rng.gen_range(0..spec.shared_vocab.max(1)))
    }
}

/// A labeled corpus with ids `0..n_docs`.
pub fn generate(spec: &SyntheticSpec) -> Corpus {
    let mut rng = seeded(spec.seed);
    let docs = (0..spec.n_docs)
        .map(|id| {
            let label = if rng.gen::<f64>() < spec.real_fraction {
                Label::Real
            } else {
                Label::Fake
            };
            let title_len = (spec.doc_len / 4).max(1);
            let title: Vec<String> = (0..title_len).map(|_| word(&mut rng, spec, label)).collect();
            let body: Vec<String> = (0..spec.doc_len).map(|_| word(&mut rng, spec, label)).collect();
            Document::labeled(id, title.join(" "), body.join(" "), label)
        })
        .collect();
    Corpus::new(docs, format!("synthetic(seed={})", spec.seed)).expect("ids are unique")
}

/// Writes `corpus` as a CSV with an unnamed index column followed by
/// `title,text,label`, labels spelled `REAL`/`FAKE`.
pub fn write_csv(corpus: &Corpus, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["", "title", "text", "label"])?;
    for d in corpus {
        let label = d.label.map(Label::name).unwrap_or("");
        w.write_record([d.id.to_string().as_str(), &d.title, &d.body, label])?;
    }
    w.flush()?;
    let mut inner = w.into_inner().map_err(|e| e.into_error())?;
    inner.flush()
}
