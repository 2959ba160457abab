//! Labeled news ingestion: CSV loading, cleaning, label encoding and
//! deterministic train/test splitting.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("dataset not found: {0}")]
    FileNotFound(String),
    #[error("malformed CSV in {path} at record {record}: {message}")]
    MalformedCsv {
        path: String,
        record: u64,
        message: String,
    },
    #[error("column '{column}' not present in header of {path} (found: {found})")]
    MissingColumn {
        column: String,
        path: String,
        found: String,
    },
    #[error("unknown label '{value}' at row {row}")]
    UnknownLabel { value: String, row: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("document {id} carries no label")]
    UnlabeledDocument { id: usize },
    #[error("duplicate document id {0}")]
    DuplicateId(usize),
    #[error("invalid split: test fraction {0} must lie strictly between 0 and 1")]
    InvalidSplit(f64),
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Binary news label. `Real` encodes as 1, `Fake` as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Fake,
    Real,
}

impl Label {
    pub fn from_value(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Fake),
            1 => Some(Label::Real),
            _ => None,
        }
    }

    pub fn value(self) -> u8 {
        match self {
            Label::Fake => 0,
            Label::Real => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    /// `+1` for real, `-1` for fake.
    pub fn signed(self) -> f64 {
        match self {
            Label::Fake => -1.0,
            Label::Real => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Fake => "FAKE",
            Label::Real => "REAL",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    /// Data-row ordinal in the source file (0-based, header excluded).
    pub id: usize,
    pub title: String,
    pub body: String,
    /// Label text as it appeared in the source, before encoding.
    pub raw_label: Option<String>,
    pub label: Option<Label>,
}

impl Document {
    pub fn new(id: usize, title: impl Into<String>, body: impl Into<String>) -> Self {
        Document {
            id,
            title: title.into(),
            body: body.into(),
            raw_label: None,
            label: None,
        }
    }

    pub fn labeled(id: usize, title: impl Into<String>, body: impl Into<String>, label: Label) -> Self {
        Document {
            raw_label: Some(label.value().to_string()),
            label: Some(label),
            ..Document::new(id, title, body)
        }
    }

    /// Title and body joined by a single space; the text the vectorizer sees.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + 1 + self.body.len());
        s.push_str(&self.title);
        s.push(' ');
        s.push_str(&self.body);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
    source: String,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, source: impl Into<String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id) {
                return Err(CorpusError::DuplicateId(d.id));
            }
        }
        Ok(Corpus {
            documents,
            source: source.into(),
        })
    }

    // Subsets of an already-validated corpus keep unique ids.
    fn derived(&self, documents: Vec<Document>) -> Corpus {
        Corpus {
            documents,
            source: self.source.clone(),
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.documents.iter().map(|d| d.id).collect()
    }

    /// Labels of every document, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<Label>, CorpusError> {
        self.documents
            .iter()
            .map(|d| d.label.ok_or(CorpusError::UnlabeledDocument { id: d.id }))
            .collect()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

/// Which CSV header names feed each document field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub title: Option<String>,
    pub body: String,
    pub label: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            title: Some("title".into()),
            body: "text".into(),
            label: Some("label".into()),
        }
    }
}

impl ColumnMapping {
    /// Same columns without a label, for classify-only input.
    pub fn unlabeled(mut self) -> Self {
        self.label = None;
        self
    }
}

/// Raw label text to encoded label. Matching is case-insensitive after trimming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    entries: Vec<(String, Label)>,
}

impl Default for LabelMapping {
    fn default() -> Self {
        LabelMapping::new([
            ("real", Label::Real),
            ("fake", Label::Fake),
            ("1", Label::Real),
            ("0", Label::Fake),
        ])
    }
}

impl LabelMapping {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = (S, Label)>) -> Self {
        LabelMapping {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.as_ref().trim().to_lowercase(), v))
                .collect(),
        }
    }

    pub fn lookup(&self, raw: &str) -> Option<Label> {
        let key = raw.trim().to_lowercase();
        self.entries.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    pub fn entries(&self) -> &[(String, Label)] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.test_fraction > 0.0 && self.test_fraction < 1.0 {
            Ok(())
        } else {
            Err(CorpusError::InvalidSplit(self.test_fraction))
        }
    }

    pub fn test_size(&self, n: usize) -> usize {
        (self.test_fraction * n as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub real: usize,
    pub fake: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.real + self.fake
    }

    pub fn real_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.real as f64 / self.total() as f64
        }
    }

    pub fn fake_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.fake as f64 / self.total() as f64
        }
    }
}

/// Reads a headered, RFC-4180 CSV into a corpus, one document per data row.
pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnMapping) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::FileNotFound(shown.clone()),
        _ => CorpusError::Io {
            path: shown.clone(),
            source: e,
        },
    })?;
    read_csv(file, &shown, schema)
}

/// [`load_csv`] over any reader; `source` names it in errors.
pub fn read_csv<R: std::io::Read>(
    reader: R,
    source: &str,
    schema: &ColumnMapping,
) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let malformed = |e: csv::Error| {
        let record = e.position().map(|p| p.record()).unwrap_or(0);
        let message = match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("expected {expected_len} fields, found {len}")
            }
            _ => e.to_string(),
        };
        CorpusError::MalformedCsv {
            path: source.to_string(),
            record,
            message,
        }
    };

    let headers = rdr.headers().map_err(malformed)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                column: name.to_string(),
                path: source.to_string(),
                found: headers.iter().collect::<Vec<_>>().join(","),
            })
    };
    let title_col = schema.title.as_deref().map(find).transpose()?;
    let body_col = find(&schema.body)?;
    let label_col = schema.label.as_deref().map(find).transpose()?;

    let mut documents = Vec::new();
    for (id, record) in rdr.records().enumerate() {
        let record = record.map_err(malformed)?;
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        documents.push(Document {
            id,
            title: title_col.map(field).unwrap_or_default(),
            body: field(body_col),
            raw_label: label_col.map(field),
            label: None,
        });
    }
    Corpus::new(documents, source)
}

/// Drops documents whose body, or raw label when one is carried, is empty
/// after trimming. Titles may be empty.
pub fn drop_missing(corpus: &Corpus) -> Corpus {
    let kept = corpus
        .iter()
        .filter(|d| {
            !d.body.trim().is_empty()
                && d.raw_label.as_deref().map_or(true, |l| !l.trim().is_empty())
        })
        .cloned()
        .collect();
    corpus.derived(kept)
}

pub fn encode_labels(corpus: &Corpus, mapping: &LabelMapping) -> Result<Corpus, CorpusError> {
    let mut docs = Vec::with_capacity(corpus.len());
    for d in corpus {
        let mut d = d.clone();
        match d.raw_label.as_deref() {
            Some(raw) => {
                d.label = Some(mapping.lookup(raw).ok_or_else(|| CorpusError::UnknownLabel {
                    value: raw.to_string(),
                    row: d.id,
                })?);
            }
            None if d.label.is_some() => {}
            None => return Err(CorpusError::UnlabeledDocument { id: d.id }),
        }
        docs.push(d);
    }
    Ok(corpus.derived(docs))
}

/// Random (unstratified) train/test partition.
///
/// Document indices are permuted with [`rng::shuffle`] under `spec.seed`; the
/// first `round(test_fraction * n)` permuted documents form the test set and
/// the rest the training set, both in permuted order.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus), CorpusError> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    corpus.labels()?;
    let n_test = spec.test_size(corpus.len());
    let order = rng::permutation(corpus.len(), &mut rng::seeded(spec.seed));
    let pick = |idx: &[usize]| -> Vec<Document> {
        idx.iter().map(|&i| corpus.documents[i].clone()).collect()
    };
    let test = corpus.derived(pick(&order[..n_test]));
    let train = corpus.derived(pick(&order[n_test..]));
    Ok((train, test))
}

/// Seeded subsample of at most `n` documents, keeping the original order.
pub fn sample(corpus: &Corpus, n: usize, seed: u64) -> Corpus {
    if n >= corpus.len() {
        return corpus.clone();
    }
    let mut chosen = rng::permutation(corpus.len(), &mut rng::seeded(seed));
    chosen.truncate(n);
    chosen.sort_unstable();
    corpus.derived(chosen.into_iter().map(|i| corpus.documents[i].clone()).collect())
}

pub fn label_distribution(corpus: &Corpus) -> Result<LabelCounts, CorpusError> {
    let mut counts = LabelCounts { real: 0, fake: 0 };
    for label in corpus.labels()? {
        match label {
            Label::Real => counts.real += 1,
            Label::Fake => counts.fake += 1,
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Corpus, CorpusError> {
        read_csv(text.as_bytes(), "inline", &ColumnMapping::default())
    }

    fn labeled_corpus(labels: &[u8]) -> Corpus {
        let docs = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Document::labeled(i, "", format!("body {i}"), Label::from_value(l).unwrap()))
            .collect();
        Corpus::new(docs, "mem").unwrap()
    }

    #[test]
    fn three_rows_in_file_order() {
        let c = parse("title,text,label\na,first,REAL\nb,second,FAKE\nc,third,REAL\n").unwrap();
        assert_eq!(c.len(), 3);
        let bodies: Vec<_> = c.iter().map(|d| d.body.as_str()).collect();
        assert_eq!(bodies, ["first", "second", "third"]);
        assert_eq!(c.ids(), vec![0, 1, 2]);
        assert_eq!(c.documents()[1].raw_label.as_deref(), Some("FAKE"));
    }

    #[test]
    fn missing_label_column() {
        let err = parse("title,text,category\na,b,c\n").unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn { ref column, .. } if column == "label"));
    }

    #[test]
    fn ragged_row_names_record() {
        let err = parse("title,text,label\na,b,REAL\nc,d\n").unwrap_err();
        match err {
            CorpusError::MalformedCsv { record, .. } => assert_eq!(record, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quoted_newlines_and_commas() {
        let c = parse("title,text,label\n\"t, 1\",\"line one\nline two\",REAL\nx,y,FAKE\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.documents()[0].title, "t, 1");
        assert_eq!(c.documents()[0].body, "line one\nline two");
    }

    #[test]
    fn missing_file() {
        let err = load_csv("/nonexistent/news.csv", &ColumnMapping::default()).unwrap_err();
        assert!(matches!(err, CorpusError::FileNotFound(p) if p.contains("nonexistent")));
    }

    #[test]
    fn drop_missing_keeps_order() {
        let c = parse("title,text,label\na,one,REAL\nb,,FAKE\nc,three,REAL\nd,  ,FAKE\ne,five,FAKE\n").unwrap();
        let kept = drop_missing(&c);
        assert_eq!(kept.ids(), vec![0, 2, 4]);
        assert_eq!(c.len(), 5);
    }

    #[test]
    fn drop_missing_blank_label_and_empty_title() {
        let c = parse("title,text,label\n,body,REAL\nb,body, \n").unwrap();
        assert_eq!(drop_missing(&c).ids(), vec![0]);
    }

    #[test]
    fn drop_missing_without_gaps_is_identity() {
        let c = parse("title,text,label\na,one,REAL\nb,two,FAKE\n").unwrap();
        assert_eq!(drop_missing(&c), c);
    }

    #[test]
    fn encodes_real_as_one() {
        let c = parse("title,text,label\na,x,REAL\nb,y,FAKE\nc,z,REAL\n").unwrap();
        let e = encode_labels(&c, &LabelMapping::default()).unwrap();
        let v: Vec<u8> = e.labels().unwrap().into_iter().map(Label::value).collect();
        assert_eq!(v, [1, 0, 1]);
    }

    #[test]
    fn numeric_labels_pass_through() {
        let c = parse("title,text,label\na,x,1\nb,y,0\nc,z, 1 \n").unwrap();
        let e = encode_labels(&c, &LabelMapping::default()).unwrap();
        let v: Vec<u8> = e.labels().unwrap().into_iter().map(Label::value).collect();
        assert_eq!(v, [1, 0, 1]);
    }

    #[test]
    fn unknown_label_names_row() {
        let c = parse("title,text,label\na,x,REAL\nb,y,unknown\n").unwrap();
        let err = encode_labels(&c, &LabelMapping::default()).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownLabel { ref value, row: 1 } if value == "unknown"));
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let c = labeled_corpus(&[1, 0, 1, 0, 1, 0, 1, 0, 1, 0]);
        let (train, test) = split(&c, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (_, again) = split(&c, &SplitSpec::default()).unwrap();
        assert_eq!(test.ids(), again.ids());
    }

    #[test]
    fn split_seed_changes_partition() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let c = labeled_corpus(&labels);
        let (_, a) = split(&c, &SplitSpec { test_fraction: 0.2, seed: 42 }).unwrap();
        let (_, b) = split(&c, &SplitSpec { test_fraction: 0.2, seed: 43 }).unwrap();
        let mut a = a.ids();
        let mut b = b.ids();
        a.sort_unstable();
        b.sort_unstable();
        assert_ne!(a, b);
    }

    #[test]
    fn split_test_size_arithmetic() {
        let spec = SplitSpec::default();
        assert_eq!(spec.test_size(44_898), 8_980);
        assert_eq!(spec.test_size(6_335), 1_267);
        assert_eq!(spec.test_size(10), 2);
    }

    #[test]
    fn split_errors() {
        let empty = Corpus::new(vec![], "mem").unwrap();
        assert!(matches!(split(&empty, &SplitSpec::default()), Err(CorpusError::EmptyCorpus)));
        let unlabeled = Corpus::new(vec![Document::new(0, "", "x")], "mem").unwrap();
        assert!(matches!(
            split(&unlabeled, &SplitSpec::default()),
            Err(CorpusError::UnlabeledDocument { id: 0 })
        ));
        let c = labeled_corpus(&[0, 1]);
        assert!(matches!(
            split(&c, &SplitSpec { test_fraction: 1.0, seed: 1 }),
            Err(CorpusError::InvalidSplit(_))
        ));
    }

    #[test]
    fn distribution_counts() {
        let c = labeled_corpus(&[1, 1, 0, 0]);
        assert_eq!(label_distribution(&c).unwrap(), LabelCounts { real: 2, fake: 2 });
    }

    #[test]
    fn duplicate_ids_rejected() {
        let docs = vec![Document::new(3, "", "a"), Document::new(3, "", "b")];
        assert!(matches!(Corpus::new(docs, "mem"), Err(CorpusError::DuplicateId(3))));
    }

    #[test]
    fn sample_keeps_order() {
        let labels: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let c = labeled_corpus(&labels);
        let s = sample(&c, 10, 9);
        assert_eq!(s.len(), 10);
        assert!(s.ids().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample(&c, 100, 9), c);
    }
}
