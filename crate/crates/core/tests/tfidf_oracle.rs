mod common;

use common::{oracle_fit, oracle_tokens, oracle_transform};
use fakenews::vectorize::{tokenize, TfidfConfig, TfidfModel, VectorizeError};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["news", "Fake", "REAL", "vote", "a", "I", "x9", "état", "2024", "the"])
            .prop_map(str::to_string),
        "[a-zA-Z0-9]{1,4}",
    ]
}

fn text() -> impl Strategy<Value = String> {
    let sep = prop::sample::select(vec![" ", "  ", ", ", "-", "!", "\n", "'s "]);
    prop::collection::vec((word(), sep), 0..12)
        .prop_map(|parts| parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tokenizer_matches_oracle(t in text()) {
        prop_assert_eq!(tokenize(&t), oracle_tokens(&t));
    }

    #[test]
    fn fit_and_transform_match_nested_loop_oracle(
        docs in prop::collection::vec(text(), 1..=10),
        probe in text(),
        min_df in 1usize..=3,
        normalize in any::<bool>(),
    ) {
        let cfg = TfidfConfig { min_df, normalize };
        let oracle = oracle_fit(&docs, min_df);
        match TfidfModel::fit_texts(&docs, cfg) {
            Err(VectorizeError::EmptyVocabulary { .. }) => prop_assert!(oracle.terms.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
            Ok(model) => {
                prop_assert_eq!(model.vocabulary().terms(), oracle.terms.as_slice());
                prop_assert_eq!(model.vocabulary().document_frequency(), oracle.df.as_slice());
                prop_assert_eq!(model.idf(), oracle.idf.as_slice());
                for t in docs.iter().chain(std::iter::once(&probe)) {
                    let got = model.transform_text(t).to_dense();
                    let want = oracle_transform(&oracle, t, normalize);
                    prop_assert_eq!(got, want);
                }
            }
        }
    }

    #[test]
    fn normalized_rows_have_unit_norm(docs in prop::collection::vec(text(), 1..=10)) {
        if let Ok(model) = TfidfModel::fit_texts(&docs, TfidfConfig { min_df: 1, normalize: true }) {
            for t in &docs {
                let v = model.transform_text(t);
                if !v.is_zero() {
                    prop_assert!((v.norm() - 1.0).abs() < 1e-12);
                }
                prop_assert!(v.values().iter().all(|x| *x > 0.0));
            }
        }
    }
}
