//! Property tests over corpus handling and the cost matrix range.

use std::collections::BTreeMap;

use ndarray::Array2;
use ottm_core::corpus::{BatchIter, BowCorpus, Vocabulary};
use ottm_core::embeddings::{cost_matrix, TopicEmbeddings, WordEmbeddings};
use proptest::prelude::*;

fn corpus_strategy() -> impl Strategy<Value = BowCorpus> {
    // Vocabulary of 3..20 tokens, 1..15 documents of 1..10 distinct words.
    (3usize..20, 1usize..15).prop_flat_map(|(v, d)| {
        let doc = proptest::collection::btree_map(0u32..v as u32, 1u32..9, 1..v.min(10));
        proptest::collection::vec(doc, d..=d).prop_map(move |docs| {
            let vocab =
                Vocabulary::from_tokens((0..v).map(|i| format!("w{i}")).collect()).unwrap();
            let docs: Vec<Vec<(u32, u32)>> = docs
                .into_iter()
                .map(|m: BTreeMap<u32, u32>| m.into_iter().collect())
                .collect();
            BowCorpus::new(vocab, docs, None).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn market_round_trip_preserves_triplets(corpus in corpus_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.mm");
        corpus.save_counts(&path).unwrap();
        let back = BowCorpus::load(&path, corpus.vocab().clone()).unwrap();
        prop_assert_eq!(back.to_coo(), corpus.to_coo());
        // Writing again is byte-identical: the canonical order is total.
        let path2 = dir.path().join("c2.mm");
        back.save_counts(&path2).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn batches_are_normalized_and_cover_the_epoch(
        corpus in corpus_strategy(),
        batch_size in 1usize..6,
        seed in 0u64..50,
    ) {
        let batch_size = batch_size.min(corpus.n_docs());
        let mut seen = Vec::new();
        for batch in BatchIter::new(&corpus, batch_size, seed, true).unwrap() {
            for (b, &doc) in batch.doc_ids.iter().enumerate() {
                seen.push(doc);
                let col = batch.xnorm.column(b);
                let sum: f64 = col.sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
                prop_assert!(col.iter().all(|&x| x >= 0.0));
                // Exact ratio contract against the raw counts.
                let total: f64 = batch.x.column(b).sum();
                for (v, &count) in batch.x.column(b).iter().enumerate() {
                    prop_assert_eq!(col[v], count / total);
                }
            }
        }
        seen.sort_unstable();
        let expect: Vec<usize> = (0..corpus.n_docs()).collect();
        prop_assert_eq!(seen, expect);
    }

    #[test]
    fn npmi_stays_in_unit_interval_after_smoothing(corpus in corpus_strategy()) {
        use std::collections::BTreeSet;
        let words: BTreeSet<u32> = (0..corpus.vocab_size() as u32).collect();
        let stats = ottm_core::eval::build_cooccurrence(&corpus, &words);
        for a in 0..corpus.vocab_size() as u32 {
            for b in (a + 1)..corpus.vocab_size() as u32 {
                let v = ottm_core::eval::npmi_pair(&stats, a, b, 0.01).unwrap();
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v), "npmi {v}");
                // Joint counts can never exceed either margin.
                prop_assert!(stats.pair_df(a, b) <= stats.df(a).min(stats.df(b)));
            }
        }
    }

    #[test]
    fn cost_matrix_range_is_zero_to_two(
        entries_e in proptest::collection::vec(-10.0f64..10.0, 12),
        entries_g in proptest::collection::vec(-10.0f64..10.0, 9),
    ) {
        let e = Array2::from_shape_vec((3, 4), entries_e).unwrap();
        let g = Array2::from_shape_vec((3, 3), entries_g).unwrap();
        // Skip degenerate zero columns; those are rejected by contract.
        prop_assume!(e.columns().into_iter().all(|c| c.dot(&c) > 0.0));
        prop_assume!(g.columns().into_iter().all(|c| c.dot(&c) > 0.0));
        let words = WordEmbeddings::from_matrix(e).unwrap();
        let topics = TopicEmbeddings::from_matrix(g);
        let m = cost_matrix(&words, &topics).unwrap();
        for &v in m.matrix() {
            prop_assert!((0.0..=2.0).contains(&v));
        }
    }
}
