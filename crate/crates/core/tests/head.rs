use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfree_core::head::{sigmoid, Dictionary};
use tfree_core::trigram::TFreeConfig;

fn random_words(rng: &mut ChaCha8Rng, d: usize) -> Vec<String> {
    let mut words = std::collections::BTreeSet::new();
    while words.len() < d {
        let len = rng.random_range(1..10);
        let w: String = (0..len)
            .map(|_| rng.random_range(b'a'..=b'z') as char)
            .collect();
        words.insert(w);
    }
    let mut words: Vec<String> = words.into_iter().collect();
    // deterministic shuffle so order is not alphabetical
    for i in (1..words.len()).rev() {
        let j = rng.random_range(0..=i);
        words.swap(i, j);
    }
    words
}

/// Dense d×v product followed by per-row normalization.
fn dense_scores(dict: &Dictionary, logits: &[f64]) -> Vec<f64> {
    let v = logits.len();
    (0..dict.len())
        .map(|i| {
            let mut row = vec![0.0; v];
            for &j in dict.row(i) {
                row[j as usize] = 1.0;
            }
            let dot: f64 = row.iter().zip(logits).map(|(a, z)| a * sigmoid(*z)).sum();
            dot / row.iter().sum::<f64>()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permuting_rows_permutes_scores(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = TFreeConfig::new(500, 3, 1).unwrap();
        let words = random_words(&mut rng, 20);
        let mut rev = words.clone();
        rev.reverse();
        let logits: Vec<f64> = (0..500).map(|_| rng.random_range(-4.0..4.0)).collect();
        let a = Dictionary::compile(&words, &cfg).unwrap().scores(&logits).unwrap();
        let mut b = Dictionary::compile(&rev, &cfg).unwrap().scores(&logits).unwrap();
        b.reverse();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scores_are_probabilities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = TFreeConfig::new(300, 4, 0).unwrap();
        let dict = Dictionary::compile(&random_words(&mut rng, 30), &cfg).unwrap();
        let logits: Vec<f64> = (0..300).map(|_| rng.random_range(-30.0..30.0)).collect();
        let raw = dict.scores(&logits).unwrap();
        prop_assert!(raw.iter().all(|&s| s > 0.0 && s < 1.0));
        let top = dict.decode_top(&logits, dict.len()).unwrap();
        let ranked = top.rank_scores.unwrap();
        let total: f64 = ranked.iter().map(|r| r.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(dict.tokens().contains(&top.token));
        prop_assert_eq!(&ranked[0].0, &top.token);
    }
}

#[test]
fn identical_rows_score_identically() {
    // with a single row every pattern collapses to {0}
    let cfg = TFreeConfig::new(1, 2, 0).unwrap();
    let dict = Dictionary::compile(&["alpha", "beta", "gamma"], &cfg).unwrap();
    let s = dict.scores(&[0.7]).unwrap();
    assert!(s.iter().all(|&x| x == s[0]));
    assert_eq!(dict.decode(&[0.7]).unwrap().index, 0);
}

#[test]
fn sparse_matches_dense_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = TFreeConfig::new(2000, 5, 2).unwrap();
    let dict = Dictionary::compile(&random_words(&mut rng, 200), &cfg).unwrap();
    let logits: Vec<f64> = (0..2000).map(|_| rng.random_range(-6.0..6.0)).collect();
    let sparse = dict.scores(&logits).unwrap();
    let dense = dense_scores(&dict, &logits);
    for (a, b) in sparse.iter().zip(&dense) {
        assert!((a - b).abs() <= 1e-9);
    }
}
