use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;

use proptest::prelude::*;
use tfree_core::splitter::Token;
use tfree_core::trigram::{
    lowercase_overlap, lowercase_rows, pattern, read_golden, text_pattern, trigrams, write_golden,
    PatternCache, TFreeConfig, GOLDEN_TOKENS,
};

fn data(name: &str) -> BufReader<File> {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    BufReader::new(File::open(path).unwrap())
}

#[test]
fn golden_vectors_match_reference_script() {
    for file in ["golden_v8000_m10_k0.txt", "golden_v8000_m7_k3.txt"] {
        let (cfg, records) = read_golden(data(file)).unwrap();
        assert!(!records.is_empty());
        for rec in records {
            let got = text_pattern(&rec.token, &cfg).unwrap();
            assert_eq!(
                got.indices(),
                rec.indices.as_slice(),
                "{file}: {}",
                rec.token
            );
        }
    }
}

#[test]
fn writer_reproduces_reference_file() {
    let mut out = Vec::new();
    write_golden(&mut out, &TFreeConfig::default(), &GOLDEN_TOKENS).unwrap();
    let path = format!(
        "{}/tests/data/golden_v8000_m10_k0.txt",
        env!("CARGO_MANIFEST_DIR")
    );
    assert_eq!(
        String::from_utf8(out).unwrap(),
        std::fs::read_to_string(path).unwrap()
    );
}

#[test]
fn unrelated_words_barely_overlap() {
    let cfg = TFreeConfig::default();
    let a = Token::Word("QQQQ".into());
    let b = Token::Word("zzzz".into());
    let (pa, pb) = (pattern(&a, &cfg), pattern(&b, &cfg));
    let expected = (pa.len() * pb.len()) as f64 / cfg.v() as f64;
    assert!((lowercase_overlap(&a, &b, &cfg) as f64) <= 5.0 * expected.max(1.0));
}

#[test]
fn case_variants_share_lowercase_rows() {
    let cfg = TFreeConfig::new(8000, 10, 4).unwrap();
    let a = Token::Word("Word".into());
    let b = Token::Word("word".into());
    let shared = lowercase_rows(&a, &cfg);
    assert!(lowercase_overlap(&a, &b, &cfg) >= shared.len());
    assert!(pattern(&b, &cfg).is_superset_of(&shared));
}

proptest! {
    #[test]
    fn ascii_trigram_count_is_length(word in "[ -~]{1,40}") {
        prop_assert_eq!(trigrams(&word).unwrap().len(), word.len());
    }

    #[test]
    fn pattern_bounds(word in "\\PC{1,20}", v in 1usize..20_000, m in 1usize..12) {
        let cfg = TFreeConfig::new(v, m, m / 2).unwrap();
        let p = text_pattern(&word, &cfg).unwrap();
        prop_assert!(p.len() <= word.len() * m);
        prop_assert!(p.indices().iter().all(|&i| (i as usize) < v));
        let sorted: BTreeSet<u32> = p.indices().iter().copied().collect();
        prop_assert_eq!(sorted.len(), p.len());
        prop_assert_eq!(text_pattern(&word, &cfg).unwrap(), p);
    }

    #[test]
    fn cache_is_invisible(words in proptest::collection::vec("[a-zA-Z]{1,8}", 1..20)) {
        let cfg = TFreeConfig::new(4096, 5, 2).unwrap();
        let cache = PatternCache::new(cfg);
        for w in &words {
            let t = Token::Word(w.clone());
            prop_assert_eq!(cache.pattern(&t), pattern(&t, &cfg));
        }
    }
}
