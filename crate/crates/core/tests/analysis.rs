use proptest::prelude::*;
use tfree_core::analysis::{
    coverage_stats, duplicates, fertility, read_documents, CoverageAccumulator, DocFormat,
    Document, FertilityAccumulator, TokenCounter,
};
use tfree_core::SplitConfig;

fn docs(texts: &[String]) -> Vec<Document> {
    texts.iter().map(|t| Document::new(t.as_str())).collect()
}

proptest! {
    #[test]
    fn reports_ignore_document_order(
        texts in prop::collection::vec("[a-zA-Z0-9 .,!\n]{0,40}", 1..20),
        seed in any::<u64>(),
    ) {
        let mut shuffled = texts.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize).wrapping_mul(i + 7) % (i + 1));
        }
        let sc = SplitConfig::default();
        let counter = TokenCounter::TFree(sc.clone());
        prop_assert_eq!(coverage_stats(&docs(&texts), &sc), coverage_stats(&docs(&shuffled), &sc));
        prop_assert_eq!(
            fertility(&docs(&texts), &counter).unwrap(),
            fertility(&docs(&shuffled), &counter).unwrap()
        );
    }

    #[test]
    fn chunked_accumulation_matches_single_pass(
        texts in prop::collection::vec("[a-z_ 0-9]{0,30}", 1..30),
        chunk in 1usize..8,
    ) {
        let sc = SplitConfig::default();
        let counter = TokenCounter::TFree(sc.clone());
        let all = docs(&texts);
        let mut cov = CoverageAccumulator::default();
        let mut fert = FertilityAccumulator::default();
        for part in all.chunks(chunk) {
            let mut c = CoverageAccumulator::default();
            let mut f = FertilityAccumulator::default();
            for d in part {
                c.add_text(&d.text, &sc);
                f.add(d, &counter).unwrap();
            }
            cov = cov.merge(c);
            fert = fert.merge(f);
        }
        prop_assert_eq!(cov.finish(), coverage_stats(&all, &sc));
        prop_assert_eq!(fert.finish(), fertility(&all, &counter).unwrap());
    }

    #[test]
    fn single_spaced_words_have_unit_fertility(
        words in prop::collection::vec("[a-zA-Z]{1,32}", 1..50),
    ) {
        let doc = Document::new(words.join(" "));
        let r = fertility([&doc], &TokenCounter::TFree(SplitConfig::default())).unwrap();
        prop_assert_eq!(r.fertility, Some(1.0));
    }
}

#[test]
fn external_counts_come_from_jsonl() {
    let input = "{\"text\": \"In 2024\", \"token_count\": 3}\n\n{\"text\": \"a b c\", \"token_count\": 3}\n";
    let all = read_documents(input.as_bytes(), DocFormat::Jsonl).unwrap();
    assert_eq!(all.len(), 2);
    let r = fertility(&all, &TokenCounter::External).unwrap();
    assert_eq!((r.tokens, r.reference_words), (6, 5));
    assert_eq!(r.fertility, Some(1.2));
}

#[test]
fn missing_external_count_is_an_input_error() {
    let err = fertility([&Document::new("x")], &TokenCounter::External).unwrap_err();
    assert!(err.is_input());
}

#[test]
fn planted_vocabulary_counts_each_category() {
    let mut vocab: Vec<String> = (0..500).map(|i| format!("w{i}x")).collect();
    vocab.extend((0..100).map(|i| format!("W{i}X")));
    vocab.extend((100..300).map(|i| format!("Ġw{i}x")));
    vocab.extend((0..50).map(|i| format!("{}", 100 + i)));
    vocab.extend((0..150).map(|i| format!("z{i}")));
    let r = duplicates(&vocab, 'Ġ').unwrap();
    assert_eq!(r.vocab_size, 1000);
    assert_eq!(
        (r.capitalization, r.whitespace, r.digit, r.total),
        (100, 200, 50, 350)
    );
    assert_eq!(r.total_pct, 35.0);
}

#[test]
fn overlapping_categories_count_once_in_total() {
    // "ĠA" is a case variant of "Ġa" and a marker variant of "A"
    let r = duplicates(&["a", "A", "Ġa", "ĠA", "12"], 'Ġ').unwrap();
    assert_eq!((r.capitalization, r.whitespace, r.digit), (2, 2, 1));
    assert_eq!(r.total, 4);
}

#[test]
fn coverage_counts_only_words() {
    let sc = SplitConfig::default();
    let r = coverage_stats([&Document::new("ab, 12 ab!\n")], &sc);
    assert_eq!(r.top_words.points, vec![(1, 100.0)]);
    assert_eq!(r.by_length.points, vec![(1, 0.0), (2, 100.0)]);
    // " ab", "ab " twice each
    assert_eq!(r.top_trigrams.points, vec![(1, 50.0), (2, 100.0)]);
}
