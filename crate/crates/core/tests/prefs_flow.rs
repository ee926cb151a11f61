//! Preference-pair construction against scripted backends: annotation
//! rule conformance over all four criterion combinations, pairing-order
//! enumeration, dataset assembly, and export round-trips.

use std::collections::BTreeMap;
use std::sync::Arc;

use thoughtrag_core::bm25::{Bm25Params, Searcher};
use thoughtrag_core::corpus::{Corpus, DocumentChunk};
use thoughtrag_core::llm::{MockGenerator, MockRule, SamplingParams};
use thoughtrag_core::mcqa::McqaItem;
use thoughtrag_core::pipeline::extract_option;
use thoughtrag_core::prefs::{
    annotate_thought, build_answer_pairs, build_dataset, build_thought_pairs, export_dataset,
    import_dataset, PairKind, PrefsConfig, PrefsError,
};
use thoughtrag_core::prompts::PromptTemplates;

/// Four-option item whose question carries a unique marker token for
/// script routing. Gold answer is B.
fn item(qid: &str, marker: &str) -> McqaItem {
    McqaItem::new(
        qid.into(),
        format!("Stem with no corpus vocabulary {marker} describing a presentation?"),
        BTreeMap::from([
            ('A', "first option".to_string()),
            ('B', "second option".to_string()),
            ('C', "third option".to_string()),
            ('D', "fourth option".to_string()),
        ]),
        Some('B'),
    )
    .unwrap()
}

/// One chunk per context token. Thought texts mention exactly one of
/// these tokens, so each thought retrieves exactly its own chunk.
fn corpus() -> Corpus {
    let chunk = |id: &str, key: &str| DocumentChunk {
        id: id.into(),
        title: String::new(),
        text: format!("{key} reference passage"),
    };
    Corpus::from_chunks(vec![
        chunk("chunk-alpha", "ctxalpha"),
        chunk("chunk-beta", "ctxbeta"),
        chunk("chunk-gamma", "ctxgamma"),
        chunk("chunk-delta", "ctxdelta"),
    ])
    .unwrap()
}

fn searcher() -> Searcher {
    Searcher::build(corpus(), Bm25Params::default()).unwrap()
}

fn thought_text(ctx: &str, tag: &str) -> String {
    format!("reasoning mentions {ctx} {tag}")
}

/// Script covering all four (direct, rag) annotation combinations:
/// thought 0 -> (1,1), thought 1 -> (1,0), thought 2 -> (0,1),
/// thought 3 -> (0,0). Direct-completion rules are keyed on the thought
/// tag (only completion prompts contain thought text), context rules on
/// the chunk token (only retrieval-augmented answer prompts contain chunk
/// text), and the question-marker rule, which would match every prompt,
/// comes last.
fn annotation_script(marker: &str) -> MockGenerator {
    MockGenerator::from_rules(vec![
        MockRule::contains("TAG11", vec!["B".into()]),
        MockRule::contains("TAG10", vec!["B".into()]),
        MockRule::contains("TAG01", vec!["A".into()]),
        MockRule::contains("TAG00", vec!["zzz nothing usable".into()]),
        MockRule::contains("ctxalpha", vec!["The answer is: B".into()]),
        MockRule::contains("ctxbeta", vec!["The answer is: A".into()]),
        MockRule::contains("ctxgamma", vec!["The answer is: B".into()]),
        MockRule::contains("ctxdelta", vec!["The answer is: A".into()]),
        MockRule::contains(
            marker,
            vec![
                thought_text("ctxalpha", "TAG11"),
                thought_text("ctxbeta", "TAG10"),
                thought_text("ctxgamma", "TAG01"),
                thought_text("ctxdelta", "TAG00"),
            ],
        ),
    ])
    .unwrap()
}

fn config(n_thoughts: usize, n_answers: usize) -> PrefsConfig {
    PrefsConfig {
        n_thoughts,
        n_answers,
        answer_pairs_per_item: 2,
        sampling: SamplingParams::default(),
        seed: 17,
    }
}

#[tokio::test]
async fn annotation_covers_all_four_combinations() {
    let generator = annotation_script("QMARKX");
    let searcher = searcher();
    let templates = PromptTemplates::default();
    let item = item("q1", "QMARKX");

    let phase = build_thought_pairs(&generator, &searcher, &item, &config(4, 5), &templates)
        .await
        .unwrap();
    let bits: Vec<(bool, bool)> = phase
        .annotations
        .iter()
        .map(|a| (a.direct_correct, a.rag_correct))
        .collect();
    assert_eq!(
        bits,
        [(true, true), (true, false), (false, true), (false, false)]
    );

    // Chosen only when both criteria hold.
    let chosen: Vec<bool> = phase.annotations.iter().map(|a| a.is_chosen()).collect();
    assert_eq!(chosen, [true, false, false, false]);

    // First chosen paired with first rejected, by sample index.
    let pair = phase.pair.expect("one pair emitted");
    assert_eq!(pair.kind, PairKind::Thought);
    assert_eq!(pair.chosen, thought_text("ctxalpha", "TAG11"));
    assert_eq!(pair.rejected, thought_text("ctxbeta", "TAG10"));
}

#[tokio::test]
async fn annotation_soundness_reruns_to_the_same_bits() {
    let generator = annotation_script("QMARKX");
    let searcher = searcher();
    let templates = PromptTemplates::default();
    let item = item("q1", "QMARKX");

    let phase = build_thought_pairs(&generator, &searcher, &item, &config(4, 5), &templates)
        .await
        .unwrap();
    let pair = phase.pair.clone().expect("pair emitted");

    let chosen_sample = phase
        .samples
        .iter()
        .find(|s| s.text == pair.chosen)
        .expect("chosen text is a sampled thought");
    let rechecked = annotate_thought(&generator, &searcher, &item, chosen_sample, &templates)
        .await
        .unwrap();
    assert!(rechecked.direct_correct && rechecked.rag_correct);

    let rejected_sample = phase
        .samples
        .iter()
        .find(|s| s.text == pair.rejected)
        .expect("rejected text is a sampled thought");
    let rechecked = annotate_thought(&generator, &searcher, &item, rejected_sample, &templates)
        .await
        .unwrap();
    assert!(!(rechecked.direct_correct && rechecked.rag_correct));
}

#[tokio::test]
async fn spec_enumeration_three_samples_pairs_first_chosen_with_first_rejected() {
    // Annotations (1,1), (1,0), (0,1): the pair is (sample 0, sample 1).
    let generator = MockGenerator::from_rules(vec![
        MockRule::contains("TAG11", vec!["B".into()]),
        MockRule::contains("TAG10", vec!["B".into()]),
        MockRule::contains("TAG01", vec!["A".into()]),
        MockRule::contains("ctxalpha", vec!["The answer is: B".into()]),
        MockRule::contains("ctxbeta", vec!["The answer is: A".into()]),
        MockRule::contains("ctxgamma", vec!["The answer is: B".into()]),
        MockRule::contains(
            "QMARKX",
            vec![
                thought_text("ctxalpha", "TAG11"),
                thought_text("ctxbeta", "TAG10"),
                thought_text("ctxgamma", "TAG01"),
            ],
        ),
    ])
    .unwrap();
    let searcher = searcher();
    let phase = build_thought_pairs(
        &generator,
        &searcher,
        &item("q1", "QMARKX"),
        &config(3, 5),
        &PromptTemplates::default(),
    )
    .await
    .unwrap();
    let pair = phase.pair.expect("pair emitted");
    assert_eq!(pair.chosen, thought_text("ctxalpha", "TAG11"));
    assert_eq!(pair.rejected, thought_text("ctxbeta", "TAG10"));
}

#[tokio::test]
async fn one_sided_items_yield_no_thought_pair() {
    // All chosen: every thought leads to correct direct and rag answers.
    let all_chosen = MockGenerator::from_rules(vec![
        MockRule::contains("TAG", vec!["B".into()]),
        MockRule::contains("ctxalpha", vec!["The answer is: B".into()]),
        MockRule::contains(
            "QMARKX",
            vec![
                thought_text("ctxalpha", "TAG-one"),
                thought_text("ctxalpha", "TAG-two"),
            ],
        ),
    ])
    .unwrap();
    let searcher = searcher();
    let templates = PromptTemplates::default();
    let phase = build_thought_pairs(
        &all_chosen,
        &searcher,
        &item("q1", "QMARKX"),
        &config(2, 5),
        &templates,
    )
    .await
    .unwrap();
    assert!(phase.pair.is_none());
    assert!(phase.annotations.iter().all(|a| a.is_chosen()));

    // All rejected: direct completions never parse.
    let all_rejected = MockGenerator::from_rules(vec![
        MockRule::contains("TAG", vec!["no label".into()]),
        MockRule::contains("ctxalpha", vec!["The answer is: A".into()]),
        MockRule::contains(
            "QMARKX",
            vec![
                thought_text("ctxalpha", "TAG-one"),
                thought_text("ctxalpha", "TAG-two"),
            ],
        ),
    ])
    .unwrap();
    let phase = build_thought_pairs(
        &all_rejected,
        &searcher,
        &item("q1", "QMARKX"),
        &config(2, 5),
        &templates,
    )
    .await
    .unwrap();
    assert!(phase.pair.is_none());
    assert!(phase.annotations.iter().all(|a| !a.is_chosen()));
}

fn answer_script(pattern: &[bool]) -> MockGenerator {
    // Unique completion texts so the pairing order is observable. Correct
    // answers extract to B, incorrect ones to A.
    let responses: Vec<String> = pattern
        .iter()
        .enumerate()
        .map(|(i, &correct)| {
            let label = if correct { 'B' } else { 'A' };
            format!("sample number {i}... the answer is: {label}")
        })
        .collect();
    MockGenerator::from_rules(vec![
        MockRule::contains("ctxalpha", responses),
        MockRule::contains("QMARKX", vec![thought_text("ctxalpha", "TAG-ctx")]),
    ])
    .unwrap()
}

async fn answer_pair_texts(pattern: &[bool]) -> Vec<(String, String)> {
    let generator = answer_script(pattern);
    let searcher = searcher();
    let templates = PromptTemplates::default();
    let item = item("q1", "QMARKX");
    let thought = thoughtrag_core::pipeline::ThoughtSample::new(
        "q1".into(),
        thought_text("ctxalpha", "TAG-ctx"),
        SamplingParams::default(),
        0,
    )
    .unwrap();
    let (pairs, sampled, _) = build_answer_pairs(
        &generator,
        &searcher,
        &item,
        &thought,
        &config(1, pattern.len()),
        &templates,
    )
    .await
    .unwrap();
    assert_eq!(sampled, pattern.len());
    pairs
        .into_iter()
        .map(|p| {
            assert_eq!(p.kind, PairKind::Answer);
            assert!(p.prompt.contains("ctxalpha reference passage"));
            (p.chosen, p.rejected)
        })
        .collect()
}

#[tokio::test]
async fn answer_pairing_follows_sample_order() {
    // Pattern [1,0,1,0,0]: pairs (s0, s1) and (s2, s3).
    let pairs = answer_pair_texts(&[true, false, true, false, false]).await;
    assert_eq!(pairs.len(), 2);
    assert!(pairs[0].0.starts_with("sample number 0"));
    assert!(pairs[0].1.starts_with("sample number 1"));
    assert!(pairs[1].0.starts_with("sample number 2"));
    assert!(pairs[1].1.starts_with("sample number 3"));

    // Every chosen member extracts to gold, every rejected one does not.
    let labels = std::collections::BTreeSet::from(['A', 'B', 'C', 'D']);
    for (chosen, rejected) in &pairs {
        assert_eq!(extract_option(chosen, &labels), Some('B'));
        assert_ne!(extract_option(rejected, &labels), Some('B'));
    }
}

#[tokio::test]
async fn all_correct_answers_yield_no_pair() {
    let pairs = answer_pair_texts(&[true, true, true, true, true]).await;
    assert!(pairs.is_empty());
}

#[tokio::test]
async fn single_correct_late_sample_pairs_with_first_incorrect() {
    // Pattern [0,1,0,0,0]: one pair (s1, s0).
    let pairs = answer_pair_texts(&[false, true, false, false, false]).await;
    assert_eq!(pairs.len(), 1);
    assert!(pairs[0].0.starts_with("sample number 1"));
    assert!(pairs[0].1.starts_with("sample number 0"));
}

#[tokio::test]
async fn answer_pairs_capped_per_item() {
    // Pattern with 3 chosen and 3 rejected would allow 3 pairs; the cap
    // of 2 applies.
    let pairs = answer_pair_texts(&[true, false, true, false, true, false]).await;
    assert_eq!(pairs.len(), 2);
}

/// Three items: q1 yields one thought pair and no answer pairs, q2 no
/// thought pair and two answer pairs, q3 nothing.
fn dataset_fixture() -> (MockGenerator, Searcher, Vec<McqaItem>) {
    let items = vec![item("q1", "QMARK1"), item("q2", "QMARK2"), item("q3", "QMARK3")];
    let generator = MockGenerator::from_rules(vec![
        // q1: thought 0 chosen, thought 1 rejected (direct wrong); all
        // five answer samples correct, so no answer pair.
        MockRule::contains("TAG-A", vec!["B".into()]),
        MockRule::contains("TAG-B", vec!["A".into()]),
        MockRule::contains("ctxalpha", vec!["The answer is: B".into()]),
        MockRule::contains(
            "QMARK1",
            vec![
                thought_text("ctxalpha", "TAG-A"),
                thought_text("ctxalpha", "TAG-B"),
            ],
        ),
        // q2: both thoughts rejected (unparseable direct), answers
        // alternate correct/incorrect, giving two pairs. The first two
        // ctxbeta responses are consumed by the per-thought rag
        // annotations; the five after them are the answer samples.
        MockRule::contains("TAG-C", vec!["nothing".into()]),
        MockRule::contains(
            "ctxbeta",
            vec![
                "q2 annotation zero, answer is: A".into(),
                "q2 annotation one, answer is: A".into(),
                "q2 sample zero, answer is: B".into(),
                "q2 sample one, answer is: A".into(),
                "q2 sample two, answer is: B".into(),
                "q2 sample three, answer is: A".into(),
                "q2 sample four, answer is: A".into(),
            ],
        ),
        MockRule::contains(
            "QMARK2",
            vec![
                thought_text("ctxbeta", "TAG-C"),
                thought_text("ctxbeta", "TAG-C two"),
            ],
        ),
        // q3: every thought chosen and every answer correct, so nothing.
        MockRule::contains("TAG-D", vec!["B".into()]),
        MockRule::contains("ctxgamma", vec!["The answer is: B".into()]),
        MockRule::contains(
            "QMARK3",
            vec![
                thought_text("ctxgamma", "TAG-D"),
                thought_text("ctxgamma", "TAG-D two"),
            ],
        ),
    ])
    .unwrap();
    (generator, searcher(), items)
}

#[tokio::test]
async fn dataset_counts_and_seeded_permutation() {
    let (generator, searcher, items) = dataset_fixture();
    let templates = PromptTemplates::default();
    let cfg = config(2, 5);

    let (dataset, summary) = build_dataset(&generator, &searcher, &items, &cfg, &templates, 1)
        .await
        .unwrap();
    assert_eq!(summary.thought_pairs, 1);
    assert_eq!(summary.answer_pairs, 2);
    assert_eq!(dataset.pairs.len(), 3);
    assert_eq!(summary.items_processed, 3);
    assert_eq!(summary.per_item.len(), 3);
    assert_eq!(
        (summary.per_item[0].thought_pairs, summary.per_item[0].answer_pairs),
        (1, 0)
    );
    assert_eq!(
        (summary.per_item[1].thought_pairs, summary.per_item[1].answer_pairs),
        (0, 2)
    );
    assert_eq!(
        (summary.per_item[2].thought_pairs, summary.per_item[2].answer_pairs),
        (0, 0)
    );

    // Exported per-kind counts equal builder-emitted counts.
    let thought_count = dataset.pairs.iter().filter(|p| p.kind == PairKind::Thought).count();
    let answer_count = dataset.pairs.iter().filter(|p| p.kind == PairKind::Answer).count();
    assert_eq!(thought_count, summary.thought_pairs);
    assert_eq!(answer_count, summary.answer_pairs);

    // Same seed on fresh backends reproduces the exact order; the shuffle
    // is a permutation of the same multiset either way.
    let (generator2, searcher2, items2) = dataset_fixture();
    let (dataset2, _) = build_dataset(&generator2, &searcher2, &items2, &cfg, &templates, 1)
        .await
        .unwrap();
    assert_eq!(dataset.pairs, dataset2.pairs);

    let (generator3, searcher3, items3) = dataset_fixture();
    let other_seed = PrefsConfig { seed: 18, ..cfg };
    let (dataset3, _) = build_dataset(&generator3, &searcher3, &items3, &other_seed, &templates, 1)
        .await
        .unwrap();
    let mut sorted_a = dataset.pairs.clone();
    let mut sorted_b = dataset3.pairs.clone();
    sorted_a.sort_by(|x, y| x.qid.cmp(&y.qid).then_with(|| x.chosen.cmp(&y.chosen)));
    sorted_b.sort_by(|x, y| x.qid.cmp(&y.qid).then_with(|| x.chosen.cmp(&y.chosen)));
    assert_eq!(sorted_a, sorted_b);
}

#[tokio::test]
async fn concurrent_build_collects_the_same_pairs() {
    let (generator, searcher, items) = dataset_fixture();
    let templates = PromptTemplates::default();
    let cfg = config(2, 5);
    let (dataset, _) = build_dataset(&generator, &searcher, &items, &cfg, &templates, 4)
        .await
        .unwrap();
    // Rules here are keyed per item, so a 4-wide pool changes nothing.
    let (generator2, searcher2, items2) = dataset_fixture();
    let (sequential, _) = build_dataset(&generator2, &searcher2, &items2, &cfg, &templates, 1)
        .await
        .unwrap();
    assert_eq!(dataset.pairs, sequential.pairs);
}

#[tokio::test]
async fn zero_pairs_is_an_error() {
    let generator = MockGenerator::from_rules(vec![
        MockRule::contains("TAG-D", vec!["B".into()]),
        MockRule::contains("ctxgamma", vec!["The answer is: B".into()]),
        MockRule::contains("QMARK3", vec![thought_text("ctxgamma", "TAG-D")]),
    ])
    .unwrap();
    let result = build_dataset(
        &generator,
        &searcher(),
        &[item("q3", "QMARK3")],
        &config(1, 2),
        &PromptTemplates::default(),
        1,
    )
    .await;
    assert!(matches!(result, Err(PrefsError::EmptyDataset)));
}

#[tokio::test]
async fn identical_chosen_and_rejected_texts_skip_the_pair() {
    // Two byte-identical thoughts whose direct completions differ via a
    // sequence rule: the first annotates chosen, the second rejected.
    // Pairing them would make chosen == rejected, so the pair is skipped
    // and counted.
    let generator = MockGenerator::from_rules(vec![
        MockRule::contains("identical reasoning", vec!["B".into(), "A".into()]),
        MockRule::contains("ctxalpha", vec!["The answer is: B".into()]),
        MockRule::contains(
            "QMARKX",
            vec![
                "identical reasoning ctxalpha".into(),
                "identical reasoning ctxalpha".into(),
            ],
        ),
    ])
    .unwrap();
    let searcher = searcher();
    let phase = build_thought_pairs(
        &generator,
        &searcher,
        &item("q1", "QMARKX"),
        &config(2, 5),
        &PromptTemplates::default(),
    )
    .await
    .unwrap();
    // Sanity: the sequence rule really did split the annotations. The
    // completion prompt contains the thought text, so the first direct
    // completion returns B (chosen) and the second A (rejected).
    let chosen_bits: Vec<bool> = phase.annotations.iter().map(|a| a.is_chosen()).collect();
    assert_eq!(chosen_bits, [true, false]);
    assert!(phase.pair.is_none());
    assert_eq!(phase.degenerate_skipped, 1);
}

#[tokio::test]
async fn missing_gold_label_is_an_error() {
    let ungraded = McqaItem::new(
        "q9".into(),
        "No gold label here QMARK9?".into(),
        BTreeMap::from([
            ('A', "a".to_string()),
            ('B', "b".to_string()),
            ('C', "c".to_string()),
            ('D', "d".to_string()),
        ]),
        None,
    )
    .unwrap();
    let generator = MockGenerator::from_rules(vec![MockRule::contains("QMARK9", vec!["t".into()])])
        .unwrap();
    let result = build_thought_pairs(
        &generator,
        &searcher(),
        &ungraded,
        &config(1, 1),
        &PromptTemplates::default(),
    )
    .await;
    assert!(matches!(result, Err(PrefsError::MissingGold { .. })));
}

#[tokio::test]
async fn export_import_export_is_byte_identical() {
    let (generator, searcher, items) = dataset_fixture();
    let (dataset, _) = build_dataset(
        &generator,
        &searcher,
        &items,
        &config(2, 5),
        &PromptTemplates::default(),
        1,
    )
    .await
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("pairs.jsonl");
    let second = dir.path().join("pairs2.jsonl");
    export_dataset(&dataset.pairs, &first).unwrap();
    let imported = import_dataset(&first).unwrap();
    assert_eq!(imported, dataset.pairs);
    export_dataset(&imported, &second).unwrap();
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );

    // Prompts span multiple lines; each record still occupies one line.
    let text = std::fs::read_to_string(&first).unwrap();
    assert_eq!(text.lines().count(), dataset.pairs.len());
    for pair in &dataset.pairs {
        assert!(pair.prompt.contains('\n'));
    }
}

#[tokio::test]
async fn export_uses_the_documented_field_order() {
    let pair = thoughtrag_core::prefs::PreferencePair::new(
        "q1".into(),
        PairKind::Thought,
        "prompt\nwith newline".into(),
        "chosen text".into(),
        "rejected text".into(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.jsonl");
    export_dataset(std::slice::from_ref(&pair), &path).unwrap();
    let line = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        line,
        "{\"prompt\":\"prompt\\nwith newline\",\"chosen\":\"chosen text\",\"rejected\":\"rejected text\",\"kind\":\"thought\",\"qid\":\"q1\"}\n"
    );
}

#[tokio::test]
async fn context_thought_prefers_first_chosen() {
    let generator = annotation_script("QMARKX");
    let searcher = searcher();
    let phase = build_thought_pairs(
        &generator,
        &searcher,
        &item("q1", "QMARKX"),
        &config(4, 5),
        &PromptTemplates::default(),
    )
    .await
    .unwrap();
    // Thought 0 is the only chosen one.
    assert_eq!(
        phase.context_thought().unwrap().text,
        thought_text("ctxalpha", "TAG11")
    );
}

#[tokio::test]
async fn searcher_is_shared_not_rebuilt() {
    // Arc clones of corpus and index across with_params keep one copy.
    let searcher = searcher();
    let scoped = searcher.with_params(Bm25Params {
        top_k: 2,
        ..*searcher.params()
    });
    assert!(Arc::ptr_eq(searcher.index(), scoped.index()));
}
