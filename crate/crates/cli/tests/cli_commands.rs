//! Subcommand behavior of the built binary, run against an embedded
//! in-process service with the mock backend.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_thoughtrag");

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

struct Fixture {
    _dir: TempDir,
    corpus: PathBuf,
    dataset: PathBuf,
    script: PathBuf,
    root: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let corpus = write_file(
        dir.path(),
        "corpus.jsonl",
        concat!(
            "{\"id\": \"d1\", \"title\": \"\", \"content\": \"insulin resistance\"}\n",
            "{\"id\": \"d2\", \"title\": \"\", \"content\": \"insulin insulin secretion\"}\n",
            "{\"id\": \"d3\", \"title\": \"\", \"content\": \"beta blocker\"}\n",
        ),
    );
    let dataset = write_file(
        dir.path(),
        "dataset.jsonl",
        concat!(
            "{\"qid\": \"q1\", \"question\": \"Marker QONE insulin question?\", ",
            "\"options\": {\"A\": \"a\", \"B\": \"b\", \"C\": \"c\", \"D\": \"d\"}, \"answer\": \"B\"}\n",
            "{\"qid\": \"q2\", \"question\": \"Marker QTWO beta question?\", ",
            "\"options\": {\"A\": \"a\", \"B\": \"b\", \"C\": \"c\", \"D\": \"d\"}, \"answer\": \"C\"}\n",
        ),
    );
    let script = write_file(
        dir.path(),
        "script.json",
        r#"[
            {"contains": "choose one option", "responses": ["The answer is: B"]},
            {"contains": "The answer is", "responses": ["B"]},
            {"contains": "QONE", "responses": ["a thought about insulin secretion"]},
            {"contains": "QTWO", "responses": ["a thought about beta blockers"]}
        ]"#,
    );
    let root = dir.path().to_path_buf();
    Fixture {
        _dir: dir,
        corpus,
        dataset,
        script,
        root,
    }
}

fn run(fixture: &Fixture, out_dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--mock-script")
        .arg(&fixture.script)
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("THOUGHTRAG_API_BASE")
        .env_remove("THOUGHTRAG_API_KEY")
        .env_remove("THOUGHTRAG_MODEL")
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn index_then_retrieve_from_the_saved_file() {
    let fx = fixture();
    let out1 = fx.root.join("out-index");
    let index_path = fx.root.join("toy.idx");

    let output = run(
        &fx,
        &out1,
        &[
            "index",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--out",
            index_path.to_str().unwrap(),
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("indexed 3 chunks"), "stdout: {text}");
    assert!(index_path.exists());
    assert!(out1.join("config_snapshot.json").exists());
    assert!(out1.join("index_info.json").exists());

    let out2 = fx.root.join("out-retrieve");
    let output = run(
        &fx,
        &out2,
        &[
            "retrieve",
            "--index",
            index_path.to_str().unwrap(),
            "--query",
            "insulin",
            "--k",
            "2",
        ],
    );
    let text = stdout_of(&output);
    let d2_at = text.find("d2").expect("d2 ranked");
    let d1_at = text.find("d1").expect("d1 ranked");
    assert!(d2_at < d1_at, "d2 ranks above d1: {text}");
    assert!(!text.contains("d3"));
    assert!(out2.join("retrieval.json").exists());
}

#[test]
fn ask_an_item_and_an_adhoc_question() {
    let fx = fixture();
    let out = fx.root.join("out-ask");
    let output = run(
        &fx,
        &out,
        &[
            "ask",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--item-file",
            fx.dataset.to_str().unwrap(),
            "--qid",
            "q1",
            "--strategy",
            "thought-rag",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("extracted answer: B"), "stdout: {text}");
    assert!(out.join("answer.json").exists());

    let out = fx.root.join("out-ask-adhoc");
    let output = run(
        &fx,
        &out,
        &[
            "ask",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--question",
            "free-form QONE insulin query",
            "--strategy",
            "question-rag",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("extracted answer: (none)"), "stdout: {text}");
}

#[test]
fn scaled_ask_honors_scale_flags() {
    let fx = fixture();
    let out = fx.root.join("out-scale");
    let output = run(
        &fx,
        &out,
        &[
            "ask",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--item-file",
            fx.dataset.to_str().unwrap(),
            "--strategy",
            "parallel",
            "--scale-m",
            "3",
            "--scale-temperature",
            "1.0",
            "--scale-top-p",
            "1.0",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("strategy: parallel_scale"), "stdout: {text}");

    let answer: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("answer.json")).unwrap()).unwrap();
    assert_eq!(answer["record"]["strategy"], "parallel_scale");

    let snapshot: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config_snapshot.json")).unwrap())
            .unwrap();
    assert_eq!(snapshot["config"]["sampling"]["scaling"]["temperature"], 1.0);
}

#[test]
fn build_prefs_writes_pairs_and_summary() {
    let fx = fixture();
    let out = fx.root.join("out-prefs");
    // Dedicated script: one chosen and one rejected thought for q1, mixed
    // answers. Skip q2 by passing a one-item dataset.
    let script = write_file(
        &fx.root,
        "prefs_script.json",
        r#"[
            {"contains": "TAGGOOD", "responses": ["B"]},
            {"contains": "TAGBAD", "responses": ["A"]},
            {"contains": "insulin resistance", "responses": [
                "ann0 answer is: B", "ann1 answer is: B",
                "s0 answer is: B", "s1 answer is: A", "s2 answer is: B",
                "s3 answer is: A", "s4 answer is: A"
            ]},
            {"contains": "QONE", "responses": [
                "thought insulin resistance TAGGOOD",
                "thought insulin resistance TAGBAD"
            ]}
        ]"#,
    );
    let one_item = write_file(
        &fx.root,
        "one.jsonl",
        "{\"qid\": \"q1\", \"question\": \"Marker QONE insulin question?\", \
         \"options\": {\"A\": \"a\", \"B\": \"b\", \"C\": \"c\", \"D\": \"d\"}, \"answer\": \"B\"}\n",
    );

    let output = Command::new(BIN)
        .arg("--mock-script")
        .arg(&script)
        .arg("--out-dir")
        .arg(&out)
        .arg("--seed")
        .arg("11")
        .args([
            "build-prefs",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--dataset",
            one_item.to_str().unwrap(),
            "--n-thoughts",
            "2",
            "--n-answers",
            "5",
        ])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert!(text.contains("built 3 pairs (1 thought, 2 answer)"), "stdout: {text}");

    let pairs_file = out.join("preference_pairs.jsonl");
    assert!(pairs_file.exists());
    let pairs = thoughtrag_core::prefs::import_dataset(&pairs_file).unwrap();
    assert_eq!(pairs.len(), 3);
    assert!(out.join("prefs_summary.json").exists());
}

#[test]
fn dpo_check_reports_ln2_for_equal_logprobs() {
    let fx = fixture();
    let out = fx.root.join("out-dpo");
    let input = write_file(
        &fx.root,
        "logprobs.jsonl",
        concat!(
            "{\"qid\": \"q1\", \"kind\": \"thought\", \"lp_pol_chosen\": -3.0, ",
            "\"lp_ref_chosen\": -3.0, \"lp_pol_rejected\": -3.0, \"lp_ref_rejected\": -3.0}\n",
            "{\"qid\": \"q2\", \"kind\": \"answer\", \"lp_pol_chosen\": -5.5, ",
            "\"lp_ref_chosen\": -5.5, \"lp_pol_rejected\": -5.5, \"lp_ref_rejected\": -5.5}\n",
        ),
    );
    let output = run(
        &fx,
        &out,
        &[
            "dpo-check",
            "--input",
            input.to_str().unwrap(),
            "--beta",
            "0.2",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("mean loss: 0.693147180560"), "stdout: {text}");
    assert!(out.join("dpo_report.json").exists());
}

#[test]
fn eval_single_compare_and_sweeps() {
    let fx = fixture();

    let out = fx.root.join("out-eval");
    let output = run(
        &fx,
        &out,
        &[
            "eval",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--dataset",
            fx.dataset.to_str().unwrap(),
            "--strategy",
            "question-rag",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("accuracy 0.5000 (1/2)"), "stdout: {text}");
    assert!(out.join("eval_dataset_question-rag.json").exists());

    let out = fx.root.join("out-compare");
    let output = run(
        &fx,
        &out,
        &[
            "eval",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--dataset",
            fx.dataset.to_str().unwrap(),
            "--compare",
            "question-rag,thought-rag",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("delta question-rag vs thought-rag"), "stdout: {text}");
    assert!(out.join("deltas_dataset.tsv").exists());

    let out = fx.root.join("out-sweepk");
    let output = run(
        &fx,
        &out,
        &[
            "eval",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--dataset",
            fx.dataset.to_str().unwrap(),
            "--sweep-k",
            "1,2",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("top_k=1"), "stdout: {text}");
    assert!(out.join("sweep_top_k_dataset.tsv").exists());
    assert!(out.join("sweep_top_k_dataset.svg").exists());

    let out = fx.root.join("out-sweepm");
    let output = run(
        &fx,
        &out,
        &[
            "eval",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--dataset",
            fx.dataset.to_str().unwrap(),
            "--sweep-m",
            "1,2",
        ],
    );
    let text = stdout_of(&output);
    assert!(text.contains("m=2"), "stdout: {text}");
    assert!(out.join("sweep_m_dataset.tsv").exists());
}

#[test]
fn worker_pool_size_does_not_change_results() {
    let fx = fixture();
    let accuracy_line = |out_name: &str, workers: &str| {
        let out = fx.root.join(out_name);
        let output = Command::new(BIN)
            .arg("--mock-script")
            .arg(&fx.script)
            .arg("--out-dir")
            .arg(&out)
            .arg("--workers")
            .arg(workers)
            .args([
                "eval",
                "--corpus",
                fx.corpus.to_str().unwrap(),
                "--dataset",
                fx.dataset.to_str().unwrap(),
                "--strategy",
                "question-rag",
            ])
            .output()
            .unwrap();
        let text = stdout_of(&output);
        text.lines()
            .find(|l| l.contains("accuracy"))
            .unwrap()
            .to_string()
    };
    // Rules are keyed per question, so a wider pool retrieves and answers
    // the same way.
    assert_eq!(accuracy_line("out-w1", "1"), accuracy_line("out-w4", "4"));
}

#[test]
fn errors_exit_nonzero_with_category_lines() {
    let fx = fixture();
    let out = fx.root.join("out-err");

    // Missing corpus file.
    let output = run(
        &fx,
        &out,
        &[
            "retrieve",
            "--corpus",
            fx.root.join("missing.jsonl").to_str().unwrap(),
            "--query",
            "insulin",
        ],
    );
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error[corpus]:"), "stderr: {stderr}");

    // Unknown strategy string.
    let output = run(
        &fx,
        &out,
        &[
            "ask",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--question",
            "anything",
            "--strategy",
            "best-of-n",
        ],
    );
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error[usage]:"), "stderr: {stderr}");

    // Eval without a mode.
    let output = run(
        &fx,
        &out,
        &[
            "eval",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--dataset",
            fx.dataset.to_str().unwrap(),
        ],
    );
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error[usage]:"), "stderr: {stderr}");

    // Mock backend selected without a script.
    let output = Command::new(BIN)
        .arg("--backend")
        .arg("mock")
        .arg("--out-dir")
        .arg(&out)
        .args(["retrieve", "--corpus", fx.corpus.to_str().unwrap(), "--query", "x"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error[serve]:"), "stderr: {stderr}");
}

#[test]
fn config_file_env_and_flags_layer_in_order() {
    let fx = fixture();
    let out = fx.root.join("out-layering");
    let config_file = write_file(
        &fx.root,
        "config.toml",
        "[bm25]\ntop_k = 7\nk1 = 0.9\n[llm]\nmodel = \"from-file\"\n",
    );

    let output = Command::new(BIN)
        .arg("--config")
        .arg(&config_file)
        .arg("--mock-script")
        .arg(&fx.script)
        .arg("--out-dir")
        .arg(&out)
        .arg("--top-k")
        .arg("3")
        .env("THOUGHTRAG_MODEL", "from-env")
        .args(["retrieve", "--corpus", fx.corpus.to_str().unwrap(), "--query", "insulin"])
        .output()
        .unwrap();
    stdout_of(&output);

    let snapshot: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config_snapshot.json")).unwrap())
            .unwrap();
    // Flag beats file; env beats file; untouched file values survive.
    assert_eq!(snapshot["config"]["bm25"]["top_k"], 3);
    assert_eq!(snapshot["config"]["bm25"]["k1"], 0.9);
    assert_eq!(snapshot["config"]["llm"]["model"], "from-env");
}

#[test]
fn remote_server_mode_works() {
    let fx = fixture();
    // Start a service, then point the CLI at it.
    let rt = tokio::runtime::Runtime::new().unwrap();
    let (server, base_url) = rt.block_on(async {
        let mut config = thoughtrag_core::config::RunConfig::defaults();
        config.llm.backend = thoughtrag_core::config::BackendKind::Mock;
        config.llm.mock_script = Some(fx.script.clone());
        let server = thoughtrag_server::start(config, "127.0.0.1:0").await.unwrap();
        let url = server.base_url();
        (server, url)
    });

    let out = fx.root.join("out-remote");
    let output = Command::new(BIN)
        .arg("--server")
        .arg(&base_url)
        .arg("--out-dir")
        .arg(&out)
        .args([
            "retrieve",
            "--corpus",
            fx.corpus.to_str().unwrap(),
            "--query",
            "insulin",
        ])
        .output()
        .unwrap();
    let text = stdout_of(&output);
    assert!(text.contains("d2"), "stdout: {text}");

    rt.block_on(server.shutdown());
}
