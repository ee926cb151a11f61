//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "thoughtrag",
    version,
    about = "Thought-guided retrieval-augmented QA: BM25 retrieval, preference-pair construction, DPO verification, and evaluation.",
    long_about = None
)]
pub struct Cli {
    /// Config file (TOML). Precedence: defaults < file < env < flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base URL of a running service. Without it, commands run against an
    /// embedded in-process server.
    #[arg(long, global = true)]
    pub server: Option<String>,

    /// Directory for output files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Root seed; every randomized phase derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker-pool size for item-parallel phases.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Abort on the first item failure instead of recording it.
    #[arg(long, global = true)]
    pub strict: bool,

    /// Generator backend: http or mock.
    #[arg(long, global = true, value_parser = ["http", "mock"])]
    pub backend: Option<String>,

    /// Script file for the mock backend.
    #[arg(long, global = true)]
    pub mock_script: Option<PathBuf>,

    /// Chat-completions endpoint prefix, e.g. http://localhost:8000/v1.
    #[arg(long, global = true)]
    pub api_base: Option<String>,

    #[arg(long, global = true)]
    #[serde(skip_serializing)]
    pub api_key: Option<String>,

    /// Model name sent to the HTTP backend.
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Retrieval depth.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,

    /// BM25 term-frequency saturation.
    #[arg(long, global = true)]
    pub k1: Option<f64>,

    /// BM25 length normalization, in [0, 1].
    #[arg(long, global = true)]
    pub b: Option<f64>,

    /// Scaling strategy for scaled asks: parallel or iterative.
    #[arg(long, global = true, value_parser = ["parallel", "iterative"])]
    pub scale_strategy: Option<String>,

    /// Thought budget for scaled strategies (1 to 8).
    #[arg(long, global = true)]
    pub scale_m: Option<usize>,

    /// Decoding temperature for scaling thought generations.
    #[arg(long, global = true)]
    pub scale_temperature: Option<f64>,

    /// Decoding top-p for scaling thought generations.
    #[arg(long, global = true)]
    pub scale_top_p: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

/// Names the index a command runs against: a corpus file to index on the
/// fly, or a previously persisted index file. Answering pipelines need
/// the corpus variant, since a bare index has no chunk texts.
#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct IndexArg {
    /// Corpus file (one JSON record per line: id, title, content).
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    /// Persisted index file produced by `index`.
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Run the HTTP service until interrupted.
    Serve {
        /// Bind address.
        #[arg(long, default_value = "127.0.0.1:7311")]
        addr: String,
    },

    /// Build an inverted index from a corpus and persist it.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        /// Output index file.
        #[arg(long)]
        out: PathBuf,
    },

    /// Query an index and print the top hits.
    Retrieve {
        #[command(flatten)]
        index: IndexArg,
        #[arg(long)]
        query: String,
        /// Override the retrieval depth for this query.
        #[arg(long)]
        k: Option<usize>,
    },

    /// Answer one question with a chosen strategy.
    Ask {
        #[command(flatten)]
        index: IndexArg,
        /// Free-form question text.
        #[arg(long, conflicts_with_all = ["item_file", "qid"])]
        question: Option<String>,
        /// Dataset file holding the item to ask.
        #[arg(long)]
        item_file: Option<PathBuf>,
        /// Item to pick from --item-file; defaults to the first.
        #[arg(long)]
        qid: Option<String>,
        /// question-rag, thought-rag, parallel[:m], or iterative[:m].
        #[arg(long, default_value = "thought-rag")]
        strategy: String,
    },

    /// Construct and export a preference-pair dataset.
    BuildPrefs {
        #[command(flatten)]
        index: IndexArg,
        /// Training dataset with gold labels.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        n_thoughts: Option<usize>,
        #[arg(long)]
        n_answers: Option<usize>,
        #[arg(long)]
        pairs_per_item: Option<usize>,
        /// Export file path; defaults to preference_pairs.jsonl in the
        /// output directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },

    /// Verify the DPO loss and gradients over a log-prob file.
    DpoCheck {
        /// Log-prob records, one JSON object per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        /// Divide each side's log-probs by its token count.
        #[arg(long)]
        length_normalize: bool,
    },

    /// Evaluate strategies over one or more datasets.
    Eval {
        #[command(flatten)]
        index: IndexArg,
        /// Dataset file(s); repeat the flag for several.
        #[arg(long, required = true)]
        dataset: Vec<PathBuf>,
        /// Report name override; defaults to each file stem.
        #[arg(long)]
        dataset_name: Option<String>,
        /// Single strategy to evaluate.
        #[arg(long, conflicts_with_all = ["compare", "sweep_k", "sweep_m"])]
        strategy: Option<String>,
        /// Comma-separated strategies to compare.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["sweep_k", "sweep_m"])]
        compare: Vec<String>,
        /// Comma-separated retrieval depths to sweep.
        #[arg(long, value_delimiter = ',', conflicts_with = "sweep_m")]
        sweep_k: Vec<usize>,
        /// Comma-separated scaling budgets to sweep.
        #[arg(long, value_delimiter = ',')]
        sweep_m: Vec<usize>,
        /// Strategy used by --sweep-k runs.
        #[arg(long, default_value = "thought-rag")]
        sweep_strategy: String,
    },
}
