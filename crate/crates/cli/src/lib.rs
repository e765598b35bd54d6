//! The `lexattr` command line: corpus conversion and statistics, CRF
//! training, tagging and evaluation, and judgment experiments.
//!
//! Every command takes `--out` and writes `<out>.manifest.json` beside it.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
pub mod inputs;
pub mod manifest;

pub use inputs::EmbeddingSpec;
pub use manifest::{manifest_path, FileRecord, RunManifest};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Internal failure.
pub const EXIT_INTERNAL: i32 = 1;
/// Invalid input: bad flags, unreadable or malformed files.
pub const EXIT_BAD_INPUT: i32 = 2;
/// Training diverged.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lexattr", version, about = "Legal attribute extraction with a linear-chain CRF")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Project annotation JSONL onto token TSV.
    Convert(ConvertArgs),
    /// Per-tag sentence and token counts.
    Stats(StatsArgs),
    /// Train a CRF tagger.
    Train(TrainArgs),
    /// Tag sentences with a trained model.
    Tag(TagArgs),
    /// Per-tag token accuracy of a tagged TSV.
    Eval(EvalArgs),
    /// Judgment prediction experiment from a JSON config.
    Judge(JudgeArgs),
    /// Generate the synthetic attribute and judgment corpora.
    Synth(SynthArgs),
    /// Replay the command recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Io,
    Bio,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "io")]
    pub scheme: Scheme,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatsFormat {
    /// Tags as columns, two rows per split.
    Table,
    /// One block of `tag, sentences, tokens` rows per split.
    Tsv,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// `NAME=PATH`, repeatable; a bare path is named `all`.
    #[arg(long = "split", required = true)]
    pub splits: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: StatsFormat,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sparse,
    Dense,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Annotation JSONL or token TSV.
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out sentences for model selection.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sparse")]
    pub mode: Mode,
    /// `FILE`, `hashed:DIM[:SEED]` or `FILE,hashed:DIM[:SEED]`; dense mode only.
    #[arg(long)]
    pub embeddings: Option<EmbeddingSpec>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long, default_value_t = 10.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop after this many epochs without dev improvement.
    #[arg(long, requires = "dev")]
    pub patience: Option<usize>,
    /// Also train on sentences without any attribute.
    #[arg(long)]
    pub include_untagged: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Annotation JSONL or token TSV; its tags become the gold column.
    #[arg(long)]
    pub input: PathBuf,
    /// Required for dense models.
    #[arg(long)]
    pub embeddings: Option<EmbeddingSpec>,
    /// Tagged TSV; spans go to `<out>.spans.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Tagged TSV from `tag`.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// Row label in the printed table.
    #[arg(long, default_value = "CRF")]
    pub method: String,
}

#[derive(Args, Debug)]
pub struct JudgeArgs {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Results JSON; the table goes to stdout and `<out>.tsv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub train_sentences: usize,
    #[arg(long, default_value_t = 200)]
    pub test_sentences: usize,
    #[arg(long, default_value_t = 300)]
    pub judgment_train: usize,
    #[arg(long, default_value_t = 100)]
    pub judgment_test: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fail unless every output matches its recorded checksum.
    #[arg(long)]
    pub check: bool,
}

/// Maps an error to the process exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<lexattr::Error>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_BAD_INPUT };
        }
    }
    EXIT_INTERNAL
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match std::panic::catch_unwind(|| commands::run(cli.command, &argv)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
        Err(_) => EXIT_INTERNAL,
    }
}

pub(crate) fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}
