//! `maskvec` command-line front end.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maskvec::ErrorClass;

/// Bad arguments or configuration detected by the front end itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const THREADS_ENV: &str = "MASKVEC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "maskvec", version, about = "Sentence embeddings from masked-language-model prompts")]
struct Cli {
    /// Omit the timestamp comment line from TSV reports.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a vocabulary from a line-per-sentence corpus.
    Vocab(commands::VocabArgs),
    /// MLM-pretrain a toy encoder.
    Pretrain(ConfigArgs),
    /// Average pairwise cosine of sentence embeddings.
    AnalyzeAnisotropy(commands::AnisotropyArgs),
    /// Spearman of static-average embeddings under bias-filter ladders.
    AnalyzeBias(commands::BiasArgs),
    /// 2-D PCA coordinates of an embedding table with token flags.
    PcaExport(commands::PcaArgs),
    /// Prompt-based sentence embeddings.
    Encode(commands::EncodeArgs),
    /// Greedy relationship-then-prefix template search scored on a dev set.
    TemplateSearch(commands::SearchArgs),
    /// Prompt-based contrastive training.
    Train(ConfigArgs),
    /// Learn continuous template rows with the encoder frozen.
    TrainTemplate(ConfigArgs),
    /// Spearman on every STS file of a directory.
    Eval(commands::EvalArgs),
    /// Multi-seed experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Write the bundled synthetic corpus, STS sets and biased embeddings.
    Synth(commands::SynthArgs),
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Compare the three contrastive objectives across seeds.
    Objectives(commands::ObjectivesArgs),
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `[paths] output_dir`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn check_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        match value.trim().parse::<usize>() {
            Ok(n) if n > 0 => {}
            _ => return Err(UsageError(format!("{THREADS_ENV} must be a positive integer, got {value:?}")).into()),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    check_threads()?;
    let out = output::Stamp::new(!cli.no_timestamp);
    match cli.command {
        Command::Vocab(a) => commands::vocab(&a),
        Command::Pretrain(a) => commands::pretrain(&a, &out),
        Command::AnalyzeAnisotropy(a) => commands::analyze_anisotropy(&a, &out),
        Command::AnalyzeBias(a) => commands::analyze_bias(&a, &out),
        Command::PcaExport(a) => commands::pca_export(&a, &out),
        Command::Encode(a) => commands::encode(&a, &out),
        Command::TemplateSearch(a) => commands::template_search(&a, &out),
        Command::Train(a) => commands::train(&a, &out),
        Command::TrainTemplate(a) => commands::train_template(&a),
        Command::Eval(a) => commands::eval(&a, &out),
        Command::Experiment(ExperimentCommand::Objectives(a)) => commands::objectives(&a, &out),
        Command::Synth(a) => commands::synth(&a),
    }
}

/// Exit code and class label: 2 usage, 3 data, 4 numerical.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<maskvec::Error>() {
            return match e.class() {
                ErrorClass::Usage => (2, "usage"),
                ErrorClass::Data => (3, "data"),
                ErrorClass::Numerical => (4, "numerical"),
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return (2, "usage");
        }
    }
    (3, "data")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, class) = classify(&err);
            let reason = err.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ").replace('\n', " ");
            eprintln!("error[{class}]: {reason}");
            ExitCode::from(code)
        }
    }
}
