use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dentist_core::metrics::{
    accuracy_by_category, chair_scores, pope_scores, pope_scores_by_setting, ChairOptions, ObjectLexicon,
};
use dentist_core::LoopConfig;
use dentist_harness::corpus::{load_annotations, load_captions, load_pope_predictions, load_pope_samples};
use dentist_harness::report::read_report;
use dentist_harness::run::{load_transcripts, CLASSES_FILE, TRANSCRIPTS_FILE};
use dentist_harness::{
    render_report, run_classification, run_correction, run_repeated_baseline, write_report, CorrectnessOracle, Report,
    ReportFormat, RunConfig, RunMode,
};
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(
    name = "dentist",
    version,
    about = "Classify, verify and correct vision-language model answers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the correction loop over a corpus
    Verify(RunArgs),
    /// Classify each query as perception or reasoning
    Classify(RunArgs),
    /// Direct-rejection or repeated-correction baseline
    Baseline(BaselineArgs),
    /// CHAIR scores for captions
    EvalChair(ChairArgs),
    /// POPE scores for yes/no predictions
    EvalPope(PopeArgs),
    /// Per-category accuracy of transcript final answers
    EvalAccuracy(AccuracyArgs),
    /// Render a saved JSON report
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Query corpus (JSON lines)
    #[arg(long)]
    corpus: PathBuf,
    /// Backend description (TOML)
    #[arg(long)]
    backend_config: PathBuf,
    /// Prompt template overrides (TOML)
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_iters: u32,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Sampling seed forwarded to hosted backends
    #[arg(long)]
    seed: Option<u64>,
    /// Return the post-check answer on convergence instead of the pre-check one
    #[arg(long)]
    return_post_check: bool,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        let mut config = RunConfig::new(&self.corpus, &self.backend_config, &self.out);
        config.templates = self.templates.clone();
        config.loop_config = LoopConfig {
            max_iterations: self.max_iters,
            return_post_check: self.return_post_check,
            ..LoopConfig::default()
        };
        config.concurrency = self.concurrency;
        config.seed = self.seed;
        config
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineMode {
    #[value(alias = "direct-rejection")]
    Dr,
    #[value(alias = "repeated-correction")]
    Rc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleArg {
    YesNo,
    Exact,
    Contains,
}

impl From<OracleArg> for CorrectnessOracle {
    fn from(o: OracleArg) -> Self {
        match o {
            OracleArg::YesNo => CorrectnessOracle::YesNo,
            OracleArg::Exact => CorrectnessOracle::Exact,
            OracleArg::Contains => CorrectnessOracle::Contains,
        }
    }
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    mode: BaselineMode,
    #[arg(long, default_value_t = 10)]
    repeats: u32,
    /// How a response is judged against ground_truth
    #[arg(long, value_enum, default_value = "yes-no")]
    oracle: OracleArg,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Table,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn emit(&self, report: &Report) -> Result<()> {
        match &self.out {
            Some(path) => write_report(report, self.format.into(), path)?,
            None => print!("{}", render_report(report, self.format.into())),
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct ChairArgs {
    /// `{"image_id","caption"}` lines or a transcript file
    #[arg(long)]
    captions: PathBuf,
    /// `{"image_id","ground_truth_objects":[..]}` lines
    #[arg(long)]
    annotations: PathBuf,
    /// Object lexicon TSV; defaults to the built-in COCO lexicon
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Score whole captions instead of sentences
    #[arg(long)]
    caption_level: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct PopeArgs {
    #[arg(long)]
    samples: PathBuf,
    /// `{"question_id","answer"}` lines or a transcript file
    #[arg(long)]
    predictions: PathBuf,
    /// One row per sampling setting
    #[arg(long)]
    by_setting: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct AccuracyArgs {
    #[arg(long)]
    transcripts: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    oracle: OracleArg,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Verify(args) => {
            let manifest = run_correction(&args.config()).await?;
            let c = manifest.counts;
            println!(
                "processed {} (converged {}, exhausted {}, errored {}) -> {}",
                c.processed,
                c.converged,
                c.exhausted,
                c.errored,
                args.out.join(TRANSCRIPTS_FILE).display()
            );
        }
        Command::Classify(args) => {
            let lines = run_classification(&args.config()).await?;
            let failed = lines.iter().filter(|l| l.class.is_none()).count();
            println!(
                "classified {} ({failed} failed) -> {}",
                lines.len() - failed,
                args.out.join(CLASSES_FILE).display()
            );
        }
        Command::Baseline(args) => {
            let mut config = args.run.config();
            config.mode = match args.mode {
                BaselineMode::Dr => RunMode::DirectRejection,
                BaselineMode::Rc => RunMode::RepeatedCorrection,
            };
            config.repeats = args.repeats;
            let report = run_repeated_baseline(&config, args.oracle.into()).await?;
            print!("{}", render_report(&Report::Baseline(report), args.format.into()));
        }
        Command::EvalChair(args) => {
            let lexicon = match &args.lexicon {
                Some(path) => ObjectLexicon::load(path)?,
                None => ObjectLexicon::coco(),
            };
            let captions = load_captions(&args.captions)?;
            let annotations = load_annotations(&args.annotations)?;
            let options = ChairOptions {
                caption_level: args.caption_level,
            };
            let report = chair_scores(&captions, &annotations, &lexicon, options)?;
            args.output.emit(&Report::Chair(report))?;
        }
        Command::EvalPope(args) => {
            let samples = load_pope_samples(&args.samples)?;
            let predictions = load_pope_predictions(&args.predictions)?;
            let report = if args.by_setting {
                Report::PopeBySetting(pope_scores_by_setting(&predictions, &samples)?)
            } else {
                Report::Pope(pope_scores(&predictions, &samples)?)
            };
            args.output.emit(&report)?;
        }
        Command::EvalAccuracy(args) => {
            let oracle = CorrectnessOracle::from(args.oracle);
            let lines = load_transcripts(&args.transcripts)?;
            let mut scored = Vec::with_capacity(lines.len());
            for line in &lines {
                let Some(truth) = &line.ground_truth else {
                    bail!("transcript {} has no ground_truth", line.transcript.query_id);
                };
                let category = line.category.clone().unwrap_or_else(|| "uncategorized".into());
                scored.push((category, oracle.is_correct(&line.transcript.final_answer.text, truth)));
            }
            args.output.emit(&Report::Category(accuracy_by_category(scored)))?;
        }
        Command::Report(args) => {
            let report = read_report(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
            print!("{}", render_report(&report, args.format.into()));
        }
    }
    Ok(())
}
