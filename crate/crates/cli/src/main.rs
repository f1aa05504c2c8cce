//! `plothole`: one entry point for every pipeline stage, the annotation
//! service and the self-checks.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, config or inputs),
//! 2 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use log::info;
use plothole::inject::Problem;
use plothole::pipeline::{HumanSource, Pipeline, PipelineConfig, PipelineError, Stage, StageOutcome};
use plothole::selfcheck;
use plothole_annotate::{human_baselines, human_report, AnnotateError, AnswerStore, ServeConfig, Study};

#[derive(Parser, Debug)]
#[command(name = "plothole", version, about = "Plot-hole detection datasets, models and human baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed (overrides `seed`).
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Worker threads for per-story stages and per-seed training.
    #[arg(long, global = true, value_name = "INT", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// Rerun stages even when their outputs are current.
    #[arg(long, global = true)]
    force: bool,
    /// Restrict per-problem stages to one problem.
    #[arg(long, global = true, value_enum)]
    problem: Option<ProblemArg>,
    /// Train only the knowledge-graph variant (true) or only the plain one (false).
    #[arg(long, global = true, value_name = "BOOL", action = ArgAction::Set)]
    use_kg: Option<bool>,
    /// Number of training seeds (overrides `train.n_seeds`).
    #[arg(long, global = true, value_name = "INT")]
    seeds: Option<usize>,
    /// Root directory for relative output paths.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Dotted config override, e.g. `--set train.epochs=10`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    Continuity,
    Unresolved,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Continuity => Problem::Continuity,
            ProblemArg::Unresolved => Problem::Unresolved,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read and filter the story corpus.
    Ingest,
    /// Build continuity and unresolved datasets.
    Inject,
    /// Materialize the sentence embedding table.
    Encode,
    /// Extract or import story knowledge graphs.
    Kg,
    /// Train every configured variant and seed.
    Train,
    /// Score checkpoints on the test split.
    Eval,
    /// Compute guessing and human reference rows.
    Baseline,
    /// Render the results tables.
    Report,
    /// Every stage in order.
    Run,
    /// Start the annotation service.
    Serve,
    /// Gradient, masking, injection and metric self-checks.
    Selfcheck,
    /// Print the resolved config as JSON.
    Config,
}

#[derive(Debug)]
enum Failure {
    Pipeline(PipelineError),
    Annotate(AnnotateError),
    Internal(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Pipeline(e) => e.exit_code() as u8,
            Failure::Annotate(AnnotateError::Dataset(_) | AnnotateError::Io(_)) => 1,
            Failure::Annotate(_) | Failure::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Pipeline(e) => e.fmt(f),
            Failure::Annotate(e) => e.fmt(f),
            Failure::Internal(e) => f.write_str(e),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl From<AnnotateError> for Failure {
    fn from(e: AnnotateError) -> Self {
        Failure::Annotate(e)
    }
}

fn rebase(p: &Path, root: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { root.join(p) }
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let base = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut c = base.with_overrides(&cli.overrides)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(n) = cli.seeds {
        c.train.n_seeds = n;
        c.train.seeds.clear();
    }
    if let Some(kg) = cli.use_kg {
        c.train.plain = !kg;
        c.train.with_kg = kg;
    }
    if let Some(root) = &cli.out {
        c.paths = c.paths.rebased(root);
        c.service.answers = rebase(&c.service.answers, root);
    }
    Ok(c)
}

fn pipeline(cli: &Cli, config: PipelineConfig) -> Result<Pipeline, PipelineError> {
    let mut p = Pipeline::new(config)?;
    p.force = cli.force;
    if let Some(problem) = cli.problem {
        p.problems = vec![problem.into()];
    }
    Ok(p)
}

/// Human rows from the answer log, when the config asks for them.
fn load_annotation(p: &mut Pipeline) -> Result<(), AnnotateError> {
    if p.config.human.source != HumanSource::Annotation {
        return Ok(());
    }
    let c = &p.config;
    let study = Study::from_datasets(&c.paths.datasets, c.service.n_tasks, c.seed)?;
    let store = AnswerStore::open(&c.service.answers)?;
    let report = human_report(&study, store.answers());
    info!("annotation: {} answers from {} annotators", report.n_answers, report.n_annotators);
    p.annotation_human = human_baselines(&report);
    Ok(())
}

fn run_stage(p: &mut Pipeline, stage: Stage) -> Result<(), Failure> {
    if stage == Stage::Baseline || stage == Stage::Report {
        load_annotation(p)?;
    }
    let outcome = p.run(stage)?;
    let status = match outcome {
        StageOutcome::Ran => "done",
        StageOutcome::UpToDate => "up to date (use --force to rerun)",
    };
    println!("{}: {status}", stage.name());
    if stage == Stage::Report {
        for &problem in &p.problems {
            let path = p.layout().report_text(problem);
            let text = std::fs::read_to_string(&path).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| Failure::Internal(format!("worker pool: {e}")))?;
    }
    let stage = match cli.command {
        Command::Ingest => Some(Stage::Ingest),
        Command::Inject => Some(Stage::Inject),
        Command::Encode => Some(Stage::Encode),
        Command::Kg => Some(Stage::Kg),
        Command::Train => Some(Stage::Train),
        Command::Eval => Some(Stage::Eval),
        Command::Baseline => Some(Stage::Baseline),
        Command::Report => Some(Stage::Report),
        Command::Run | Command::Serve | Command::Selfcheck | Command::Config => None,
    };
    match (&cli.command, stage) {
        (_, Some(stage)) => {
            let mut p = pipeline(cli, resolve_config(cli)?)?;
            run_stage(&mut p, stage)
        }
        (Command::Run, _) => {
            let mut p = pipeline(cli, resolve_config(cli)?)?;
            Stage::ALL.into_iter().try_for_each(|s| run_stage(&mut p, s))
        }
        (Command::Config, _) => {
            let c = resolve_config(cli)?;
            c.validate()?;
            println!("{}", serde_json::to_string_pretty(&c).expect("config serializes"));
            Ok(())
        }
        (Command::Serve, _) => {
            let c = resolve_config(cli)?;
            c.validate()?;
            let s = &c.service;
            plothole_annotate::serve_blocking(ServeConfig {
                host: s.host.clone(),
                port: s.port,
                datasets: c.paths.datasets.clone(),
                answers: s.answers.clone(),
                n_tasks: s.n_tasks,
                seed: c.seed,
                static_dir: s.static_dir.clone(),
            })?;
            Ok(())
        }
        (Command::Selfcheck, _) => {
            let checks = selfcheck::run_all();
            for c in &checks {
                println!("{}", c.line());
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            if failed == 0 { Ok(()) } else { Err(Failure::Internal(format!("{failed} self-checks failed"))) }
        }
        _ => unreachable!("every command is handled"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLOTHOLE_LOG", "info")).format_timestamp(None).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
