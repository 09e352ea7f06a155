//! Command-line driver for the authentication experiments.
//!
//! Each subcommand is one stage of the workflow — synthesize a trace, graft
//! an attack, train a model, replay a trace for decisions, run the whole
//! experiment, or summarize a decision log. Commands are deterministic:
//! identical inputs produce byte-identical files and stdout. Errors go to
//! stderr tagged with the stage that failed, and the exit code is nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nfauth::anfis::AnfisModel;
use nfauth::error::StageExt as _;
use nfauth::events::{generate_trace, parse_trace, serialize_trace, EventTrace};
use nfauth::harness::config::ExperimentConfig;
use nfauth::harness::{graft_attack, run_experiment, train_model};
use nfauth::pipeline::{run_trace_full, Mode, Verdict, DECISION_LOG_HEADER};
use nfauth::{Error, Result};

#[derive(Parser)]
#[command(
    name = "nfauth",
    version,
    about = "Continuous implicit authentication experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an owner trace from the config's events section
    Gen(GenArgs),
    /// Graft one of the config's test attacks into a trace
    Graft(GraftArgs),
    /// Train a model on the pre-split portion of an owner trace
    Train(TrainArgs),
    /// Replay a trace against a trained model and log every decision
    Run(RunArgs),
    /// Run the full experiment: synthesize, train, evaluate, report
    Eval(EvalArgs),
    /// Summarize a decision log
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Experiment config (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's synthesis seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GraftArgs {
    /// Experiment config (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Victim trace to graft into
    #[arg(long)]
    trace: PathBuf,
    /// Index into the config's test attack roster
    #[arg(long, default_value_t = 0)]
    attack: usize,
    /// Override the chosen attack's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Owner trace to train from; synthesized from the config when omitted
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Override the config's synthesis seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace to replay
    #[arg(long)]
    trace: PathBuf,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the final ranking-list state to this file
    #[arg(long)]
    dump_state: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Experiment config (TOML); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's synthesis seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Decision log to summarize
    log: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => gen(args),
        Command::Graft(args) => graft(args),
        Command::Train(args) => train(args),
        Command::Run(args) => run(args),
        Command::Eval(args) => eval(args),
        Command::Report(args) => report(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let config = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).stage("config")?;
            ExperimentConfig::from_toml_str(&text).stage("config")?
        }
        None => ExperimentConfig::default(),
    };
    config.validate().stage("config")?;
    Ok(config)
}

fn load_trace(path: &Path) -> Result<EventTrace> {
    let text = std::fs::read_to_string(path).stage("trace")?;
    parse_trace(&text).stage("trace")
}

fn load_model(path: &Path) -> Result<AnfisModel> {
    let text = std::fs::read_to_string(path).stage("model")?;
    AnfisModel::from_text(&text).stage("model")
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).stage("io")?;
    let path = dir.join(name);
    std::fs::write(&path, contents).stage("io")?;
    Ok(path)
}

fn gen(args: GenArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.events.seed = seed;
    }
    let trace = generate_trace(&config.events);
    let path = write_out(&args.out, "owner.trace", &serialize_trace(&trace))?;
    println!("wrote {} ({} events)", path.display(), trace.events.len());
    Ok(())
}

fn graft(args: GraftArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let victim = load_trace(&args.trace)?;
    let entry = config
        .harness
        .test_attacks
        .get(args.attack)
        .ok_or_else(|| {
            Error::in_stage(
                "graft",
                Error::Config(format!(
                    "attack index {} out of range: config lists {} test attacks",
                    args.attack,
                    config.harness.test_attacks.len()
                )),
            )
        })?;
    let mut spec = entry.to_spec();
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let grafted = graft_attack(&victim, &spec, config.ranklist).stage("graft")?;
    let path = write_out(&args.out, "grafted.trace", &serialize_trace(&grafted))?;
    println!(
        "wrote {} ({} events, {} attack from {} to {})",
        path.display(),
        grafted.events.len(),
        spec.mode.label(),
        spec.start,
        spec.end()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.events.seed = seed;
    }
    let owner = match &args.trace {
        Some(path) => load_trace(path)?,
        None => generate_trace(&config.events),
    };
    let (model, train_report) = train_model(&config, &owner)?;
    let model_path = write_out(&args.out, "model.txt", &model.to_text())?;
    let mut report_text = format!(
        "epochs_run={}\nfinal_rmse={}\nconverged={}\n",
        train_report.epochs_run, train_report.final_rmse, train_report.converged,
    );
    for (epoch, rmse) in train_report.epoch_rmse.iter().enumerate() {
        report_text.push_str(&format!("epoch {epoch} rmse={rmse}\n"));
    }
    write_out(&args.out, "train_report.txt", &report_text)?;
    println!(
        "wrote {} (final rmse {} after {} epochs)",
        model_path.display(),
        train_report.final_rmse,
        train_report.epochs_run
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let trace = load_trace(&args.trace)?;
    let model = load_model(&args.model)?;
    let pipeline_cfg = config.to_pipeline(Mode::Deployment);
    let (windows, decisions, state) =
        run_trace_full(&pipeline_cfg, &trace, Some(&model)).stage("run")?;

    let mut log = String::from(DECISION_LOG_HEADER);
    log.push('\n');
    for window in &windows {
        if let Some(line) = window.decision_log_line() {
            log.push_str(&line);
            log.push('\n');
        }
    }
    let log_path = write_out(&args.out, "decisions.log", &log)?;
    if let Some(state_path) = &args.dump_state {
        std::fs::write(state_path, state.lists.snapshot()).stage("io")?;
    }

    let count = |v: Verdict| decisions.iter().filter(|d| d.verdict == v).count();
    println!(
        "wrote {} ({} windows, {} decided)",
        log_path.display(),
        windows.len(),
        decisions.len()
    );
    println!(
        "legitimate={} suspicious={} adversary={}",
        count(Verdict::Legitimate),
        count(Verdict::Suspicious),
        count(Verdict::Adversary)
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.events.seed = seed;
    }
    let artifacts = run_experiment(&config, &args.out)?;
    print!("{}", artifacts.report.render());
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.log).stage("report")?;
    let mut counts = [0usize; 3];
    for (number, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let verdict = line.rsplit(',').next().unwrap_or_default();
        let slot = match verdict {
            "legitimate" => 0,
            "suspicious" => 1,
            "adversary" => 2,
            other => {
                return Err(Error::in_stage(
                    "report",
                    Error::Parse {
                        line: number + 1,
                        msg: format!("unknown verdict {other:?}"),
                    },
                ))
            }
        };
        counts[slot] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::in_stage(
            "report",
            Error::Evaluation("decision log holds no decisions".into()),
        ));
    }
    println!("windows={total}");
    println!("legitimate={}", counts[0]);
    println!("suspicious={}", counts[1]);
    println!("adversary={}", counts[2]);
    println!("recognition_rate={}", counts[0] as f64 / total as f64);
    Ok(())
}
