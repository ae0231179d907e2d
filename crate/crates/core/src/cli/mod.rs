//! Command-line entry points: train, eval, predict, gradcheck, synth.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

pub mod config;
pub mod evaluate;
pub mod gradcheck;
pub mod synth;
pub mod train;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::models::{ModelKind, PotentialDesign};

pub use config::{NcrftObjective, OptimizerName, RunConfig, Task};
pub use evaluate::{aggregate, predict_text, read_corpus, run_eval, run_predict, score_corpus, EvalOptions, EvalSummary, RunDir};
pub use gradcheck::{check_case, standard_cases, GradCheckCase, LossKind};
pub use synth::{parity_tags, run_synthetic, SynthSpec, SynthTask};
pub use train::{run_train, EpochLog, TrainOutcome};

#[derive(Debug, Parser)]
#[command(name = "ncrft", version, about = "Neural CRF transducers for sequence labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes config.txt, vocab.txt, metrics.tsv and model.ckpt.
    Train(TrainArgs),
    /// Score one or more run directories on a labeled file.
    Eval(EvalArgs),
    /// Append a predicted tag column to a column file.
    Predict(PredictArgs),
    /// Finite-difference gradient checks on tiny random models.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic train/dev pair.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    design: Option<PotentialDesign>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long = "out")]
    out_dir: Option<PathBuf>,
    /// Run directory of a trained rnnt model (ncrft only).
    #[arg(long)]
    pretrained: Option<PathBuf>,
    #[arg(long)]
    cold_start: bool,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    execution: Option<String>,
    /// Print nothing per epoch.
    #[arg(long)]
    quiet: bool,
}

impl TrainArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let path = |p: &PathBuf| p.display().to_string();
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let named = [
            ("model", self.model.map(|m| m.to_string())),
            ("design", self.design.map(|d| d.to_string())),
            ("train", self.train.as_ref().map(path)),
            ("dev", self.dev.as_ref().map(path)),
            ("test", self.test.as_ref().map(path)),
            ("embeddings", self.embeddings.as_ref().map(path)),
            ("out_dir", self.out_dir.as_ref().map(path)),
            ("pretrained", self.pretrained.as_ref().map(path)),
            ("cold_start", self.cold_start.then(|| "true".to_string())),
            ("task", self.task.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("max_epochs", self.epochs.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("execution", self.execution.clone()),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {:?}", kv)))?;
            c.set(k.trim(), v)?;
        }
        for (k, v) in pairs {
            c.set(k, &v)?;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Run directories (or their model.ckpt); several give mean ± std.
    #[arg(long = "run", required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    constrained: Option<bool>,
    /// Emit only `metric<TAB>value` lines.
    #[arg(long)]
    machine: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    beam: Option<usize>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Coordinates sampled per case.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// second-order-parity, first-order-chain or first-order-chain:<stay>.
    #[arg(long, default_value = "second-order-parity")]
    task: String,
    #[arg(long, default_value_t = 10)]
    length: usize,
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, default_value_t = 500)]
    dev: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long = "out")]
    out_dir: PathBuf,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) => 3,
        Error::Parse { .. } | Error::Data(_) | Error::Io { .. } | Error::Empty(_) | Error::Checkpoint(_) => 2,
        Error::Config(_) | Error::InvalidArgument(_) | Error::Shape(_) => 1,
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let config = args.config()?;
    let quiet = args.quiet;
    let metric = if config.dev.is_some() { config.task.to_string() } else { "train loss".to_string() };
    let outcome = run_train(&config, &mut |e: &EpochLog| {
        if !quiet {
            eprintln!(
                "epoch {:>3}  lr {:.5}  loss {:.4}  {} {:.4}  early {}  {:.1}s",
                e.epoch, e.lr, e.train_loss, metric, e.metric, e.early_updates, e.seconds
            );
        }
    })?;
    println!("best epoch {}  {} {:.6}", outcome.best_epoch, metric, outcome.best_metric);
    if let Some(t) = &outcome.test {
        print!("{}", t);
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let opts = EvalOptions {
        beam: args.beam,
        constrained: args.constrained,
        task: args.task.as_deref().map(str::parse).transpose()?,
    };
    let summary = run_eval(&args.runs, &args.data, &opts)?;
    for r in summary.runs.iter().chain(summary.aggregate.iter()) {
        if args.machine {
            print!("{}", r.machine_lines());
        } else {
            print!("{}", r);
        }
    }
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let mut failed = 0;
    for case in standard_cases(0..args.seeds) {
        let r = check_case(&case, args.epsilon, args.samples)?;
        let ok = r.max_relative_error < args.tolerance;
        failed += !ok as usize;
        println!(
            "{}  {} seed {}  max rel err {:.3e} over {} coords",
            if ok { "ok  " } else { "FAIL" },
            case.loss.label(),
            case.seed,
            r.max_relative_error,
            r.checked
        );
    }
    if failed > 0 {
        return Err(Error::NonFinite(format!("{} gradient checks above tolerance", failed)));
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        task: args.task.parse()?,
        length: args.length,
        train: args.train,
        dev: args.dev,
        seed: args.seed,
    };
    let (t, d) = run_synthetic(&spec, &args.out_dir)?;
    println!("{}\n{}", t.display(), d.display());
    Ok(())
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => run_predict(&a.run, &a.input, a.output.as_deref(), a.beam).map(|text| {
            if a.output.is_none() {
                print!("{}", text);
            }
        }),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code(&e)
        }
    }
}
