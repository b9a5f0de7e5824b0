use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mimo_noma_cli::config::{ExperimentConfig, Method};
use mimo_noma_cli::presets::{preset, PRESETS};
use mimo_noma_cli::validate::{self, ValidateOptions};
use mimo_noma_cli::{experiment, output};

#[derive(Parser)]
#[command(name = "mimo-noma", version, about = "Outage and goodput of MIMO-NOMA small-cell networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Monte Carlo seed, replacing `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per point, replacing `run.trials`.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Omit the timestamp line so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic methods of the experiment (exact, approx, asymptotic).
    Analyze { experiment: String },
    /// Monte Carlo estimates of the experiment.
    Simulate { experiment: String },
    /// Goodput optimization and baselines of the experiment.
    Optimize { experiment: String },
    /// Every method listed in the experiment.
    Sweep { experiment: String },
    /// Kernel oracle and Monte Carlo consistency checks.
    Validate {
        /// Damping parameter of the 1D kernel.
        #[arg(long)]
        a: Option<f64>,
    },
}

/// Reads a preset by name, or else a TOML file.
fn load(experiment: &str, global: &Global) -> Result<ExperimentConfig> {
    let text = match preset(experiment) {
        Some(text) => text.to_string(),
        None => std::fs::read_to_string(experiment).with_context(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            format!("{experiment} is neither a readable file nor a preset ({})", names.join(", "))
        })?,
    };
    let mut cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("in {experiment}"))?;
    if let Some(seed) = global.seed {
        cfg.run.seed = seed;
    }
    if let Some(trials) = global.trials {
        cfg.run.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Methods of `cfg` accepted by `keep`, or `fallback` when it lists none.
fn select(cfg: &ExperimentConfig, keep: impl Fn(Method) -> bool, fallback: &[Method]) -> Vec<Method> {
    let chosen: Vec<Method> = cfg.run.methods.iter().copied().filter(|&m| keep(m)).collect();
    if chosen.is_empty() {
        fallback.to_vec()
    } else {
        chosen
    }
}

fn run_experiment(cfg: &ExperimentConfig, methods: &[Method], global: &Global) -> Result<bool> {
    let tables = experiment::run(cfg, methods);
    let mut clean = true;
    for t in &tables {
        for (value, msg) in &t.failures {
            clean = false;
            eprintln!("{} {} at {value}: {msg}", t.method.name(), t.mode.name());
        }
    }
    for path in output::write_all(&global.out, &cfg.name, &tables, global.deterministic)? {
        println!("{}", path.display());
    }
    Ok(clean)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Validate { a } => {
            let defaults = ValidateOptions::default();
            let opts = ValidateOptions {
                a: *a,
                seed: g.seed.unwrap_or(defaults.seed),
                trials: g.trials.unwrap_or(defaults.trials),
            };
            validate::run(&opts).map(|checks| {
                print!("{}", validate::report(&checks, &opts));
                checks.iter().all(validate::Check::passed)
            })
        }
        Command::Analyze { experiment } => load(experiment, g).and_then(|cfg| {
            let methods = select(&cfg, |m| m.is_analytic(), &[Method::Exact, Method::Approx]);
            run_experiment(&cfg, &methods, g)
        }),
        Command::Simulate { experiment } => load(experiment, g).and_then(|cfg| {
            let methods = select(&cfg, |m| m == Method::Mc, &[Method::Mc]);
            run_experiment(&cfg, &methods, g)
        }),
        Command::Optimize { experiment } => load(experiment, g).and_then(|cfg| {
            let methods = select(&cfg, |m| m.is_optimization(), &[Method::Optimize]);
            run_experiment(&cfg, &methods, g)
        }),
        Command::Sweep { experiment } => load(experiment, g).and_then(|cfg| {
            let methods = cfg.run.methods.clone();
            run_experiment(&cfg, &methods, g)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        // Per-point failures were reported and the CSVs written.
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
