use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use ats_harness::config::with_defaults;
use ats_harness::report::write_rows;
use ats_harness::runner::{Failure, RunSettings};
use ats_harness::{run_flu, run_mallard, run_radius, run_regret_curve, ExperimentConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ats", version, about = "Run replicated adaptive treatment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Epidemic control on a simulated contact network.
    Flu(Common),
    /// Harvest management of a waterfowl population.
    Mallard(Common),
    /// Regret of the learned policy against the number of epochs.
    RegretCurve(Common),
    /// Robustness radius of the optimal policy on a small exact model.
    Radius(Common),
    /// Run a configuration file carrying an `experiment` field.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the default configuration of an experiment as JSON.
    Defaults { experiment: Kind },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Flu,
    Mallard,
    RegretCurve,
    Radius,
}

#[derive(Args)]
struct Common {
    /// JSON file with the experiment settings; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Aggregate CSV path; per-replicate rows go next to it as
    /// `<stem>_replicates.csv`. Without it the aggregate goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, run: &mut RunSettings) {
        if let Some(s) = self.seed {
            run.master_seed = s;
        }
        if let Some(r) = self.reps {
            run.replications = r;
        }
        if let Some(t) = self.threads {
            run.threads = t;
        }
    }
}

fn load<T: DeserializeOwned + Default + Serialize>(path: Option<&Path>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            with_defaults(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn replicates_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}_replicates.csv"))
}

fn emit<A: Serialize, R: Serialize>(out: Option<&Path>, aggregate: &[A], replicates: &[R]) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            write_rows(aggregate, File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
            let rp = replicates_path(path);
            write_rows(replicates, File::create(&rp).with_context(|| format!("creating {}", rp.display()))?)?;
        }
        None => write_rows(aggregate, io::stdout().lock())?,
    }
    Ok(())
}

fn report_failures(failures: &[Failure]) -> ExitCode {
    for f in failures {
        eprintln!("replicate {} failed: {}", f.replicate, f.message);
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} replicate(s) failed", failures.len());
        ExitCode::from(2)
    }
}

#[derive(Serialize)]
struct RadiusSummary {
    replicate: usize,
    radius: f64,
}

fn execute(cfg: ExperimentConfig, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    cfg.validate()?;
    let failures = match cfg {
        ExperimentConfig::Flu(exp) => {
            let res = run_flu(&exp)?;
            emit(out, &res.aggregate(), &res.rows)?;
            res.failures
        }
        ExperimentConfig::Mallard(exp) => {
            let res = run_mallard(&exp)?;
            emit(out, &res.aggregate(), &res.rows)?;
            res.failures
        }
        ExperimentConfig::RegretCurve(exp) => {
            let curve = run_regret_curve(&exp)?;
            emit(out, &curve.points, &curve.rows)?;
            match curve.slope {
                Some(s) => eprintln!("log-log slope of mean regret: {s:.4}"),
                None => eprintln!("regret curve is degenerate: some mean regret is zero"),
            }
            curve.failures
        }
        ExperimentConfig::Radius(exp) => {
            let res = run_radius(&exp)?;
            let summary: Vec<_> = res
                .radii
                .iter()
                .map(|&(replicate, radius)| RadiusSummary { replicate, radius })
                .collect();
            emit(out, &summary, &res.rows)?;
            res.failures
        }
    };
    io::stdout().flush()?;
    Ok(report_failures(&failures))
}

fn with_overrides(mut cfg: ExperimentConfig, o: &Overrides) -> ExperimentConfig {
    match &mut cfg {
        ExperimentConfig::Flu(e) => o.apply(&mut e.run),
        ExperimentConfig::Mallard(e) => o.apply(&mut e.run),
        ExperimentConfig::RegretCurve(e) => o.apply(&mut e.run),
        ExperimentConfig::Radius(e) => o.apply(&mut e.run),
    }
    cfg
}

fn defaults(kind: Kind) -> ExperimentConfig {
    let name = match kind {
        Kind::Flu => "flu",
        Kind::Mallard => "mallard",
        Kind::RegretCurve => "regret-curve",
        Kind::Radius => "radius",
    };
    ExperimentConfig::defaults(name).expect("every kind has defaults")
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let (cfg, overrides) = match cli.command {
        Command::Defaults { experiment } => {
            println!("{}", defaults(experiment).to_json());
            return Ok(ExitCode::SUCCESS);
        }
        Command::Run { config, overrides } => (ExperimentConfig::from_path(&config)?, overrides),
        Command::Flu(c) => (ExperimentConfig::Flu(load(c.config.as_deref())?), c.overrides),
        Command::Mallard(c) => (ExperimentConfig::Mallard(load(c.config.as_deref())?), c.overrides),
        Command::RegretCurve(c) => (ExperimentConfig::RegretCurve(load(c.config.as_deref())?), c.overrides),
        Command::Radius(c) => (ExperimentConfig::Radius(load(c.config.as_deref())?), c.overrides),
    };
    let cfg = with_overrides(cfg, &overrides);
    execute(cfg, overrides.out.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
