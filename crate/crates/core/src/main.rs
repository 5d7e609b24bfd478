use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fishschool::harness::{self, ErrorRecord, ExperimentConfig, ExperimentKind, RunOptions, RunOutput};
use fishschool::Error;

#[derive(Parser)]
#[command(name = "fishschool", version, about = "Fish school simulations around obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Use the full-resolution sweep grid.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Also write the trajectory as CSV.
    #[arg(long)]
    csv: bool,
    /// Directory for cached relaxed schools.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Exponent,
    Speed,
    Rcrit,
}

#[derive(Subcommand)]
enum Command {
    /// Single noisy run from random positions.
    Simulate(Common),
    /// Relax a school to rest and cache it.
    Bootstrap(Common),
    /// Run one encounter, or label an existing trajectory file.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Label sweep over one parameter.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
    /// Critical noise magnitude.
    Cohesion(Common),
}

fn expected_kind(cmd: &Command) -> Vec<ExperimentKind> {
    match cmd {
        Command::Simulate(_) => vec![ExperimentKind::Simulate],
        Command::Bootstrap(_) => vec![ExperimentKind::Bootstrap],
        Command::Classify { .. } => vec![ExperimentKind::PatternRun],
        Command::Sweep { kind, .. } => vec![match kind {
            SweepKind::Exponent => ExperimentKind::SweepExponent,
            SweepKind::Speed => ExperimentKind::SweepSpeed,
            SweepKind::Rcrit => ExperimentKind::SweepCriticalDistance,
        }],
        Command::Cohesion(_) => vec![ExperimentKind::Cohesion],
    }
}

fn execute(cli: &Cli) -> Result<String, Error> {
    let common = match &cli.command {
        Command::Simulate(c) | Command::Bootstrap(c) | Command::Cohesion(c) => c,
        Command::Classify { common, .. } | Command::Sweep { common, .. } => common,
    };
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::config("workers", e.to_string()))?;
    }
    let cfg = ExperimentConfig::load(&common.config)?;
    if let Command::Classify {
        trajectory: Some(path),
        ..
    } = &cli.command
    {
        let label = harness::classify_trajectory(&cfg, path)?;
        return Ok(format!("label: {label}"));
    }
    let allowed = expected_kind(&cli.command);
    if !allowed.contains(&cfg.kind) {
        return Err(Error::config(
            "kind",
            format!("{:?} does not match this subcommand", cfg.kind),
        ));
    }
    let opts = RunOptions {
        out_dir: common.out.clone(),
        full: common.full,
        seed: common.seed,
        dt: common.dt,
        csv: common.csv,
        cache_dir: common.cache_dir.clone(),
    };
    let summary = match harness::run(&cfg, &opts)? {
        RunOutput::Simulation(r) => format!("verdict: {:?}, schooling: {}", r.verdict, r.schooling),
        RunOutput::Pattern(r) => format!("label: {}", r.label),
        RunOutput::Sweep(a) => format!(
            "{} points, {} failed, boundaries: {:?}",
            a.report.points.len(),
            a.report.failed_points(),
            a.report.transition_boundaries
        ),
        RunOutput::Cohesion(a) => format!("sigma_bar: {}", a.report.sigma_bar),
        RunOutput::Bootstrap(r) => format!("diameter: {}", r.diameter),
    };
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let record = ErrorRecord::of(&err);
            eprintln!(
                "{}",
                serde_json::to_string(&record).expect("error record serializes")
            );
            ExitCode::from(record.exit_code as u8)
        }
    }
}
