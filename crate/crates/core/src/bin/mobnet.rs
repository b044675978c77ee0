use clap::{Args, Parser, Subcommand, ValueEnum};
use mobnet::experiments::{run_named, Config, ExperimentError, ExperimentReport};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mobnet", version, about = "Experiments on processor-sharing networks with mobile users")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mixing times of the single-user chain.
    Mixing(Common),
    /// Coupled sample paths with their pathwise checks.
    Simulate(Common),
    /// Homogenization frequencies against their exponential bounds.
    Homogenize(Common),
    /// Diffusive limit along the ladder.
    HeavyTraffic(Common),
    /// Stationary moments, tails and balance residuals.
    Stationary(Common),
    /// Sojourn time of a tagged user.
    Sojourn(Common),
    /// Deviation frequencies against the population threshold.
    Hitting(Common),
    /// Monte Carlo drift of the integral martingale.
    MartingaleCheck(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `rng.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `experiment.reps`.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl Command {
    fn split(&self) -> (&'static str, &Common) {
        match self {
            Command::Mixing(c) => ("mixing", c),
            Command::Simulate(c) => ("simulate", c),
            Command::Homogenize(c) => ("homogenize", c),
            Command::HeavyTraffic(c) => ("heavy-traffic", c),
            Command::Stationary(c) => ("stationary", c),
            Command::Sojourn(c) => ("sojourn", c),
            Command::Hitting(c) => ("hitting", c),
            Command::MartingaleCheck(c) => ("martingale-check", c),
        }
    }
}

fn run(name: &str, args: &Common) -> Result<ExperimentReport, ExperimentError> {
    let mut config = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.rng.seed = seed;
    }
    if let Some(reps) = args.reps {
        if reps == 0 {
            return Err(ExperimentError::InvalidValue { key: "--reps".into(), reason: "must be positive".into() });
        }
        config.experiment.reps = reps;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| ExperimentError::Config(e.to_string()))?;
    let report = pool.install(|| run_named(name, &config))?;
    if let Some(dir) = &args.out {
        report.write_dir(dir)?;
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = cli.command.split();
    let Format::Csv = args.format;
    match run(name, args) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            if let Err(e) = report.write_verdicts(&mut out) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
