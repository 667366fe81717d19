use clap::{Parser, Subcommand};
use kac_lab::experiments::ExperimentKind;
use kac_lab::{run_to_dir, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

/// Reproducible experiments comparing a small Kac system coupled to a
/// finite reservoir against the same system coupled to a Maxwellian
/// thermostat. Each run writes `report.json` and `table.csv`.
#[derive(Parser)]
#[command(name = "kac-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,

    /// Path to the flat key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory for report.json and table.csv.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Experiment {
    /// Uniform-in-time L2 bound between the two evolutions.
    VerifyThm1,
    /// Uniform-in-time GTW d2 bound between the two evolutions.
    VerifyThm2,
    /// Steady-state bounds and the radial-projection consistency check.
    SteadyState,
    /// Jump-process ensembles with physics checks and spectral cross-validation.
    Dsmc,
    /// The D_N / D_1 functional-inequality laboratory.
    Inequality,
    /// Short-time saturation of the comparison estimate.
    Saturate,
}

impl Experiment {
    fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::VerifyThm1 => ExperimentKind::VerifyThm1,
            Experiment::VerifyThm2 => ExperimentKind::VerifyThm2,
            Experiment::SteadyState => ExperimentKind::SteadyState,
            Experiment::Dsmc => ExperimentKind::Dsmc,
            Experiment::Inequality => ExperimentKind::Inequality,
            Experiment::Saturate => ExperimentKind::Saturate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let Some(config_path) = cli.config else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {config_path:?}: {e}");
            return ExitCode::from(2);
        }
    };
    let kind = cli.experiment.kind();
    match run_to_dir(kind, &text, cli.seed, &cli.out) {
        Ok((report, outcome)) => {
            let worst = report
                .records
                .iter()
                .map(|r| r.margin + r.stderr)
                .fold(f64::INFINITY, f64::min);
            println!(
                "{}: {} ({} records, worst margin {:.3e})",
                kind.name(),
                if outcome == Outcome::Pass { "PASS" } else { "FAIL" },
                report.records.len(),
                worst
            );
            match outcome {
                Outcome::Pass => ExitCode::SUCCESS,
                Outcome::BoundViolated => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
