use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fiscal_svar::dgp::{monte_carlo_recovery, DgpSpec, EstimatorConfig};
use fiscal_svar_cli::config::{LoadedConfig, Overrides};
use fiscal_svar_cli::pipeline::{run_pipeline, validate};
use fiscal_svar_cli::CliError;

#[derive(Parser)]
#[command(
    name = "fiscal-svar",
    version,
    about = "Government-spending multipliers from a Cholesky-identified SVAR"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config and input files without estimating anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full pipeline and write the report bundle.
    Estimate(EstimateArgs),
    /// Monte Carlo recovery of analytic multipliers from a DGP spec file.
    Montecarlo(MonteCarloArgs),
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the config, then $FISCAL_SVAR_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated country codes to keep.
    #[arg(long, value_delimiter = ',')]
    countries: Option<Vec<String>>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct MonteCarloArgs {
    /// DGP spec (JSON).
    #[arg(long, alias = "spec")]
    config: PathBuf,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Bootstrap replications per trial; 0 skips coverage.
    #[arg(long, default_value_t = 0)]
    reps: usize,
    #[arg(long, default_value_t = 4)]
    lags: usize,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    /// Replaces the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Write the full report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: args.seed,
        replications: args.reps,
        horizon: args.horizon,
        countries: args.countries,
        workers: args.workers,
    };
    let loaded = LoadedConfig::load(&args.config)?.apply(&overrides)?;
    let out_dir = loaded.output_dir(args.out.as_deref());
    let summary = run_pipeline(&loaded, &out_dir)?;
    print!("{}", summary.table_text);
    for c in &summary.manifest.countries {
        if c.failed_replications > 0 || !c.stable {
            eprintln!(
                "{}: {} failed replications, {} unstable, point estimate max modulus {:.4}",
                c.code, c.failed_replications, c.unstable_replications, c.max_modulus
            );
        }
    }
    eprintln!("wrote {} files to {}", summary.manifest.files.len(), out_dir.display());
    Ok(())
}

fn montecarlo(args: MonteCarloArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut spec: DgpSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let labels = spec.labels();
    let find = |l: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| CliError::Config(format!("DGP labels lack `{l}`")))
    };
    let estimator = EstimatorConfig {
        lags: args.lags,
        horizon: args.horizon,
        spending: find("G")?,
        output: find("Y")?,
        replications: args.reps,
        workers: args.workers,
        ..EstimatorConfig::default()
    };
    let report = monte_carlo_recovery(&spec, args.trials, &estimator).map_err(|e| CliError::Inference {
        country: "montecarlo".into(),
        message: e.to_string(),
    })?;
    println!(
        "{} trials, T={}, {} failed",
        report.trials,
        report.sample_length,
        report.failures.len()
    );
    println!(
        "{:>3} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "h", "analytic", "med.bias", "med.|err|", "rmse", "cov90"
    );
    for h in &report.horizons {
        let cov = h
            .coverage
            .iter()
            .find(|c| c.level == 90.0)
            .map_or("-".to_string(), |c| format!("{:.3}", c.share));
        println!(
            "{:>3} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9}",
            h.horizon, h.analytic, h.median_bias, h.median_abs_error, h.rmse, cov
        );
    }
    if let Some(path) = args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(&path, json).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Validate { config } => LoadedConfig::load(&config)
            .and_then(|l| validate(&l))
            .map(|s| print!("{s}")),
        Command::Estimate(args) => estimate(args),
        Command::Montecarlo(args) => montecarlo(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
