use std::path::PathBuf;
use std::process::ExitCode;

use adaptconv_cli::config::{Scenario, ScenarioSpec, Settings, OUT_DIR_ENV};
use adaptconv_cli::error::Result;
use adaptconv_cli::run_scenario;
use clap::Parser;

/// Adaptive convolution scenarios and verification suite.
///
/// Settings come from the built-in defaults, then the `--config` file, then flags.
#[derive(Debug, Parser)]
#[command(name = "adaptconv", version)]
struct Args {
    /// smooth1d | banana2d | threegauss | vkde-demo | phasespace | verify
    scenario: String,
    /// Grid points per axis (comma-separated for 2D, one value is broadcast).
    #[arg(long, allow_hyphen_values = true)]
    grid_n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_lo: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    grid_hi: Option<String>,
    /// Standard deviation of the Gaussian kernel.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
    /// Fixed-point window parameter, in (0, sqrt 2).
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Window width of the fixed-window adaptation.
    #[arg(long = "Q", allow_hyphen_values = true)]
    q: Option<String>,
    /// Density-estimation scale; calibrated when absent.
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    /// Density-estimation exponent; defaults to 1/d.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Output directory; falls back to $ADAPTCONV_OUT_DIR.
    #[arg(long)]
    out_dir: Option<String>,
    /// Run only the verify groups whose name contains this text.
    #[arg(long)]
    filter: Option<String>,
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Compression factor of the second bump in smooth1d.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Sample count of vkde-demo.
    #[arg(long, allow_hyphen_values = true)]
    n_samples: Option<String>,
    /// Kernel-ellipse centers of banana2d, as `x:y;x:y`.
    #[arg(long, allow_hyphen_values = true)]
    centers: Option<String>,
}

impl Args {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::new(),
        };
        let flags = [
            ("grid_n", &self.grid_n),
            ("grid_lo", &self.grid_lo),
            ("grid_hi", &self.grid_hi),
            ("sigma", &self.sigma),
            ("lambda", &self.lambda),
            ("q", &self.q),
            ("kappa", &self.kappa),
            ("beta", &self.beta),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("filter", &self.filter),
            ("alpha", &self.alpha),
            ("n_samples", &self.n_samples),
            ("centers", &self.centers),
        ];
        let mut over = Settings::new();
        for (key, value) in flags {
            if let Some(v) = value {
                over.set(key, v)?;
            }
        }
        s.merge(&over);
        Ok(s)
    }
}

fn run(args: &Args) -> Result<bool> {
    let scenario: Scenario = args.scenario.parse()?;
    let env = std::env::var(OUT_DIR_ENV).ok();
    let spec = ScenarioSpec::resolve(scenario, &args.settings()?, env.as_deref())?;
    let report = run_scenario(&spec)?;
    println!("{}", report.to_json()?);
    for c in report.failures() {
        eprintln!("FAIL {} value={:e} tol={:e}", c.name, c.value, c.tol);
    }
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
