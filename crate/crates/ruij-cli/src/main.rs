use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use ruij_cli::config::{parse_complex, RunConfig};
use ruij_cli::output::{to_csv, write_reports};
use ruij_cli::suites::{run_suite, SuiteOptions};
use ruij_cli::CliError;
use ruij_core::double_sine::{s2, S2_TOLERANCE};
use ruij_core::kernels::{hat_k, hat_mu, kernel_k, measure_mu, KernelContext};
use ruij_core::params::Params;
use ruij_core::quadrature::QuadratureSpec;
use ruij_core::wavefunction::{psi, CoordinateVector, SpectralVector};

/// Default directory for report files.
const DEFAULT_OUT: &str = "ruij-reports";

#[derive(Parser)]
#[command(name = "ruij", version, about = "Numerical checks for the hyperbolic Ruijsenaars system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    K,
    Mu,
    HatK,
    HatMu,
}

#[derive(clap::Args)]
struct ParamArgs {
    /// First period, "re" or "re,im".
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "1")]
    omega1: C64,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "1")]
    omega2: C64,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "0.5")]
    g: C64,
}

impl ParamArgs {
    fn params(&self) -> Result<Params, CliError> {
        Params::validate(self.omega1, self.omega2, self.g).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write CSV and JSON reports.
    Verify {
        /// Suite name, or "all"; defaults to the suites listed in the config file.
        suite: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for <suite>.csv and <suite>.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict the inequality suite to one n.
        #[arg(long)]
        n: Option<usize>,
        /// Samples per inequality property.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Evaluate S₂(z|ω₁, ω₂).
    EvalS2 {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "1")]
        omega1: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "1")]
        omega2: C64,
    },
    /// Evaluate K, μ, K̂ or μ̂ at one point.
    EvalKernel {
        #[arg(long, value_enum)]
        kind: KernelKind,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        x: C64,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Evaluate the wave function at real spectral values and coordinates.
    EvalPsi {
        /// Comma-separated spectral values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambda: Vec<f64>,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: ParamArgs,
    },
}

fn value_json(v: C64, error: f64) -> String {
    serde_json::json!({ "value": [v.re, v.im], "error": error }).to_string()
}

fn verify(
    suite: Option<String>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    n: Option<usize>,
    samples: Option<usize>,
) -> Result<bool, CliError> {
    let cfg = match &config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let suites = match suite {
        Some(s) => vec![s],
        None if !cfg.suites.is_empty() => cfg.suites.clone(),
        None => return Err(CliError::Config("no suite given and none listed in the config".into())),
    };
    let opts = SuiteOptions {
        params: cfg.params.as_ref().map(|p| p.resolve()).transpose()?,
        quadrature: cfg.quadrature,
        seed: seed.or(cfg.seed).unwrap_or(0),
        n,
        samples,
    };
    let dir = out.or(cfg.output_path).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut all_pass = true;
    for s in &suites {
        let reports = run_suite(s, &opts)?;
        print!("{}", to_csv(&reports));
        write_reports(&dir, s, opts.seed, &reports)?;
        let passed = reports.iter().filter(|r| r.pass).count();
        eprintln!("{s}: {passed}/{} checks passed", reports.len());
        all_pass &= passed == reports.len();
    }
    Ok(all_pass)
}

fn kernel_value(kind: KernelKind, x: C64, params: &ParamArgs) -> Result<C64, CliError> {
    let ctx = KernelContext::new(params.params()?).map_err(|e| CliError::Evaluation(e.to_string()))?;
    let v = match kind {
        KernelKind::K => kernel_k(x, &ctx),
        KernelKind::Mu => measure_mu(x, &ctx),
        KernelKind::HatK => hat_k(x, &ctx),
        KernelKind::HatMu => hat_mu(x, &ctx),
    };
    v.map_err(|e| CliError::Evaluation(e.to_string()))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify {
            suite,
            config,
            out,
            seed,
            n,
            samples,
        } => verify(suite, config, out, seed, n, samples),
        Command::EvalS2 { z, omega1, omega2 } => {
            let per = ruij_core::params::Periods::new(omega1, omega2).map_err(|e| CliError::Config(e.to_string()))?;
            let v = s2(z, &per).map_err(|e| CliError::Evaluation(e.to_string()))?;
            println!("{}", value_json(v, S2_TOLERANCE * v.norm()));
            Ok(true)
        }
        Command::EvalKernel { kind, x, params } => {
            let v = kernel_value(kind, x, &params)?;
            println!("{}", value_json(v, 2.0 * S2_TOLERANCE * v.norm()));
            Ok(true)
        }
        Command::EvalPsi {
            lambda,
            x,
            tol,
            seed,
            params,
        } => {
            let ctx = KernelContext::new(params.params()?).map_err(|e| CliError::Evaluation(e.to_string()))?;
            let coords = CoordinateVector::new(&x).map_err(|e| CliError::Config(e.to_string()))?;
            let spec = QuadratureSpec {
                seed,
                ..QuadratureSpec::with_tolerance(tol)
            };
            let v = psi(&SpectralVector::real(&lambda), &coords, &ctx, &spec)
                .map_err(|e| CliError::Evaluation(e.to_string()))?;
            println!("{}", value_json(v.value, v.error_estimate));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(t) = std::env::var("RUIJ_THREADS") {
        match t.parse::<usize>() {
            Ok(k) if k > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("error: RUIJ_THREADS must be a positive integer, got {t:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
