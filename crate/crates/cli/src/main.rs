mod config;
mod run;
mod svg;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use config::PartialConfig;

/// Inverse-iteration eigensolver for quasilinear eigenvalue problems.
#[derive(Debug, Parser)]
#[command(name = "invpower", version, about)]
struct Cli {
    /// JSON config file; command-line flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    /// Problem kind: dirichlet-1d | dirichlet-2d | fractional-1d | steklov-1d
    #[arg(long)]
    kind: Option<String>,

    /// Spatial dimension (must match the kind; informational)
    #[arg(long = "N")]
    n: Option<usize>,

    /// Grid resolution (cells per side)
    #[arg(long = "M")]
    m: Option<usize>,

    /// Operator exponent p > 1
    #[arg(long)]
    p: Option<f64>,

    /// Normalization exponent q >= 1
    #[arg(long)]
    q: Option<f64>,

    /// Fractional order s in (0,1); fractional-1d only
    #[arg(long)]
    s: Option<f64>,

    /// Kernel truncation radius; fractional-1d only
    #[arg(long = "R")]
    r: Option<f64>,

    /// Seed field: const-one | random | file
    #[arg(long)]
    seed_kind: Option<String>,

    /// RNG seed for seed-kind random
    #[arg(long)]
    rng_seed: Option<u64>,

    /// CSV file holding the seed field for seed-kind file
    #[arg(long)]
    seed_file: Option<PathBuf>,

    /// Relative eigenvalue tolerance
    #[arg(long)]
    rtol: Option<f64>,

    /// Normalized iterate difference tolerance
    #[arg(long)]
    wtol: Option<f64>,

    /// Outer iteration cap
    #[arg(long)]
    max_outer: Option<usize>,

    /// Inner solve tolerance floor
    #[arg(long)]
    inner_tol: Option<f64>,

    /// Output directory (default: $INVPOWER_OUT_DIR, then ".")
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Abort on any audit violation instead of recording it
    #[arg(long)]
    strict: bool,

    /// Certify against an independently minimized Rayleigh quotient
    #[arg(long = "mu-hat")]
    mu_hat: bool,

    /// JSON array of config deltas; runs each merged config, writes a summary CSV
    #[arg(long)]
    sweep_file: Option<PathBuf>,
}

impl Cli {
    /// Boolean flags only override when actually given on the command
    /// line, so a file-set true survives their absence.
    fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            kind: self.kind.clone(),
            n: self.n,
            m: self.m,
            p: self.p,
            q: self.q,
            s: self.s,
            r: self.r,
            seed_kind: self.seed_kind.clone(),
            rng_seed: self.rng_seed,
            seed_file: self.seed_file.clone(),
            rtol: self.rtol,
            wtol: self.wtol,
            max_outer: self.max_outer,
            inner_tol: self.inner_tol,
            out_dir: self.out_dir.clone(),
            strict: if self.strict { Some(true) } else { None },
            mu_hat: if self.mu_hat { Some(true) } else { None },
            debug_inner: None,
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let file_layer = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<PartialConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => PartialConfig::default(),
    };
    let merged = file_layer.overridden_by(&cli.to_partial());

    if let Some(sweep_path) = &cli.sweep_file {
        return sweep::execute(&merged, sweep_path);
    }
    let cfg = config::resolve(&merged).map_err(anyhow::Error::msg)?;
    run::execute(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
