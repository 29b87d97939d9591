//! Single-run driver: solve, then write the artifact set (trace CSV,
//! eigenfunction CSV, convergence SVG, result JSON) into the output
//! directory. Outputs carry no timestamps or absolute paths, so two runs
//! of the same config produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use invpower_core::engine::{self, EigenResult, EngineConfig, SeedChoice, Termination};
use invpower_core::operators::OperatorPair;
use invpower_core::oracle::{self, OracleConfig};
use invpower_core::space::{self, build_grid};
use serde::Serialize;

use crate::config::{RunConfig, SeedSpec};
use crate::svg;

/// Solves the configured problem. Shared with the sweep driver, which
/// skips the artifact step. The second value is the certified Rayleigh
/// minimum when one was requested and the minimizer converged.
pub fn solve(cfg: &RunConfig) -> Result<(EigenResult, Option<f64>)> {
    let grid = build_grid(cfg.n, cfg.m, cfg.kind)?;
    let pair = OperatorPair::with_truncation(grid, cfg.exponents(), cfg.radius)?;

    let choice = match &cfg.seed {
        SeedSpec::ConstOne => SeedChoice::ConstOne,
        SeedSpec::Random(s) => SeedChoice::Random { seed: *s },
        SeedSpec::File(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading seed field {}", path.display()))?;
            SeedChoice::FromField(space::read_field_csv(&text, grid)?)
        }
    };
    let w0 = engine::seed(&pair, &choice)?;

    let mut ecfg = EngineConfig {
        rtol: cfg.rtol,
        wtol: cfg.wtol,
        max_outer: cfg.max_outer,
        strict: cfg.strict,
        ..EngineConfig::default()
    };
    ecfg.inner.tol = cfg.inner_tol;
    ecfg.inner.debug_trace = cfg.debug_inner;
    ecfg.inner_tol_cap = ecfg.inner_tol_cap.max(cfg.inner_tol);

    let mut mu_hat = None;
    if cfg.compute_mu_hat {
        let o = oracle::rayleigh_minimize_direct(&pair, &w0, &OracleConfig::default())?;
        if o.converged {
            mu_hat = Some(o.mu_hat);
            ecfg.mu_hat = Some(o.mu_hat); // enables the per-step lower bound
        } else {
            eprintln!(
                "warning: rayleigh minimizer hit its budget (best {}, optimality {}); \
                 lower-bound check skipped",
                o.mu_hat, o.optimality
            );
        }
    }

    let result = engine::run(&pair, &w0, &ecfg)?;
    Ok((result, mu_hat))
}

#[derive(Serialize)]
struct FileNames {
    trace: &'static str,
    eigenfunction: &'static str,
    plot: &'static str,
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    kind: &'a str,
    n: usize,
    m: usize,
    p: f64,
    q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation_radius: Option<f64>,
    seed: String,
    rtol: f64,
    wtol: f64,
    max_outer: usize,
    inner_tol: f64,
    lambda: f64,
    converged: bool,
    termination: &'a str,
    outer_steps: usize,
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_hat: Option<f64>,
    ledger_entries: usize,
    files: FileNames,
}

fn seed_label(seed: &SeedSpec) -> String {
    match seed {
        SeedSpec::ConstOne => "const-one".into(),
        SeedSpec::Random(s) => format!("random:{s}"),
        SeedSpec::File(p) => format!("file:{}", p.display()),
    }
}

pub fn execute(cfg: &RunConfig) -> Result<i32> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let (result, mu_hat) = solve(cfg)?;

    let dir = &cfg.out_dir;
    write_artifact(dir, "trace.csv", |buf| {
        engine::write_trace_csv(buf, &result.trace)
    })?;
    write_artifact(dir, "eigenfunction.csv", |buf| {
        space::write_field_csv(buf, &result.w)
    })?;
    fs::write(dir.join("convergence.svg"), svg::render(&result.trace))
        .context("writing convergence.svg")?;
    if cfg.debug_inner {
        write_artifact(dir, "inner_debug.csv", |buf| {
            writeln!(buf, "step,row,stage,eps,merit,grad_inf,step_len")?;
            for st in &result.trace.states {
                for (i, r) in st.inner_trace.iter().enumerate() {
                    writeln!(
                        buf,
                        "{},{},{},{},{},{},{}",
                        st.n, i, r.stage, r.eps, r.merit, r.grad_inf, r.step_len
                    )?;
                }
            }
            Ok(())
        })?;
    }

    let doc = ResultDoc {
        kind: cfg.kind.label(),
        n: cfg.n,
        m: cfg.m,
        p: cfg.p,
        q: cfg.q,
        s: cfg.s,
        truncation_radius: cfg.s.map(|_| cfg.radius),
        seed: seed_label(&cfg.seed),
        rtol: cfg.rtol,
        wtol: cfg.wtol,
        max_outer: cfg.max_outer,
        inner_tol: cfg.inner_tol,
        lambda: result.lambda,
        converged: result.converged,
        termination: match result.trace.termination {
            Termination::Converged => "converged",
            Termination::MaxOuter => "max-outer",
        },
        outer_steps: result.trace.states.len(),
        residual: result.residual,
        mu_hat,
        ledger_entries: result.trace.ledger.len(),
        files: FileNames {
            trace: "trace.csv",
            eigenfunction: "eigenfunction.csv",
            plot: "convergence.svg",
        },
    };
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    fs::write(dir.join("result.json"), json).context("writing result.json")?;

    // the fully resolved config, so the run can be reproduced exactly
    let mut cfg_json = serde_json::to_string_pretty(&cfg.to_partial())?;
    cfg_json.push('\n');
    fs::write(dir.join("config.json"), cfg_json).context("writing config.json")?;

    println!(
        "{} p={} q={} M={}: lambda = {:.12e} in {} steps ({}), residual {:.3e}",
        cfg.kind.label(),
        cfg.p,
        cfg.q,
        cfg.m,
        result.lambda,
        result.trace.states.len(),
        doc.termination,
        result.residual
    );
    Ok(if result.converged { 0 } else { 2 })
}

fn write_artifact<F>(dir: &Path, name: &str, fill: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    fill(&mut buf)?;
    fs::write(dir.join(name), buf).with_context(|| format!("writing {name}"))
}
