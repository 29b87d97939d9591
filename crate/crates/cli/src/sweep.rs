//! Sweep driver: a JSON array of config deltas, each merged over the base
//! config and solved. Runs execute in parallel; every run contributes one
//! row to a summary CSV, and a failed run is recorded in its row rather
//! than aborting the sweep.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};

use crate::config::{self, PartialConfig, RunConfig};
use crate::run;

struct Row {
    kind: String,
    p: f64,
    q: f64,
    m: usize,
    lambda: f64,
    iters: usize,
    converged: bool,
    mu_hat: Option<f64>,
    error: Option<String>,
}

impl Row {
    /// A placeholder row for a run that produced no eigenvalue; carries
    /// whatever identity the merged config had.
    fn failed(merged: &PartialConfig, err: String) -> Row {
        Row {
            kind: merged.kind.clone().unwrap_or_else(|| "?".into()),
            p: merged.p.unwrap_or(f64::NAN),
            q: merged.q.unwrap_or(f64::NAN),
            m: merged.m.unwrap_or(0),
            lambda: f64::NAN,
            iters: 0,
            converged: false,
            mu_hat: None,
            error: Some(err),
        }
    }
}

fn run_one(merged: &PartialConfig, resolved: &Result<RunConfig, String>) -> Row {
    let cfg = match resolved {
        Err(e) => return Row::failed(merged, e.clone()),
        Ok(cfg) => cfg,
    };
    match run::solve(cfg) {
        Ok((res, mu_hat)) => Row {
            kind: cfg.kind.label().into(),
            p: cfg.p,
            q: cfg.q,
            m: cfg.m,
            lambda: res.lambda,
            iters: res.trace.states.len(),
            converged: res.converged,
            mu_hat,
            error: None,
        },
        Err(e) => Row::failed(merged, format!("{e:#}")),
    }
}

pub fn execute(base: &PartialConfig, path: &Path) -> Result<i32> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading sweep file {}", path.display()))?;
    let deltas: Vec<PartialConfig> = serde_json::from_str(&text)
        .with_context(|| format!("parsing sweep file {}", path.display()))?;
    if deltas.is_empty() {
        bail!("sweep file {} lists no runs", path.display());
    }

    let jobs: Vec<(PartialConfig, Result<RunConfig, String>)> = deltas
        .iter()
        .map(|d| {
            let merged = base.overridden_by(d);
            let resolved = config::resolve(&merged);
            (merged, resolved)
        })
        .collect();

    let rows: Mutex<Vec<Option<Row>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let row = run_one(&jobs[i].0, &jobs[i].1);
                rows.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let rows: Vec<Row> = rows
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every index was claimed by a worker"))
        .collect();

    let mut failures = 0usize;
    for (i, row) in rows.iter().enumerate() {
        if let Some(err) = &row.error {
            failures += 1;
            eprintln!("sweep run {i} failed: {err}");
        }
    }
    if failures == rows.len() {
        bail!("all {} sweep runs failed", rows.len());
    }

    let out_dir = config::out_dir_of(base);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut buf = Vec::new();
    writeln!(buf, "kind,p,q,M,lambda,iters,converged,mu_hat")?;
    for r in &rows {
        writeln!(
            buf,
            "{},{},{},{},{},{},{},{}",
            r.kind,
            r.p,
            r.q,
            r.m,
            r.lambda,
            r.iters,
            r.converged,
            r.mu_hat.map(|v| v.to_string()).unwrap_or_default()
        )?;
    }
    let summary = out_dir.join("sweep_summary.csv");
    fs::write(&summary, buf).with_context(|| format!("writing {}", summary.display()))?;
    println!(
        "{}: {} runs, {} failed",
        summary.display(),
        rows.len(),
        failures
    );
    Ok(0)
}
