//! Configuration: a partial layer (JSON file or flag set, everything
//! optional) merged with file < flags precedence, then resolved into a
//! fully validated [`RunConfig`]. Resolution collects every violation
//! instead of stopping at the first.

use std::path::PathBuf;

use invpower_core::space::{Exponents, ProblemKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub kind: Option<String>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub s: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub seed_kind: Option<String>,
    pub rng_seed: Option<u64>,
    pub seed_file: Option<PathBuf>,
    pub rtol: Option<f64>,
    pub wtol: Option<f64>,
    pub max_outer: Option<usize>,
    pub inner_tol: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub strict: Option<bool>,
    pub mu_hat: Option<bool>,
    pub debug_inner: Option<bool>,
}

macro_rules! take_over {
    ($merged:ident, $other:ident: $($field:ident),* $(,)?) => {
        $(if $other.$field.is_some() {
            $merged.$field = $other.$field.clone();
        })*
    };
}

impl PartialConfig {
    /// Field-wise merge; `other` wins wherever it is set.
    pub fn overridden_by(&self, other: &PartialConfig) -> PartialConfig {
        let mut merged = self.clone();
        take_over!(merged, other: kind, n, m, p, q, s, r, seed_kind, rng_seed,
            seed_file, rtol, wtol, max_outer, inner_tol, out_dir, strict,
            mu_hat, debug_inner);
        merged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedSpec {
    ConstOne,
    Random(u64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub q: f64,
    /// Fractional order; set exactly when the kind is fractional.
    pub s: Option<f64>,
    pub radius: f64,
    pub seed: SeedSpec,
    pub rtol: f64,
    pub wtol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub out_dir: PathBuf,
    pub strict: bool,
    pub compute_mu_hat: bool,
    pub debug_inner: bool,
}

impl RunConfig {
    pub fn exponents(&self) -> Exponents {
        match self.s {
            Some(s) => Exponents::fractional(self.p, self.q, s),
            None => Exponents::new(self.p, self.q),
        }
    }

    /// Inverse of [`resolve`]: a partial config that resolves back to self.
    pub fn to_partial(&self) -> PartialConfig {
        let (seed_kind, rng_seed, seed_file) = match &self.seed {
            SeedSpec::ConstOne => ("const-one", None, None),
            SeedSpec::Random(s) => ("random", Some(*s), None),
            SeedSpec::File(p) => ("file", None, Some(p.clone())),
        };
        PartialConfig {
            kind: Some(self.kind.label().to_string()),
            n: Some(self.n),
            m: Some(self.m),
            p: Some(self.p),
            q: Some(self.q),
            s: self.s,
            r: Some(self.radius),
            seed_kind: Some(seed_kind.to_string()),
            rng_seed,
            seed_file,
            rtol: Some(self.rtol),
            wtol: Some(self.wtol),
            max_outer: Some(self.max_outer),
            inner_tol: Some(self.inner_tol),
            out_dir: Some(self.out_dir.clone()),
            strict: Some(self.strict),
            mu_hat: Some(self.compute_mu_hat),
            debug_inner: Some(self.debug_inner),
        }
    }
}

/// Output directory precedence: config value, then INVPOWER_OUT_DIR, then
/// the working directory.
pub fn out_dir_of(c: &PartialConfig) -> PathBuf {
    c.out_dir.clone().unwrap_or_else(|| {
        std::env::var_os("INVPOWER_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
    })
}

/// Validates the merged configuration; the error lists every violation,
/// one per line.
pub fn resolve(c: &PartialConfig) -> Result<RunConfig, String> {
    let mut problems: Vec<String> = Vec::new();

    let kind = match &c.kind {
        None => {
            problems.push("missing required --kind (dirichlet-1d | dirichlet-2d | fractional-1d | steklov-1d)".into());
            None
        }
        Some(k) => match ProblemKind::parse(k) {
            Ok(k) => Some(k),
            Err(e) => {
                problems.push(e.to_string());
                None
            }
        },
    };
    if c.p.is_none() {
        problems.push("missing required --p".into());
    }
    if c.q.is_none() {
        problems.push("missing required --q".into());
    }

    if let (Some(kind), Some(n)) = (kind, c.n) {
        if n != kind.dimension() {
            problems.push(format!(
                "N = {n} contradicts kind {} (N = {})",
                kind.label(),
                kind.dimension()
            ));
        }
    }
    let m = c.m.unwrap_or(64);
    if m < 2 {
        problems.push(format!("M = {m} must be at least 2"));
    }

    let s = match kind {
        Some(ProblemKind::Fractional1d) => Some(c.s.unwrap_or(0.5)),
        _ => None, // s is ignored for the non-fractional kinds
    };
    let radius = c.r.unwrap_or(1.0);
    if !(radius > 0.0) {
        problems.push(format!("R = {radius} must be positive"));
    }

    if let (Some(kind), Some(p), Some(q)) = (kind, c.p, c.q) {
        let exps = match s {
            Some(s) => Exponents::fractional(p, q, s),
            None => Exponents::new(p, q),
        };
        if let Err(e) = exps.validate(kind) {
            problems.push(e.to_string());
        }
    }

    let seed = match c.seed_kind.as_deref().unwrap_or("const-one") {
        "const-one" => SeedSpec::ConstOne,
        "random" => SeedSpec::Random(c.rng_seed.unwrap_or(0)),
        "file" => match &c.seed_file {
            Some(path) => SeedSpec::File(path.clone()),
            None => {
                problems.push("seed-kind file requires --seed-file".into());
                SeedSpec::ConstOne
            }
        },
        other => {
            problems.push(format!(
                "unknown seed kind {other:?} (const-one | random | file)"
            ));
            SeedSpec::ConstOne
        }
    };

    let rtol = c.rtol.unwrap_or(1e-10);
    let wtol = c.wtol.unwrap_or(1e-8);
    let inner_tol = c.inner_tol.unwrap_or(1e-10);
    let max_outer = c.max_outer.unwrap_or(400);
    for (name, v) in [("rtol", rtol), ("wtol", wtol), ("inner-tol", inner_tol)] {
        if !(v > 0.0) || !v.is_finite() {
            problems.push(format!("{name} = {v} must be a positive number"));
        }
    }
    if max_outer == 0 {
        problems.push("max-outer must be at least 1".into());
    }

    if !problems.is_empty() {
        return Err(problems.join("\n"));
    }
    let kind = kind.unwrap();
    Ok(RunConfig {
        kind,
        n: kind.dimension(),
        m,
        p: c.p.unwrap(),
        q: c.q.unwrap(),
        s,
        radius,
        seed,
        rtol,
        wtol,
        max_outer,
        inner_tol,
        out_dir: out_dir_of(c),
        strict: c.strict.unwrap_or(false),
        compute_mu_hat: c.mu_hat.unwrap_or(false),
        debug_inner: c.debug_inner.unwrap_or(false),
    })
}
