//! Outer inverse iteration: solve `A(u_{n+1}) = B(w_n)`, Y-normalize,
//! form `lambda_n = y_norm(u_{n+1})^{1-p}`, and repeat.
//!
//! Every step is checked against the bounds that make the scheme trustworthy:
//!
//! ```text
//! x_norm(w_{n+1})^p <= lambda_n <= x_norm(w_{n+1})^{p-1} x_norm(w_n)
//!                   <= lambda_n^{(p-1)/p} lambda_{n-1}^{1/p}
//! ```
//!
//! together with monotone `lambda_n`, monotone `x_norm(w_n)`, and (when a
//! reference Rayleigh minimum is supplied) `lambda_n >= mu_hat - slack`.
//! The bounds are exact for exact inner solves, so violations are measured
//! against `slack = 10 * inner_tol * max(1, lambda_0)` and anything beyond
//! that lands in the trace ledger (or aborts, in strict mode).

use crate::error::{Error, Result};
use crate::inner::{self, InnerConfig, InnerStatus};
use crate::operators::OperatorPair;
use crate::space::{self, Field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum SeedChoice {
    /// All-ones field, Y-normalized.
    ConstOne,
    /// Deterministic uniform values in [0, 1) from a seeded generator,
    /// Y-normalized; nonnegative so the comparison-principle regime applies.
    Random { seed: u64 },
    /// Caller-supplied field (e.g. read from disk), Y-normalized.
    FromField(Field),
}

/// Produces the unit-Y starting vector for [`run`].
pub fn seed(pair: &OperatorPair, choice: &SeedChoice) -> Result<Field> {
    let g = pair.grid();
    let raw = match choice {
        SeedChoice::ConstOne => Field::constant(g, 1.0),
        SeedChoice::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let vals: Vec<f64> = (0..g.node_count()).map(|_| rng.gen::<f64>()).collect();
            Field::new(g, vals)?
        }
        SeedChoice::FromField(f) => {
            if f.grid() != g {
                return Err(Error::GridMismatch);
            }
            f.clone()
        }
    };
    let (w, _) = space::normalize_y(&raw, pair.exponents().q)?;
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Stop when `|lambda_{n-1} - lambda_n| <= rtol * lambda_n` ...
    pub rtol: f64,
    /// ... and `y_norm(w_{n+1} - w_n) <= wtol`.
    pub wtol: f64,
    pub max_outer: usize,
    /// Inner solver settings. `inner.tol` doubles as the floor of the
    /// adaptive per-step tolerance.
    pub inner: InnerConfig,
    /// Cap of the adaptive inner tolerance `0.01 * |lambda_{n-1} -
    /// lambda_{n-2}|`; setting it equal to `inner.tol` pins the tolerance.
    pub inner_tol_cap: f64,
    /// Abort on the first invariant violation instead of recording it.
    pub strict: bool,
    /// Reference Rayleigh minimum; enables the per-step lower-bound check
    /// `lambda_n >= mu_hat - (1e-6 |mu_hat| + slack)`.
    pub mu_hat: Option<f64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            rtol: 1e-10,
            wtol: 1e-8,
            max_outer: 400,
            inner: InnerConfig::default(),
            inner_tol_cap: 1e-6,
            strict: false,
            mu_hat: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if !(self.rtol > 0.0) || !(self.wtol > 0.0) {
            return Err(Error::InvalidExponent(format!(
                "outer tolerances must be positive, got rtol = {}, wtol = {}",
                self.rtol, self.wtol
            )));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidExponent(
                "max_outer must be at least 1".into(),
            ));
        }
        if self.inner_tol_cap < self.inner.tol {
            return Err(Error::InvalidExponent(format!(
                "inner tolerance cap {} below floor {}",
                self.inner_tol_cap, self.inner.tol
            )));
        }
        Ok(())
    }

    /// Pins the inner tolerance to `tol` (floor = cap), as the invariant
    /// ledger semantics assume when slack is quoted against a fixed value.
    pub fn with_fixed_inner_tol(mut self, tol: f64) -> Self {
        self.inner.tol = tol;
        self.inner_tol_cap = tol;
        self
    }
}

/// Everything recorded about one outer step `n`: the iterate it produced
/// (`w` is `w_{n+1}`) and the scalars needed to audit the step later.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub n: usize,
    /// `lambda_n = y_norm(u_{n+1})^{1-p}`.
    pub lambda: f64,
    /// `w_{n+1}`, unit in Y, sign-aligned against `B(w_n)`.
    pub w: Field,
    /// `x_norm(w_{n+1})^p`.
    pub xnorm_w_p: f64,
    /// `y_norm(u_{n+1})` of the raw inner solution, before normalization.
    /// Multiplying these along the trace reconstructs the unnormalized
    /// iterate norms, hence the q = p norm-ratio identity.
    pub ynorm_u: f64,
    /// `y_norm(w_{n+1} - w_n)`.
    pub ynorm_diff: f64,
    pub inner_iters: usize,
    pub inner_residual: f64,
    pub sign_flipped: bool,
    /// Inner tolerance actually used for this step (the adaptive value).
    pub inner_tol_used: f64,
    /// Per-Newton-step debug rows; empty unless `inner.debug_trace` is set.
    pub inner_trace: Vec<inner::InnerTraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxOuter,
}

/// A bound that failed beyond slack: `magnitude` is the overshoot after the
/// slack allowance was already granted.
#[derive(Debug, Clone)]
pub struct LedgerEntry {
    pub step: usize,
    pub which: &'static str,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub states: Vec<IterationState>,
    pub ledger: Vec<LedgerEntry>,
    pub termination: Termination,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda: f64,
    /// Final iterate, unit in Y.
    pub w: Field,
    pub trace: Trace,
    pub converged: bool,
    /// Unregularized eigenpair residual `||A(w) - lambda y_norm(w)^{p-q}
    /// B(w)||_inf` at the final iterate.
    pub residual: f64,
    pub mu_hat: Option<f64>,
}

/// Rayleigh quotient `x_norm(w)^p / y_norm(w)^p`; scale-invariant, and equal
/// to the eigenvalue on eigenvectors.
pub fn rayleigh(pair: &OperatorPair, w: &Field) -> Result<f64> {
    let yn = pair.y_norm(w);
    if yn == 0.0 {
        return Err(Error::ZeroField("rayleigh quotient of the zero field"));
    }
    Ok(pair.x_norm_pow(w)? / yn.powf(pair.exponents().p))
}

fn do_step(
    pair: &OperatorPair,
    w_n: &Field,
    prev: Option<&IterationState>,
    tol_used: f64,
    cfg: &EngineConfig,
) -> Result<IterationState> {
    let n = prev.map_or(0, |s| s.n + 1);
    let f = pair.apply_b(w_n)?;
    // at a fixed point u_{n+1} = y_norm(u) * w_n, so the previous scale is
    // the right warm start
    let warm = prev.map(|s| s.w.scaled(s.ynorm_u));
    let mut icfg = cfg.inner.clone();
    icfg.tol = tol_used;
    let mut out = inner::solve_inner(pair, &f, warm.as_ref(), &icfg)?;
    if out.status != InnerStatus::Converged {
        return Err(Error::InnerSolveFailed {
            step: n,
            residual: out.residual,
            iterations: out.iterations,
            tolerance: tol_used,
        });
    }
    let (p, q) = (pair.exponents().p, pair.exponents().q);

    // The audit bounds live on the lambda scale, and dividing by
    // y_norm(u)^p amplifies the inner residual when the eigenvalue is
    // large. Measure the first-order effect <A(u) - f, u> / y_norm(u)^p
    // and re-solve (warm, tightened) until it sits well below the audit
    // slack, which is at least 10 * tol_used.
    let mut inner_iters = out.iterations;
    let mut inner_trace = std::mem::take(&mut out.trace);
    let mut best_viol = f64::INFINITY;
    for _ in 0..3 {
        let yn = space::y_norm(&out.u, q);
        if !(yn.is_finite() && yn > 0.0) {
            break; // the guards below turn this into the right error
        }
        let rtilde = pair.apply_a(&out.u)?.minus(&f)?;
        let viol = space::pairing(&rtilde, &out.u)?.abs() / yn.powf(p);
        if viol <= tol_used || viol >= 0.5 * best_viol {
            break; // below slack with margin, or at the machine floor
        }
        best_viol = viol;
        icfg.tol = (icfg.tol * 0.3 * tol_used / viol).max(1e-306);
        let mut retry = inner::solve_inner(pair, &f, Some(&out.u), &icfg)?;
        inner_iters += retry.iterations;
        inner_trace.append(&mut retry.trace);
        out = retry;
    }
    let ynorm_u = space::y_norm(&out.u, q);
    if ynorm_u == 0.0 {
        return Err(Error::ZeroField("inner solution at an iteration step"));
    }
    if !ynorm_u.is_finite() || ynorm_u < 1e-300 || ynorm_u > 1e300 {
        return Err(Error::Degenerate {
            step: n,
            ynorm: ynorm_u,
        });
    }
    let lambda = ynorm_u.powf(1.0 - p);
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::NonFinite("lambda at an iteration step"));
    }
    let mut w_next = out.u.scaled(1.0 / ynorm_u);
    let mut sign_flipped = false;
    if space::pairing(&f, &w_next)? < 0.0 {
        w_next = w_next.scaled(-1.0);
        sign_flipped = true;
    }
    let xnorm_w_p = pair.x_norm_pow(&w_next)?;
    if !xnorm_w_p.is_finite() {
        return Err(Error::NonFinite("x-norm of the new iterate"));
    }
    let ynorm_diff = space::y_norm(&w_next.minus(w_n)?, q);
    Ok(IterationState {
        n,
        lambda,
        w: w_next,
        xnorm_w_p,
        ynorm_u,
        ynorm_diff,
        inner_iters,
        inner_residual: out.residual,
        sign_flipped,
        inner_tol_used: tol_used,
        inner_trace,
    })
}

/// One outer step from the seed `w0` (must be unit in Y).
pub fn first_step(pair: &OperatorPair, w0: &Field, cfg: &EngineConfig) -> Result<IterationState> {
    cfg.validate()?;
    do_step(pair, w0, None, cfg.inner.tol, cfg)
}

/// One outer step continuing from a previous state.
pub fn step(
    pair: &OperatorPair,
    prev: &IterationState,
    cfg: &EngineConfig,
) -> Result<IterationState> {
    cfg.validate()?;
    do_step(pair, &prev.w, Some(prev), cfg.inner.tol, cfg)
}

struct Audit<'a> {
    cfg: &'a EngineConfig,
    ledger: Vec<LedgerEntry>,
}

impl Audit<'_> {
    /// Requires `lhs <= rhs + slack`; books the overshoot otherwise.
    fn le(
        &mut self,
        step: usize,
        which: &'static str,
        lhs: f64,
        rhs: f64,
        slack: f64,
    ) -> Result<()> {
        let excess = lhs - (rhs + slack);
        if excess > 0.0 {
            if self.cfg.strict {
                return Err(Error::InvariantViolation {
                    step,
                    which,
                    magnitude: excess,
                });
            }
            self.ledger.push(LedgerEntry {
                step,
                which,
                magnitude: excess,
            });
        }
        Ok(())
    }
}

/// Runs the iteration to convergence (or `max_outer`). Non-unit seeds are
/// normalized on entry. Exhausting `max_outer` is not an error: the result
/// comes back with `converged = false`.
pub fn run(pair: &OperatorPair, w0: &Field, cfg: &EngineConfig) -> Result<EigenResult> {
    cfg.validate()?;
    let p = pair.exponents().p;
    let (mut w_cur, _) = space::normalize_y(w0, pair.exponents().q)?;
    let mut prev_xnorm = pair.x_norm(&w_cur)?; // x_norm(w_n), starts at w_0

    let mut states: Vec<IterationState> = Vec::new();
    let mut audit = Audit {
        cfg,
        ledger: Vec::new(),
    };
    let mut lambda0 = 1.0;
    let mut termination = Termination::MaxOuter;

    for n in 0..cfg.max_outer {
        let tol_n = if states.len() < 2 {
            cfg.inner_tol_cap
        } else {
            let k = states.len();
            let gap = (states[k - 2].lambda - states[k - 1].lambda).abs();
            (0.01 * gap).clamp(cfg.inner.tol, cfg.inner_tol_cap)
        };
        let state = do_step(pair, &w_cur, states.last(), tol_n, cfg)?;
        if n == 0 {
            lambda0 = state.lambda;
        }
        let slack = 10.0 * tol_n * lambda0.max(1.0);
        let lam = state.lambda;
        let x_next = state.xnorm_w_p.powf(1.0 / p);
        let mixed = x_next.powf(p - 1.0) * prev_xnorm;
        audit.le(n, "xnorm_p_le_lambda", state.xnorm_w_p, lam, slack)?;
        audit.le(n, "lambda_le_mixed", lam, mixed, slack)?;
        if let Some(prev) = states.last() {
            let geomean = lam.powf((p - 1.0) / p) * prev.lambda.powf(1.0 / p);
            audit.le(n, "mixed_le_geomean", mixed, geomean, slack)?;
            audit.le(n, "lambda_monotone", lam, prev.lambda, slack)?;
            audit.le(n, "xnorm_monotone", x_next, prev_xnorm, slack)?;
        }
        if let Some(mu) = cfg.mu_hat {
            audit.le(n, "mu_lower_bound", mu - 1e-6 * mu.abs(), lam, slack)?;
        }

        let done = states.last().is_some_and(|prev| {
            (prev.lambda - lam).abs() <= cfg.rtol * lam && state.ynorm_diff <= cfg.wtol
        });
        prev_xnorm = x_next;
        w_cur = state.w.clone();
        states.push(state);
        if done {
            termination = Termination::Converged;
            break;
        }
    }

    let last = states.last().expect("max_outer >= 1 produced a state");
    let residual = pair.residual(last.lambda, &last.w)?;
    Ok(EigenResult {
        lambda: last.lambda,
        w: last.w.clone(),
        converged: termination == Termination::Converged,
        residual,
        mu_hat: cfg.mu_hat,
        trace: Trace {
            states,
            ledger: audit.ledger,
            termination,
        },
    })
}

/// Writes the trace in the fixed CSV layout consumed by the command line
/// tool and the plotting helper.
pub fn write_trace_csv<W: std::io::Write>(out: &mut W, trace: &Trace) -> std::io::Result<()> {
    writeln!(
        out,
        "n,lambda_n,xnorm_w_np1_p,ynorm_diff,inner_iters,inner_residual,sign_flipped"
    )?;
    for s in &trace.states {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.n, s.lambda, s.xnorm_w_p, s.ynorm_diff, s.inner_iters, s.inner_residual, s.sign_flipped
        )?;
    }
    Ok(())
}
