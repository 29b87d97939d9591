//! Inner solve: given dual data `f`, find `u` with `A(u) = f`.
//!
//! Equivalently, minimize the strictly convex
//! `E(u) = x_norm(u)^p / p - <f, u>`.
//!
//! For `p = 2` the operator is linear, so one banded (or, for the fractional
//! kind, dense) Cholesky solve plus an optional iterative-refinement pass
//! finishes the job. For `p != 2` we run damped Newton on a regularized
//! energy and anneal the regularization down: stages at
//! `eps = eps0 * decay^k` with the smoothed gradient, then a final polish
//! that uses the exact gradient with an `eps_min`-floored Hessian so the
//! directions stay well defined where the exact Hessian degenerates.
//!
//! The reported residual is always the unregularized `||A(u) - f||_inf`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::OperatorPair;
use crate::space::{self, DualVector, Exponents, Field, ProblemKind};

#[derive(Debug, Clone)]
pub struct InnerConfig {
    /// Residual tolerance, relative to `max(1, ||f||_inf)`.
    pub tol: f64,
    /// Total Newton iteration budget across all stages.
    pub max_iters: usize,
    /// Regularization floor; also the Hessian floor during polish.
    pub eps_min: f64,
    /// Geometric annealing factor for `eps`.
    pub eps_decay: f64,
    /// Armijo sufficient-decrease constant, in (0, 0.5].
    pub armijo_c: f64,
    /// Line-search backtracking factor, in (0, 1).
    pub backtrack: f64,
    /// Run one iterative-refinement pass after the direct p = 2 solve.
    pub refine_p2: bool,
    /// Route p = 2 through the Newton path (used to cross-check the paths).
    pub force_newton: bool,
    /// Collect per-iteration debug rows.
    pub debug_trace: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            tol: 1e-10,
            max_iters: 400,
            eps_min: 1e-9,
            eps_decay: 0.1,
            armijo_c: 1e-4,
            backtrack: 0.5,
            refine_p2: true,
            force_newton: false,
            debug_trace: false,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidExponent(format!(
                "inner tolerance {} must be positive",
                self.tol
            )));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return Err(Error::InvalidExponent(format!(
                "eps decay {} must lie in (0, 1)",
                self.eps_decay
            )));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c <= 0.5) {
            return Err(Error::InvalidExponent(format!(
                "Armijo constant {} must lie in (0, 0.5]",
                self.armijo_c
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidExponent(format!(
                "backtrack factor {} must lie in (0, 1)",
                self.backtrack
            )));
        }
        if !(self.eps_min > 0.0) {
            return Err(Error::InvalidExponent(format!(
                "eps floor {} must be positive",
                self.eps_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    Converged,
    MaxIterations,
}

/// One Newton step's worth of debug data.
#[derive(Debug, Clone)]
pub struct InnerTraceRow {
    pub stage: usize,
    pub eps: f64,
    pub merit: f64,
    pub grad_inf: f64,
    pub step_len: f64,
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub u: Field,
    pub iterations: usize,
    pub residual: f64,
    pub status: InnerStatus,
    pub trace: Vec<InnerTraceRow>,
}

/// The convex objective the solve minimizes:
/// `(1/p) x_norm(u)^p - <f, u>`.
pub fn energy(op: &OperatorPair, u: &Field, f: &DualVector) -> Result<f64> {
    if u.grid() != op.grid() || f.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(op.energy_eps(u, 0.0) - space::pairing(f, u)?)
}

fn dual_residual(op: &OperatorPair, u: &Field, f: &DualVector) -> Result<f64> {
    Ok(op.apply_a(u)?.minus(f)?.linf())
}

/// Largest difference-quotient magnitude of `u`; sets the annealing scale.
fn max_gradient_scale(op: &OperatorPair, u: &Field) -> f64 {
    let g = op.grid();
    let h = g.h();
    let m = g.m;
    let v = u.values();
    let mut scale: f64 = 0.0;
    match g.kind {
        ProblemKind::Dirichlet1d | ProblemKind::Fractional1d => {
            let at = |i: usize| if i == 0 || i == m { 0.0 } else { v[i - 1] };
            for c in 0..m {
                scale = scale.max(((at(c + 1) - at(c)) / h).abs());
            }
            if g.kind == ProblemKind::Fractional1d {
                for val in v {
                    scale = scale.max(val.abs());
                }
            }
        }
        ProblemKind::Steklov1d => {
            for c in 0..m {
                scale = scale.max(((v[c + 1] - v[c]) / h).abs());
            }
            for val in v {
                scale = scale.max(val.abs());
            }
        }
        ProblemKind::Dirichlet2d => {
            let w = m - 1;
            let at = |ix: usize, iy: usize| -> f64 {
                if ix == 0 || ix == m || iy == 0 || iy == m {
                    0.0
                } else {
                    v[(iy - 1) * w + (ix - 1)]
                }
            };
            for cy in 0..m {
                for cx in 0..m {
                    let a = at(cx, cy);
                    let dx = (at(cx + 1, cy) - a) / h;
                    let dy = (at(cx, cy + 1) - a) / h;
                    scale = scale.max((dx * dx + dy * dy).sqrt());
                }
            }
        }
    }
    scale
}

enum Factor {
    Band(linalg::BandedChol),
    Dense { n: usize, l: Vec<f64> },
}

impl Factor {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factor::Band(chol) => chol.solve(b),
            Factor::Dense { n, l } => linalg::dense_chol_solve(*n, l, b),
        }
    }
}

fn factor_hessian(op: &OperatorPair, u: &Field, eps: f64) -> Result<Factor> {
    match op.kind() {
        ProblemKind::Fractional1d => {
            let mut h = op.hessian_dense_eps(u, eps)?;
            let n = u.len();
            linalg::dense_cholesky(n, &mut h)?;
            Ok(Factor::Dense { n, l: h })
        }
        _ => Ok(Factor::Band(op.hessian_banded_eps(u, eps)?.cholesky()?)),
    }
}

/// Newton direction `H_eps(u)^{-1} g`. Fractional steps go through
/// Jacobi-preconditioned CG on the assembled dense Hessian (the matrix is
/// dense, so a direct factor per step would dominate); banded kinds factor
/// directly.
fn newton_direction(op: &OperatorPair, u: &Field, eps: f64, g: &[f64]) -> Result<Vec<f64>> {
    match op.kind() {
        ProblemKind::Fractional1d => {
            let n = u.len();
            let hes = op.hessian_dense_eps(u, eps)?;
            let diag: Vec<f64> = (0..n).map(|i| hes[i * n + i]).collect();
            if diag.iter().any(|&d| !(d > 0.0)) {
                return Err(Error::SingularSystem { row: 0, pivot: 0.0 });
            }
            let mut du = vec![0.0; n];
            let tol = (0.01 * linalg::linf(g)).max(1e-16);
            linalg::pcg(
                |x, out| {
                    for i in 0..n {
                        let row = &hes[i * n..(i + 1) * n];
                        out[i] = linalg::dot(row, x);
                    }
                },
                &diag,
                g,
                &mut du,
                tol,
                20 * n,
            );
            Ok(du)
        }
        _ => Ok(Factor::Band(op.hessian_banded_eps(u, eps)?.cholesky()?).solve(g)),
    }
}

struct NewtonCtx<'a> {
    op: &'a OperatorPair,
    f: &'a DualVector,
    cfg: &'a InnerConfig,
    trace: Vec<InnerTraceRow>,
    iterations: usize,
}

impl NewtonCtx<'_> {
    fn merit(&self, u: &Field, eps: f64) -> f64 {
        self.op.energy_eps(u, eps) - space::pairing(self.f, u).expect("same grid")
    }

    fn budget_left(&self) -> usize {
        self.cfg.max_iters.saturating_sub(self.iterations)
    }

    /// Damped Newton on the eps-regularized merit. When `exact_gradient` is
    /// set, the gradient and merit are the unregularized ones and `eps` only
    /// floors the Hessian. Returns true when the stage tolerance was met.
    fn run_stage(
        &mut self,
        u: &mut Field,
        eps: f64,
        stage: usize,
        stage_tol: f64,
        max_iters: usize,
        exact_gradient: bool,
    ) -> Result<bool> {
        let grad_eps = if exact_gradient { 0.0 } else { eps };
        for _ in 0..max_iters.min(self.budget_left()) {
            let au = self.op.apply_a_eps(u, grad_eps)?;
            let g: Vec<f64> = au
                .coeffs()
                .iter()
                .zip(self.f.coeffs())
                .map(|(a, b)| a - b)
                .collect();
            let gnorm = linalg::linf(&g);
            if gnorm <= stage_tol {
                return Ok(true);
            }
            let du = newton_direction(self.op, u, eps, &g)?;
            let dir_grad: f64 = -linalg::dot(&g, &du);
            if !dir_grad.is_finite() || dir_grad >= 0.0 {
                // not a descent direction; numerically at the bottom
                return Ok(gnorm <= stage_tol);
            }
            let m0 = self.merit(u, grad_eps);
            // Once the predicted decrease drops below the merit's rounding
            // resolution, Armijo on the merit only accepts by accident and the
            // iteration crawls. Switch to sufficient decrease of the gradient
            // norm: in that regime the floored Hessian is accurate and the
            // full Newton step contracts the residual.
            let grad_search = dir_grad.abs() <= 64.0 * f64::EPSILON * m0.abs().max(1.0);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let mut cand = u.clone();
                for (c, d) in cand.values_mut().iter_mut().zip(&du) {
                    *c -= t * d;
                }
                let ok = if grad_search {
                    let ca = self.op.apply_a_eps(&cand, grad_eps)?;
                    let cg: f64 = ca
                        .coeffs()
                        .iter()
                        .zip(self.f.coeffs())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    cg.is_finite() && cg <= (1.0 - self.cfg.armijo_c * t) * gnorm
                } else {
                    let mt = self.merit(&cand, grad_eps);
                    mt.is_finite() && mt <= m0 + self.cfg.armijo_c * t * dir_grad
                };
                if ok {
                    *u = cand;
                    accepted = true;
                    break;
                }
                t *= self.cfg.backtrack;
            }
            self.iterations += 1;
            if self.cfg.debug_trace {
                self.trace.push(InnerTraceRow {
                    stage,
                    eps,
                    merit: self.merit(u, grad_eps),
                    grad_inf: gnorm,
                    step_len: if accepted { t } else { 0.0 },
                });
            }
            if !accepted {
                // merit is flat to rounding; treat as converged at this eps
                return Ok(gnorm <= stage_tol);
            }
        }
        Ok(false)
    }
}

/// Solves `A(u) = f` to `cfg.tol * max(1, ||f||_inf)` in the max norm.
///
/// `warm` seeds the Newton path (the outer iteration passes the previous
/// scaled eigenfunction); without it the initial iterate is the p = 2
/// solution rescaled to the homogeneity-optimal multiple of itself.
pub fn solve_inner(
    op: &OperatorPair,
    f: &DualVector,
    warm: Option<&Field>,
    cfg: &InnerConfig,
) -> Result<InnerOutcome> {
    cfg.validate()?;
    let grid = op.grid();
    if f.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let p = op.exponents().p;
    let fnorm = f.linf();
    let tol_abs = cfg.tol * fnorm.max(1.0);

    if fnorm == 0.0 {
        return Ok(InnerOutcome {
            u: Field::zeros(grid),
            iterations: 0,
            residual: 0.0,
            status: InnerStatus::Converged,
            trace: Vec::new(),
        });
    }

    if p == 2.0 && !cfg.force_newton {
        let zero = Field::zeros(grid);
        let factor = factor_hessian(op, &zero, 0.0)?;
        let mut u = Field::new(grid, factor.solve(f.coeffs()))?;
        let mut iterations = 1;
        let mut residual = dual_residual(op, &u, f)?;
        if cfg.refine_p2 && residual > tol_abs {
            let au = op.apply_a(&u)?;
            let r: Vec<f64> = f
                .coeffs()
                .iter()
                .zip(au.coeffs())
                .map(|(a, b)| a - b)
                .collect();
            let du = factor.solve(&r);
            for (x, d) in u.values_mut().iter_mut().zip(&du) {
                *x += d;
            }
            iterations += 1;
            residual = dual_residual(op, &u, f)?;
        }
        let status = if residual <= tol_abs {
            InnerStatus::Converged
        } else {
            InnerStatus::MaxIterations
        };
        return Ok(InnerOutcome {
            u,
            iterations,
            residual,
            status,
            trace: Vec::new(),
        });
    }

    // Nonlinear path. Initial iterate: warm start if provided, otherwise the
    // p = 2 solution of the same data, scaled so that t * u2 minimizes the
    // energy along its own ray.
    let mut u = match warm {
        Some(w) if w.linf() > 0.0 => {
            if w.grid() != grid {
                return Err(Error::GridMismatch);
            }
            w.clone()
        }
        _ => {
            let mut e2 = Exponents::new(2.0, 1.0);
            e2.s = op.exponents().s;
            let op2 = OperatorPair::with_truncation(
                grid,
                e2,
                op.truncation_radius().unwrap_or(1.0),
            )?;
            let zero = Field::zeros(grid);
            let u2 = Field::new(grid, factor_hessian(&op2, &zero, 0.0)?.solve(f.coeffs()))?;
            let fu = space::pairing(f, &u2)?;
            let xp = op.x_norm_pow(&u2)?;
            let t = if fu > 0.0 && xp > 0.0 {
                (fu / xp).powf(1.0 / (p - 1.0))
            } else {
                1.0
            };
            u2.scaled(t)
        }
    };

    let mut ctx = NewtonCtx {
        op,
        f,
        cfg,
        trace: Vec::new(),
        iterations: 0,
    };

    let mut residual = dual_residual(op, &u, f)?;
    if residual <= tol_abs {
        return Ok(InnerOutcome {
            u,
            iterations: 0,
            residual,
            status: InnerStatus::Converged,
            trace: ctx.trace,
        });
    }

    // Warm iterates are usually already in the Newton basin: try the exact
    // polish first and only fall back to annealing if it stalls.
    if warm.is_some() {
        let budget = ctx.budget_left();
        let done = ctx.run_stage(&mut u, cfg.eps_min, 0, tol_abs, budget, true)?;
        residual = dual_residual(op, &u, f)?;
        if done || residual <= tol_abs {
            return Ok(InnerOutcome {
                u,
                iterations: ctx.iterations,
                residual,
                status: InnerStatus::Converged,
                trace: ctx.trace,
            });
        }
    }

    let scale = max_gradient_scale(op, &u).max(1.0);
    let stage_tol = tol_abs.max(1e-4 * fnorm.max(1.0));
    let mut eps = scale;
    let mut stage = 1;
    while eps > cfg.eps_min && stage < 64 {
        ctx.run_stage(&mut u, eps, stage, stage_tol, 40, false)?;
        eps *= cfg.eps_decay;
        stage += 1;
    }
    ctx.run_stage(&mut u, cfg.eps_min, stage, stage_tol, 40, false)?;
    let budget = ctx.budget_left();
    ctx.run_stage(&mut u, cfg.eps_min, stage + 1, tol_abs, budget, true)?;

    residual = dual_residual(op, &u, f)?;
    let status = if residual <= tol_abs {
        InnerStatus::Converged
    } else {
        InnerStatus::MaxIterations
    };
    Ok(InnerOutcome {
        u,
        iterations: ctx.iterations,
        residual,
        status,
        trace: ctx.trace,
    })
}
