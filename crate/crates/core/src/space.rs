//! Grids, nodal fields, dual vectors and the discrete X/Y norms.
//!
//! Everything downstream (operators, inner solver, iteration engine) works in
//! terms of these types. A [`Field`] holds nodal values of a function on a
//! uniform grid over the unit interval or unit square; a [`DualVector`] holds
//! quadrature-weighted functional coefficients so that applying a functional
//! is a plain dot product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which eigenproblem a grid (and everything built on it) belongs to.
///
/// The kind fixes the boundary convention: Dirichlet and fractional fields
/// are zero-extended outside the interior nodes, Steklov fields carry their
/// boundary values explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    #[serde(rename = "dirichlet-1d")]
    Dirichlet1d,
    #[serde(rename = "dirichlet-2d")]
    Dirichlet2d,
    #[serde(rename = "fractional-1d")]
    Fractional1d,
    #[serde(rename = "steklov-1d")]
    Steklov1d,
}

impl ProblemKind {
    pub fn dimension(self) -> usize {
        match self {
            ProblemKind::Dirichlet2d => 2,
            _ => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ProblemKind::Dirichlet1d => "dirichlet-1d",
            ProblemKind::Dirichlet2d => "dirichlet-2d",
            ProblemKind::Fractional1d => "fractional-1d",
            ProblemKind::Steklov1d => "steklov-1d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dirichlet-1d" => Ok(ProblemKind::Dirichlet1d),
            "dirichlet-2d" => Ok(ProblemKind::Dirichlet2d),
            "fractional-1d" => Ok(ProblemKind::Fractional1d),
            "steklov-1d" => Ok(ProblemKind::Steklov1d),
            _ => Err(Error::UnsupportedKind("unknown problem kind string")),
        }
    }
}

/// Uniform grid on the unit interval or unit square with spacing `h = 1/M`.
///
/// Dirichlet and fractional grids carry the `(M-1)^N` interior nodes only;
/// the 1D Steklov grid carries all `M+1` nodes including the two boundary
/// nodes. `h` is always derived from `M`, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub m: usize,
    pub kind: ProblemKind,
}

/// Builds a grid, validating dimension and resolution against the kind.
pub fn build_grid(dim: usize, m: usize, kind: ProblemKind) -> Result<GridSpec> {
    if m < 2 {
        return Err(Error::TooCoarse(m));
    }
    if dim != 1 && dim != 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if dim != kind.dimension() {
        return Err(Error::UnsupportedDimension(dim));
    }
    Ok(GridSpec { dim, m, kind })
}

impl GridSpec {
    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// h^N, the cell measure used by the rectangle rule.
    pub fn cell_measure(&self) -> f64 {
        let h = self.h();
        if self.dim == 2 {
            h * h
        } else {
            h
        }
    }

    pub fn node_count(&self) -> usize {
        match self.kind {
            ProblemKind::Dirichlet1d | ProblemKind::Fractional1d => self.m - 1,
            ProblemKind::Dirichlet2d => (self.m - 1) * (self.m - 1),
            ProblemKind::Steklov1d => self.m + 1,
        }
    }

    /// Coordinates of stored node `idx` (second component is 0 in 1D).
    ///
    /// 2D nodes are ordered lexicographically, x fastest:
    /// `idx = (iy-1)*(M-1) + (ix-1)` for interior `(ix, iy)`.
    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        match self.kind {
            ProblemKind::Dirichlet1d | ProblemKind::Fractional1d => {
                [(idx as f64 + 1.0) * h, 0.0]
            }
            ProblemKind::Steklov1d => [idx as f64 * h, 0.0],
            ProblemKind::Dirichlet2d => {
                let w = self.m - 1;
                let ix = idx % w + 1;
                let iy = idx / w + 1;
                [ix as f64 * h, iy as f64 * h]
            }
        }
    }
}

/// Nodal values of a function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("field value"));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * t).collect(),
        }
    }

    /// self - other, elementwise.
    pub fn minus(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Quadrature-weighted functional coefficients: `pairing(g, v) = sum_i g_i v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    grid: GridSpec,
    coeffs: Vec<f64>,
}

impl DualVector {
    pub fn new(grid: GridSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        if !coeffs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dual coefficient"));
        }
        Ok(DualVector { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        DualVector {
            grid,
            coeffs: vec![0.0; grid.node_count()],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn linf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, t: f64) -> DualVector {
        DualVector {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|v| v * t).collect(),
        }
    }

    pub fn minus(&self, other: &DualVector) -> Result<DualVector> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(DualVector {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// The exponent triple `(p, q, s)` together with the validity checks against
/// the critical exponents of each problem kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Self {
        Exponents { p, q, s: None }
    }

    pub fn fractional(p: f64, q: f64, s: f64) -> Self {
        Exponents { p, q, s: Some(s) }
    }

    /// Sobolev critical exponent p* = Np/(N-p) for p < N, else infinity.
    pub fn p_star(p: f64, n: usize) -> f64 {
        let n = n as f64;
        if p < n {
            n * p / (n - p)
        } else {
            f64::INFINITY
        }
    }

    /// Fractional critical exponent p_s* = Np/(N-ps) for sp < N, else infinity.
    pub fn p_s_star(p: f64, s: f64, n: usize) -> f64 {
        let n = n as f64;
        if s * p < n {
            n * p / (n - s * p)
        } else {
            f64::INFINITY
        }
    }

    /// Trace critical exponent p_* = p(N-1)/(N-p) for p < N, else infinity.
    pub fn p_trace_star(p: f64, n: usize) -> f64 {
        let n = n as f64;
        if p < n {
            p * (n - 1.0) / (n - p)
        } else {
            f64::INFINITY
        }
    }

    /// Validates `p > 1`, `q >= 1`, `s` presence/range, and `q` against the
    /// critical exponent of the given kind.
    pub fn validate(&self, kind: ProblemKind) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidExponent(format!("p = {} must be > 1", self.p)));
        }
        if !(self.q >= 1.0) || !self.q.is_finite() {
            return Err(Error::InvalidExponent(format!("q = {} must be >= 1", self.q)));
        }
        let n = kind.dimension();
        match kind {
            ProblemKind::Dirichlet1d | ProblemKind::Dirichlet2d => {
                let pc = Self::p_star(self.p, n);
                if self.q >= pc {
                    return Err(Error::InvalidExponent(format!(
                        "q = {} violates q < p* = {} (p = {}, N = {})",
                        self.q, pc, self.p, n
                    )));
                }
            }
            ProblemKind::Fractional1d => {
                let s = self.s.ok_or_else(|| {
                    Error::InvalidExponent("fractional kind requires s".into())
                })?;
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::InvalidExponent(format!(
                        "s = {} must lie in (0, 1)",
                        s
                    )));
                }
                let pc = Self::p_s_star(self.p, s, n);
                if self.q >= pc {
                    return Err(Error::InvalidExponent(format!(
                        "q = {} violates q < p_s* = {} (p = {}, s = {}, N = {})",
                        self.q, pc, self.p, s, n
                    )));
                }
            }
            ProblemKind::Steklov1d => {
                let pc = Self::p_trace_star(self.p, n);
                if self.q >= pc {
                    return Err(Error::InvalidExponent(format!(
                        "q = {} violates q < p_* = {} (p = {}, N = {})",
                        self.q, pc, self.p, n
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Discrete L^q norm of a field: rectangle rule over interior nodes for
/// Dirichlet/fractional, the two boundary values for Steklov.
pub fn y_norm(w: &Field, q: f64) -> f64 {
    let g = w.grid();
    match g.kind {
        ProblemKind::Steklov1d => {
            let v = w.values();
            let a = v[0].abs();
            let b = v[g.m].abs();
            (a.powf(q) + b.powf(q)).powf(1.0 / q)
        }
        _ => {
            let hn = g.cell_measure();
            let sum: f64 = w.values().iter().map(|v| hn * v.abs().powf(q)).sum();
            sum.powf(1.0 / q)
        }
    }
}

/// `sum_i h^N |w_i|^q` (no final root); exact partner of `apply_b` so that
/// `pairing(B(w), w) = y_norm(w, q)^q` holds to rounding.
pub fn y_norm_pow(w: &Field, q: f64) -> f64 {
    let g = w.grid();
    match g.kind {
        ProblemKind::Steklov1d => {
            let v = w.values();
            v[0].abs().powf(q) + v[g.m].abs().powf(q)
        }
        _ => {
            let hn = g.cell_measure();
            w.values().iter().map(|v| hn * v.abs().powf(q)).sum()
        }
    }
}

/// Forward-difference gradient seminorm `(sum_cells h^N |Du|^p)^{1/p}` raised
/// to the p-th power. Dirichlet cells see the zero extension; Steklov cells
/// stop at the boundary nodes.
fn grad_pow(u: &Field, p: f64) -> f64 {
    let g = u.grid();
    let h = g.h();
    let m = g.m;
    let v = u.values();
    match g.kind {
        ProblemKind::Dirichlet1d | ProblemKind::Fractional1d => {
            let at = |i: usize| -> f64 {
                if i == 0 || i == m {
                    0.0
                } else {
                    v[i - 1]
                }
            };
            let mut sum = 0.0;
            for c in 0..m {
                let d = (at(c + 1) - at(c)) / h;
                sum += h * d.abs().powf(p);
            }
            sum
        }
        ProblemKind::Steklov1d => {
            let mut sum = 0.0;
            for c in 0..m {
                let d = (v[c + 1] - v[c]) / h;
                sum += h * d.abs().powf(p);
            }
            sum
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
            let mut sum = 0.0;
            for cy in 0..m {
                for cx in 0..m {
                    let a = at(cx, cy);
                    let dx = (at(cx + 1, cy) - a) / h;
                    let dy = (at(cx, cy + 1) - a) / h;
                    let r2 = dx * dx + dy * dy;
                    sum += h * h * r2.powf(p / 2.0);
                }
            }
            sum
        }
    }
}

/// `x_norm(u, p)^p` for the local (non-fractional) kinds.
///
/// The fractional seminorm needs the kernel context of an
/// [`crate::operators::OperatorPair`]; use `OperatorPair::x_norm_pow` there.
pub fn x_norm_pow(u: &Field, p: f64, kind: ProblemKind) -> Result<f64> {
    let g = u.grid();
    if g.kind != kind {
        return Err(Error::KindMismatch {
            expected: kind,
            found: g.kind,
        });
    }
    match kind {
        ProblemKind::Fractional1d => Err(Error::UnsupportedKind(
            "fractional x-norm requires an operator pair (kernel table)",
        )),
        ProblemKind::Steklov1d => {
            // W^{1,p} norm: gradient part plus trapezoid-rule L^p part.
            let h = g.h();
            let v = u.values();
            let mut mass = 0.0;
            for (i, val) in v.iter().enumerate() {
                let theta = if i == 0 || i == g.m { 0.5 } else { 1.0 };
                mass += h * theta * val.abs().powf(p);
            }
            Ok(grad_pow(u, p) + mass)
        }
        _ => Ok(grad_pow(u, p)),
    }
}

/// X-norm of a field (`x_norm_pow` to the 1/p).
pub fn x_norm(u: &Field, p: f64, kind: ProblemKind) -> Result<f64> {
    Ok(x_norm_pow(u, p, kind)?.powf(1.0 / p))
}

/// Duality pairing `<g, v> = sum_i g_i v_i`.
pub fn pairing(g: &DualVector, v: &Field) -> Result<f64> {
    if g.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(g.coeffs().iter().zip(v.values()).map(|(a, b)| a * b).sum())
}

/// Scales a field onto the Y-unit sphere. Returns `(w, t)` with
/// `w = u / t` and `t = y_norm(u, q)`.
pub fn normalize_y(u: &Field, q: f64) -> Result<(Field, f64)> {
    let t = y_norm(u, q);
    if t == 0.0 || !t.is_finite() {
        return Err(Error::ZeroField("cannot Y-normalize"));
    }
    Ok((u.scaled(1.0 / t), t))
}

// ---------------------------------------------------------------------------
// CSV serialization of fields: one row per node, (index..., coordinate...,
// value), with a header line.
// ---------------------------------------------------------------------------

pub fn write_field_csv<W: std::io::Write>(out: &mut W, f: &Field) -> std::io::Result<()> {
    let g = f.grid();
    if g.dim == 2 {
        writeln!(out, "ix,iy,x,y,value")?;
        let w = g.m - 1;
        for (idx, v) in f.values().iter().enumerate() {
            let [x, y] = g.coord(idx);
            let ix = idx % w + 1;
            let iy = idx / w + 1;
            writeln!(out, "{},{},{},{},{}", ix, iy, x, y, v)?;
        }
    } else {
        writeln!(out, "i,x,value")?;
        for (idx, v) in f.values().iter().enumerate() {
            let [x, _] = g.coord(idx);
            writeln!(out, "{},{},{}", idx, x, v)?;
        }
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; the node count must match
/// the grid.
pub fn read_field_csv(text: &str, grid: GridSpec) -> Result<Field> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let last = line
            .rsplit(',')
            .next()
            .ok_or(Error::NonFinite("malformed field CSV row"))?;
        let v: f64 = last
            .trim()
            .parse()
            .map_err(|_| Error::NonFinite("unparseable field CSV value"))?;
        values.push(v);
    }
    Field::new(grid, values)
}
