//! Forward operators, their Fréchet derivatives and explicit inverses:
//!
//! * transmissivity: `u(x) = ∫₀ˣ (∫₀ᶻ f + c₀)/a(z) dz + c₁`
//! * Euler–Bernoulli beam: `u(x) = ∫₀ˣ∫₀ʸ (∫₀ˢ∫₀ʷ f + c₃ s + c₂)/a(s) ds dy + c₁ x + c₀`
//! * Volterra–Hammerstein: `v(t) = ∫₀ᵗ u(s)² ds`
//! * linear gravimetry: `U(y) = ∫_E ρ(x) ln|x − y| dx` for piecewise constant `ρ`
//!
//! One-dimensional integrals use composite Simpson on a grid whose segment
//! boundaries include every sample point and every kink of the inputs;
//! nested integrals are accumulated outward on that grid.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::error::{param, Error, Result};
use crate::quadrature::{QuadratureSpec, Rule, SimpsonGrid, TensorGauss};

/// A real function on `[0, 1]` with the points where it fails to be smooth.
#[derive(Clone)]
pub struct FunctionHandle {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    kinks: Vec<f64>,
    description: String,
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("description", &self.description)
            .field("kinks", &self.kinks)
            .finish_non_exhaustive()
    }
}

impl FunctionHandle {
    /// Wraps an evaluator, spot-checking finiteness at 16 points of `[0, 1]`.
    pub fn new(
        description: impl Into<String>,
        kinks: Vec<f64>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let description = description.into();
        for i in 0..16 {
            let x = i as f64 / 15.0;
            if !eval(x).is_finite() {
                return Err(Error::Domain(format!("{description} is not finite at x = {x}")));
            }
        }
        Ok(Self { eval: Arc::new(eval), kinks, description })
    }

    pub fn constant(c: f64) -> Self {
        Self { eval: Arc::new(move |_| c), kinks: Vec::new(), description: format!("constant {c}") }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// `offset + Σ c_i g_i`.
    pub fn combination(terms: &[(f64, &FunctionHandle)], offset: f64) -> Result<Self> {
        let parts: Vec<(f64, FunctionHandle)> = terms.iter().map(|(c, g)| (*c, (*g).clone())).collect();
        let mut kinks: Vec<f64> = parts.iter().flat_map(|(_, g)| g.kinks.iter().copied()).collect();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        let desc = format!("combination of {} functions", parts.len());
        Self::new(desc, kinks, move |x| offset + parts.iter().map(|(c, g)| c * g.eval(x)).sum::<f64>())
    }
}

fn simpson_nodes(quad: &QuadratureSpec) -> Result<usize> {
    quad.validate()?;
    if quad.rule != Rule::CompositeSimpson {
        return Err(param("one-dimensional operators need a composite Simpson rule"));
    }
    Ok(quad.nodes)
}

fn check_points(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(param("no evaluation points"));
    }
    for &x in xs {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("evaluation point {x} outside [0, 1]")));
        }
    }
    Ok(xs.iter().copied().fold(0.0, f64::max))
}

struct Setup {
    grid: SimpsonGrid,
    idx: Vec<usize>,
}

fn setup(xs: &[f64], handles: &[&FunctionHandle], quad: &QuadratureSpec) -> Result<Setup> {
    let nodes = simpson_nodes(quad)?;
    let upper = check_points(xs)?;
    let mut cuts: Vec<f64> = xs.to_vec();
    for h in handles {
        cuts.extend_from_slice(h.kinks());
    }
    let grid = SimpsonGrid::new(upper, &cuts, nodes)?;
    let idx = xs
        .iter()
        .map(|&x| grid.index_of(x).ok_or_else(|| param(format!("grid misses sample point {x}"))))
        .collect::<Result<_>>()?;
    Ok(Setup { grid, idx })
}

fn positive_values(a: &FunctionHandle, grid: &SimpsonGrid) -> Result<Vec<f64>> {
    grid.x
        .iter()
        .map(|&x| {
            let v = a.eval(x);
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Domain(format!("coefficient {} is {v} <= 0 at x = {x}", a.description())))
            }
        })
        .collect()
}

fn values(g: &FunctionHandle, grid: &SimpsonGrid) -> Vec<f64> {
    grid.x.iter().map(|&x| g.eval(x)).collect()
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Transmissivity forward map at every point of `xs` (points in `[0, 1]`).
pub fn transmissivity_profile(
    a: &FunctionHandle,
    f: &FunctionHandle,
    c0: f64,
    c1: f64,
    xs: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let s = setup(xs, &[a, f], quad)?;
    let av = positive_values(a, &s.grid)?;
    let inner = s.grid.cumulative(&values(f, &s.grid));
    let g: Vec<f64> = inner.iter().zip(&av).map(|(i, a)| (i + c0) / a).collect();
    let u = s.grid.cumulative(&g);
    Ok(pick(&u, &s.idx).into_iter().map(|v| v + c1).collect())
}

pub fn transmissivity_forward(
    a: &FunctionHandle,
    f: &FunctionHandle,
    c0: f64,
    c1: f64,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(transmissivity_profile(a, f, c0, c1, &[x], quad)?[0])
}

/// `F′_a(δa)(x) = −∫₀ˣ δa(z)(∫₀ᶻ f + c₀)/a(z)² dz`.
pub fn transmissivity_frechet_profile(
    a: &FunctionHandle,
    f: &FunctionHandle,
    c0: f64,
    da: &FunctionHandle,
    xs: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let s = setup(xs, &[a, f, da], quad)?;
    let av = positive_values(a, &s.grid)?;
    let inner = s.grid.cumulative(&values(f, &s.grid));
    let dv = values(da, &s.grid);
    let g: Vec<f64> = (0..av.len()).map(|i| -dv[i] * (inner[i] + c0) / (av[i] * av[i])).collect();
    Ok(pick(&s.grid.cumulative(&g), &s.idx))
}

pub fn transmissivity_frechet(
    a: &FunctionHandle,
    f: &FunctionHandle,
    da: &FunctionHandle,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(transmissivity_frechet_profile(a, f, 0.0, da, &[x], quad)?[0])
}

/// Boundary constants `[c₀, c₁, c₂, c₃]` of the beam problem. Defaults to zero.
pub type BeamConstants = [f64; 4];

pub fn eb_profile(
    a: &FunctionHandle,
    f: &FunctionHandle,
    c: &BeamConstants,
    xs: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let s = setup(xs, &[a, f], quad)?;
    let av = positive_values(a, &s.grid)?;
    let i1 = s.grid.cumulative(&values(f, &s.grid));
    let i2 = s.grid.cumulative(&i1);
    let g: Vec<f64> = (0..av.len()).map(|i| (i2[i] + c[3] * s.grid.x[i] + c[2]) / av[i]).collect();
    let g1 = s.grid.cumulative(&g);
    let g2 = s.grid.cumulative(&g1);
    Ok(xs.iter().zip(&s.idx).map(|(&x, &i)| g2[i] + c[1] * x + c[0]).collect())
}

pub fn eb_forward(
    a: &FunctionHandle,
    f: &FunctionHandle,
    c: &BeamConstants,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(eb_profile(a, f, c, &[x], quad)?[0])
}

/// `F′(a)(δa)(x) = −∫₀ˣ∫₀ʸ δa(s)(∫₀ˢ∫₀ʷ f + c₃ s + c₂)/a(s)² ds dy`.
pub fn eb_frechet_profile(
    a: &FunctionHandle,
    f: &FunctionHandle,
    c: &BeamConstants,
    da: &FunctionHandle,
    xs: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let s = setup(xs, &[a, f, da], quad)?;
    let av = positive_values(a, &s.grid)?;
    let i1 = s.grid.cumulative(&values(f, &s.grid));
    let i2 = s.grid.cumulative(&i1);
    let dv = values(da, &s.grid);
    let g: Vec<f64> = (0..av.len())
        .map(|i| -dv[i] * (i2[i] + c[3] * s.grid.x[i] + c[2]) / (av[i] * av[i]))
        .collect();
    let g1 = s.grid.cumulative(&g);
    Ok(pick(&s.grid.cumulative(&g1), &s.idx))
}

pub fn eb_frechet(
    a: &FunctionHandle,
    f: &FunctionHandle,
    da: &FunctionHandle,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(eb_frechet_profile(a, f, &[0.0; 4], da, &[x], quad)?[0])
}

pub fn volterra_profile(u: &FunctionHandle, ts: &[f64], quad: &QuadratureSpec) -> Result<Vec<f64>> {
    let s = setup(ts, &[u], quad)?;
    let sq: Vec<f64> = values(u, &s.grid).iter().map(|v| v * v).collect();
    Ok(pick(&s.grid.cumulative(&sq), &s.idx))
}

pub fn volterra_forward(u: &FunctionHandle, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(volterra_profile(u, &[t], quad)?[0])
}

/// `F′_u(δu)(t) = 2 ∫₀ᵗ u δu ds`.
pub fn volterra_frechet_profile(
    u: &FunctionHandle,
    du: &FunctionHandle,
    ts: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let s = setup(ts, &[u, du], quad)?;
    let uv = values(u, &s.grid);
    let dv = values(du, &s.grid);
    let g: Vec<f64> = uv.iter().zip(&dv).map(|(a, b)| 2.0 * a * b).collect();
    Ok(pick(&s.grid.cumulative(&g), &s.idx))
}

pub fn volterra_frechet(u: &FunctionHandle, du: &FunctionHandle, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(volterra_frechet_profile(u, du, &[t], quad)?[0])
}

fn uniform_spacing(n: usize, need: usize) -> Result<f64> {
    if n < need {
        return Err(param(format!("need at least {need} samples, got {n}")));
    }
    Ok(1.0 / (n - 1) as f64)
}

/// Sample points `x_j = j/(n−1)` strictly inside `[0, 1]` used by the
/// inverses that drop `skip` boundary points at each end.
pub fn interior_points(n: usize, skip: usize) -> Vec<f64> {
    (skip..n.saturating_sub(skip)).map(|j| j as f64 / (n - 1) as f64).collect()
}

/// `a(x) = (∫₀ˣ f + c₀)/u′(x)` at the interior points `x_1 … x_{n−2}` of the
/// uniform grid on which `u` is sampled, with central differences for `u′`.
pub fn transmissivity_inverse(u: &[f64], f: &FunctionHandle, c0: f64) -> Result<Vec<f64>> {
    let h = uniform_spacing(u.len(), 3)?;
    let xs = interior_points(u.len(), 1);
    let fint = running_integral(f, &xs)?;
    (1..u.len() - 1)
        .map(|j| {
            let du = (u[j + 1] - u[j - 1]) / (2.0 * h);
            if !(du > 0.0) {
                return Err(Error::IllPosed(format!("u' estimate {du} <= 0 at x = {}", xs[j - 1])));
            }
            Ok((fint[j - 1] + c0) / du)
        })
        .collect()
}

/// `a(x) = (∫₀ˣ∫₀ᵗ f + c₃ x + c₂)/u″(x)` at `x_2 … x_{n−3}`, with the
/// fourth-order five-point stencil for `u″`.
pub fn eb_inverse(u: &[f64], f: &FunctionHandle, c2: f64, c3: f64) -> Result<Vec<f64>> {
    let h = uniform_spacing(u.len(), 5)?;
    let xs = interior_points(u.len(), 2);
    let ff = double_integral(f, &xs)?;
    (2..u.len() - 2)
        .map(|j| {
            let d2 = (-u[j + 2] + 16.0 * u[j + 1] - 30.0 * u[j] + 16.0 * u[j - 1] - u[j - 2]) / (12.0 * h * h);
            if !(d2 > 0.0) {
                return Err(Error::IllPosed(format!("u'' estimate {d2} <= 0 at x = {}", xs[j - 2])));
            }
            Ok((ff[j - 2] + c3 * xs[j - 2] + c2) / d2)
        })
        .collect()
}

/// Positive branch `u = √(v′)` at the interior points, central differences.
pub fn volterra_inverse(v: &[f64]) -> Result<Vec<f64>> {
    let h = uniform_spacing(v.len(), 3)?;
    (1..v.len() - 1)
        .map(|j| {
            let dv = (v[j + 1] - v[j - 1]) / (2.0 * h);
            if !(dv > 0.0) {
                return Err(Error::IllPosed(format!("v' estimate {dv} <= 0 at sample {j}")));
            }
            Ok(dv.sqrt())
        })
        .collect()
}

fn running_integral(f: &FunctionHandle, xs: &[f64]) -> Result<Vec<f64>> {
    let s = setup(xs, &[f], &QuadratureSpec::default_simpson())?;
    Ok(pick(&s.grid.cumulative(&values(f, &s.grid)), &s.idx))
}

fn double_integral(f: &FunctionHandle, xs: &[f64]) -> Result<Vec<f64>> {
    let s = setup(xs, &[f], &QuadratureSpec::default_simpson())?;
    let i1 = s.grid.cumulative(&values(f, &s.grid));
    Ok(pick(&s.grid.cumulative(&i1), &s.idx))
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let dx = (self.x0 - p[0]).max(p[0] - self.x1).max(0.0);
        let dy = (self.y0 - p[1]).max(p[1] - self.y1).max(0.0);
        dx.hypot(dy)
    }
}

/// Four density cells inside `[−1, 1]²` and the square's boundary, walked
/// counterclockwise from `(−1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GravGeometry {
    pub cells: [Rect; 4],
}

impl Default for GravGeometry {
    fn default() -> Self {
        let r = |x0, x1, y0, y1| Rect { x0, x1, y0, y1 };
        Self {
            cells: [
                r(-0.5, 0.0, 0.0, 0.5),
                r(0.0, 0.5, 0.0, 0.5),
                r(-0.5, 0.0, -0.5, 0.0),
                r(0.0, 0.5, -0.5, 0.0),
            ],
        }
    }
}

impl GravGeometry {
    /// `4D` points with arc spacing `2/D`, starting at `(−1, 1)` and going
    /// down the left edge first.
    pub fn boundary_points(&self, d: usize) -> Result<Vec<[f64; 2]>> {
        if d == 0 {
            return Err(param("D must be >= 1"));
        }
        Ok((0..4 * d)
            .map(|j| {
                let edge = j / d;
                let r = 2.0 * (j - edge * d) as f64 / d as f64;
                match edge {
                    0 => [-1.0, 1.0 - r],
                    1 => [-1.0 + r, -1.0],
                    2 => [1.0, -1.0 + r],
                    _ => [1.0 - r, 1.0],
                }
            })
            .collect())
    }

    pub fn min_separation(&self, p: [f64; 2]) -> f64 {
        self.cells.iter().map(|c| c.distance(p)).fold(f64::INFINITY, f64::min)
    }
}

/// `∫_cell ln|x − y| dx` for each cell.
pub fn grav_cell_potentials(y: [f64; 2], geom: &GravGeometry, quad: &QuadratureSpec) -> Result<[f64; 4]> {
    quad.validate()?;
    if quad.rule != Rule::GaussLegendreTensor {
        return Err(param("gravimetric integrals need a tensor Gauss-Legendre rule"));
    }
    if geom.min_separation(y) <= 1e-12 {
        return Err(Error::Geometry(format!("point ({}, {}) touches a density cell", y[0], y[1])));
    }
    let rule = TensorGauss::new(quad.nodes)?;
    let mut out = [0.0; 4];
    for (o, c) in out.iter_mut().zip(&geom.cells) {
        *o = rule.integrate_rect((c.x0, c.x1), (c.y0, c.y1), |s, t| 0.5 * ((s - y[0]).powi(2) + (t - y[1]).powi(2)).ln());
    }
    Ok(out)
}

/// Logarithmic potential of the density `Σ α_k 1_{cell_k}` at `y`.
pub fn grav_forward(alpha: &[f64], y: [f64; 2], geom: &GravGeometry, quad: &QuadratureSpec) -> Result<f64> {
    if alpha.len() != 4 {
        return Err(Error::Shape(format!("density needs 4 coefficients, got {}", alpha.len())));
    }
    let cells = grav_cell_potentials(y, geom, quad)?;
    Ok(alpha.iter().zip(cells).map(|(a, c)| a * c).sum())
}

/// `4D × 4` matrix whose column `k` samples the potential of cell `k` at the
/// boundary points.
pub fn grav_matrix(d: usize, geom: &GravGeometry, quad: &QuadratureSpec) -> Result<Array2<f64>> {
    let pts = geom.boundary_points(d)?;
    let mut m = Array2::zeros((pts.len(), 4));
    for (i, p) in pts.iter().enumerate() {
        let row = grav_cell_potentials(*p, geom, quad)?;
        for k in 0..4 {
            m[[i, k]] = row[k];
        }
    }
    Ok(m)
}

/// Least-squares coefficients via the normal equations `AᵀA α = Aᵀ b`.
pub fn grav_lsq_inverse(measurements: &[f64], matrix: &Array2<f64>) -> Result<Vec<f64>> {
    let (rows, cols) = matrix.dim();
    if measurements.len() != rows {
        return Err(Error::Shape(format!("{} measurements for a {rows}-row matrix", measurements.len())));
    }
    let a = DMatrix::from_fn(rows, cols, |i, j| matrix[[i, j]]);
    let b = DVector::from_column_slice(measurements);
    let ata = a.transpose() * &a;
    let eig = ata.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    if !(lo > hi * 1e-13) {
        return Err(Error::RankDeficient(format!("normal matrix eigenvalues span [{lo:e}, {hi:e}]")));
    }
    let chol = ata
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("normal matrix is not positive definite".into()))?;
    Ok(chol.solve(&(a.transpose() * b)).iter().copied().collect())
}
