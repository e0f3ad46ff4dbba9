//! Constructive ReLU approximators built from the network calculus:
//! squaring and multiplication, exact min/max and piecewise-linear nets,
//! tensor-product partitions of unity, Lipschitz interpolation on cubes, the
//! chart-wise manifold assembly and its noise-robustness statistics.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{param, Error, Result};
use crate::network::{
    concat, full_parallelize, full_parallelize_all, identity_net, parallelize_all, LayerWeights,
    Network,
};
use crate::rng::stream_rng;
use crate::sparse::SparseMatrix;

pub type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type Sampler = Arc<dyn Fn(usize) -> Vec<Vec<f64>> + Send + Sync>;

fn dense_layer(rows: &[Vec<f64>], bias: Vec<f64>, ncols: usize) -> Result<LayerWeights> {
    let trip = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)));
    LayerWeights::new(SparseMatrix::from_triplets(rows.len(), ncols, trip), bias)
}

/// Number of sawtooth levels so that `K² 2^{-2m-2} ≤ eps`.
fn sawtooth_levels(eps: f64, k: f64) -> usize {
    let m = ((k * k / eps).log2() - 2.0) / 2.0;
    (m.ceil().max(1.0)) as usize
}

/// Sawtooth squaring on `[-k, k]` without the public range checks.
fn square_core(eps: f64, k: f64) -> Result<Network> {
    let m = sawtooth_levels(eps, k);
    let mut layers = vec![dense_layer(&[vec![1.0], vec![-1.0]], vec![0.0; 2], 1)?];
    // y = (ρ(t) + ρ(−t)) / k = |t| / k, split into the three sawtooth ramps.
    let r = 1.0 / k;
    layers.push(dense_layer(
        &[vec![r, r], vec![r, r], vec![r, r]],
        vec![0.0, -0.5, -1.0],
        2,
    )?);
    // Neurons of the current layer: (a, b, c[, acc]) with acc_0 = a.
    let g = [2.0, -4.0, 2.0];
    let mut width = 3;
    let mut scale = 1.0;
    for _s in 1..m {
        scale /= 4.0;
        let acc_prev: Vec<f64> = if width == 3 {
            vec![1.0, 0.0, 0.0]
        } else {
            vec![0.0, 0.0, 0.0, 1.0]
        };
        let mut y = vec![0.0; width];
        y[..3].copy_from_slice(&g);
        let acc: Vec<f64> = (0..width).map(|j| acc_prev[j] - scale * y[j]).collect();
        layers.push(dense_layer(
            &[y.clone(), y.clone(), y, acc],
            vec![0.0, -0.5, -1.0, 0.0],
            width,
        )?);
        width = 4;
    }
    scale /= 4.0;
    let acc_prev: Vec<f64> = if width == 3 {
        vec![1.0, 0.0, 0.0]
    } else {
        vec![0.0, 0.0, 0.0, 1.0]
    };
    let out: Vec<f64> = (0..width)
        .map(|j| {
            let y = if j < 3 { g[j] } else { 0.0 };
            k * k * (acc_prev[j] - scale * y)
        })
        .collect();
    layers.push(dense_layer(&[out], vec![0.0], width)?);
    Network::new(layers)
}

fn check_eps_k(eps: f64, k: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(param(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    if !(k >= 1.0 && k.is_finite()) {
        return Err(param(format!("K must be a finite value >= 1, got {k}")));
    }
    Ok(())
}

/// Approximates `t ↦ t²` on `[-K, K]` to within `eps`; the realization is
/// exactly even.
pub fn square_net(eps: f64, k: f64) -> Result<Network> {
    check_eps_k(eps, k)?;
    square_core(eps, k)
}

fn mult_core(eps: f64, k: f64) -> Result<Network> {
    let sq = square_core(2.0 * eps, 2.0 * k)?;
    let pair = full_parallelize(&sq, &sq)?;
    let pair = pair.precompose_affine(&SparseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, -1.0]]), &[0.0, 0.0])?;
    // The squares are nonnegative, so a ReLU on them is harmless, and keeping
    // the difference in a separate two-term layer makes x·y = 0 map to 0 exactly.
    let mut layers = pair.into_layers();
    layers.push(dense_layer(&[vec![0.25, -0.25]], vec![0.0], 2)?);
    Network::new(layers)
}

/// Approximates `(x, y) ↦ x y` on `[-K, K]²` to within `eps`, with exact zero
/// output whenever `x = 0` or `y = 0`.
pub fn mult_net(eps: f64, k: f64) -> Result<Network> {
    check_eps_k(eps, k)?;
    mult_core(eps, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinMax {
    Min,
    Max,
}

/// Exact binary-tree min or max of `n` inputs with depth `⌈log₂ n⌉ + 1`.
pub fn minmax_net(n: usize, mode: MinMax) -> Result<Network> {
    if n < 2 {
        return Err(param("minmax_net needs at least two inputs"));
    }
    // Pending affine forms of the current values over the previous layer.
    let mut pending: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    let mut prev_dim = n;
    let mut layers = Vec::new();
    while pending.len() > 1 {
        let mut rows = Vec::new();
        let mut next = Vec::new();
        for chunk in pending.chunks(2) {
            let base = rows.len();
            if let [a, b] = chunk {
                let diff: Vec<f64> = match mode {
                    MinMax::Max => a.iter().zip(b).map(|(x, y)| x - y).collect(),
                    MinMax::Min => b.iter().zip(a).map(|(x, y)| x - y).collect(),
                };
                rows.push(diff);
                rows.push(b.clone());
                rows.push(b.iter().map(|v| -v).collect());
                // max = ρ(a−b) + ρ(b) − ρ(−b); min = ρ(b) − ρ(−b) − ρ(b−a).
                let sign = if mode == MinMax::Max { 1.0 } else { -1.0 };
                next.push(vec![(base, sign), (base + 1, 1.0), (base + 2, -1.0)]);
            } else {
                let a = &chunk[0];
                rows.push(a.clone());
                rows.push(a.iter().map(|v| -v).collect());
                next.push(vec![(base, 1.0), (base + 1, -1.0)]);
            }
        }
        let width = rows.len();
        layers.push(dense_layer(&rows, vec![0.0; width], prev_dim)?);
        pending = next
            .into_iter()
            .map(|terms| {
                let mut r = vec![0.0; width];
                for (j, c) in terms {
                    r[j] += c;
                }
                r
            })
            .collect();
        prev_dim = width;
    }
    layers.push(dense_layer(&pending, vec![0.0], prev_dim)?);
    Network::new(layers)
}

/// One-hidden-layer network equal to the piecewise-linear interpolant of
/// `(breakpoints, values)` on `[t₀, t_k]`, extended affinely outside.
pub fn cpwl1d_net(breakpoints: &[f64], values: &[f64]) -> Result<Network> {
    if breakpoints.len() < 2 || breakpoints.len() != values.len() {
        return Err(param("cpwl1d_net needs at least two breakpoints with matching values"));
    }
    if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(param("breakpoints must be strictly increasing"));
    }
    if !breakpoints.iter().chain(values).all(|v| v.is_finite()) {
        return Err(param("breakpoints and values must be finite"));
    }
    let k = breakpoints.len() - 1;
    let slopes: Vec<f64> = (0..k)
        .map(|j| (values[j + 1] - values[j]) / (breakpoints[j + 1] - breakpoints[j]))
        .collect();
    let t0 = breakpoints[0];
    let mut rows = vec![vec![1.0], vec![-1.0]];
    let mut bias = vec![-t0, t0];
    let mut out = vec![slopes[0], -slopes[0]];
    for j in 1..k {
        rows.push(vec![1.0]);
        bias.push(-breakpoints[j]);
        out.push(slopes[j] - slopes[j - 1]);
    }
    let width = rows.len();
    Network::new(vec![
        dense_layer(&rows, bias, 1)?,
        dense_layer(&[out], vec![values[0]], width)?,
    ])
}

/// Hats `ρ(1 − ρ(u) − ρ(−u))` with `u = (x_k − z_k)/h`, one per coordinate,
/// followed by an identity output layer. Vanishes exactly for `|u| ≥ 1`.
fn hats_net(center: &[f64], h: f64) -> Result<Network> {
    let d = center.len();
    let r = 1.0 / h;
    let mut t1 = Vec::with_capacity(2 * d);
    let mut b1 = Vec::with_capacity(2 * d);
    for (k, &z) in center.iter().enumerate() {
        t1.push((2 * k, k, r));
        t1.push((2 * k + 1, k, -r));
        b1.push(-z * r);
        b1.push(z * r);
    }
    let l1 = LayerWeights::new(SparseMatrix::from_triplets(2 * d, d, t1), b1)?;
    let t2 = (0..d).flat_map(|k| [(k, 2 * k, -1.0), (k, 2 * k + 1, -1.0)]);
    let l2 = LayerWeights::new(SparseMatrix::from_triplets(d, 2 * d, t2), vec![1.0; d])?;
    let l3 = LayerWeights::new(SparseMatrix::identity(d), vec![0.0; d])?;
    Network::new(vec![l1, l2, l3])
}

/// Balanced product tree of `n ≥ 2` inputs in `[-K, K]` built from
/// multiplication nets; lone factors ride along on identity nets.
fn product_tree(n: usize, eps_mult: f64, k: f64) -> Result<Network> {
    let mult = mult_core(eps_mult, k)?;
    let mut net: Option<Network> = None;
    let mut count = n;
    while count > 1 {
        let mut parts = Vec::new();
        for _ in 0..count / 2 {
            parts.push(mult.clone());
        }
        if count % 2 == 1 {
            parts.push(identity_net(1, mult.depth())?);
        }
        let level = full_parallelize_all(&parts)?;
        net = Some(match net {
            None => level,
            Some(prev) => concat(&level, &prev)?,
        });
        count = count.div_ceil(2);
    }
    net.ok_or_else(|| param("product tree needs at least two factors"))
}

fn bump_net(center: &[f64], h: f64, eps_mult: f64) -> Result<Network> {
    let hats = hats_net(center, h)?;
    if center.len() == 1 {
        return Ok(hats);
    }
    concat(&product_tree(center.len(), eps_mult, 2.0)?, &hats)
}

/// Exact tensor-product bump `Π_k hat((x_k − z_k)/h)`.
pub fn tensor_bump(x: &[f64], center: &[f64], h: f64) -> f64 {
    x.iter()
        .zip(center)
        .map(|(xi, zi)| (1.0 - ((xi - zi) / h).abs()).max(0.0))
        .product()
}

/// Partition-of-unity network: one output per grid center, each
/// approximating the tensor-product hat bump of support `|x − z|_∞ < h`.
pub fn pou_net(centers: &[Vec<f64>], spacing: f64, eps_mult: f64) -> Result<Network> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(param(format!("spacing must be positive, got {spacing}")));
    }
    if !(eps_mult > 0.0 && eps_mult < 0.5) {
        return Err(param(format!("eps_mult must lie in (0, 1/2), got {eps_mult}")));
    }
    let first = centers.first().ok_or_else(|| param("pou_net needs at least one center"))?;
    let dim = first.len();
    if dim == 0 {
        return Err(param("centers must have positive dimension"));
    }
    for c in centers {
        if c.len() != dim {
            return Err(param("all centers must share one dimension"));
        }
        for (a, b) in c.iter().zip(first) {
            let steps = (a - b) / spacing;
            if (steps - steps.round()).abs() > 1e-9 * (1.0 + steps.abs()) {
                return Err(param("centers are not on a grid of the given spacing"));
            }
        }
    }
    let bumps = centers
        .iter()
        .map(|c| bump_net(c, spacing, eps_mult))
        .collect::<Result<Vec<_>>>()?;
    parallelize_all(&bumps)
}

/// Result of the cube approximator together with its measured accuracy.
#[derive(Debug, Clone)]
pub struct LipschitzNet {
    pub net: Network,
    pub spacing: f64,
    /// Sup error over the validation grid.
    pub validated_error: f64,
    /// Largest |value| at the interpolation nodes.
    pub max_abs_value: f64,
}

fn axis_nodes(k: f64, h: f64) -> Vec<f64> {
    let n = ((2.0 * k) / h).ceil().max(1.0) as usize;
    (0..=n).map(|i| -k + 2.0 * k * i as f64 / n as f64).collect()
}

/// Single-output interpolation net over the tensor grid `nodes^dim`, with
/// `values` stored with the last coordinate varying fastest.
fn interp_net(nodes: &[f64], values: &[f64], dim: usize, eps_mult: f64) -> Result<Network> {
    if dim == 1 {
        return cpwl1d_net(nodes, values);
    }
    let n = nodes.len();
    let h = nodes[1] - nodes[0];
    let maxabs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mult = mult_core(eps_mult, (1.25 * maxabs + 1.0).max(2.0))?;
    let select = SparseMatrix::from_triplets(dim - 1, dim, (0..dim - 1).map(|i| (i, i, 1.0)));
    let last = SparseMatrix::from_triplets(1, dim, [(0, dim - 1, 1.0)]);
    let mut terms = Vec::with_capacity(n);
    for (j, &t) in nodes.iter().enumerate() {
        let sub: Vec<f64> = (0..values.len() / n).map(|i| values[i * n + j]).collect();
        let g = interp_net(nodes, &sub, dim - 1, eps_mult)?.precompose_affine(&select, &vec![0.0; dim - 1])?;
        let hat = hats_net(&[t], h)?.precompose_affine(&last, &[0.0])?;
        let depth = g.depth().max(hat.depth());
        let pair = parallelize_all(&[hat.extend_depth(depth)?, g.extend_depth(depth)?])?;
        terms.push(concat(&mult, &pair)?);
    }
    let all = parallelize_all(&terms)?;
    all.postcompose_affine(&SparseMatrix::from_triplets(1, n, (0..n).map(|j| (0, j, 1.0))), &[0.0])
}

fn grid_points(nodes: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let total = n.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; dim];
            for k in (0..dim).rev() {
                p[k] = nodes[idx % n];
                idx /= n;
            }
            p
        })
        .collect()
}

/// Validation grid: three points between consecutive nodes, capped so the
/// total stays near `budget`.
fn validation_axis(k: f64, nodes: usize, dim: usize, budget: usize) -> Vec<f64> {
    let per_axis = (budget as f64).powf(1.0 / dim as f64).floor() as usize;
    let n = (4 * (nodes - 1) + 1).min(per_axis.max(3));
    (0..n).map(|i| -k + 2.0 * k * i as f64 / (n - 1) as f64).collect()
}

/// Interpolation network for a Lipschitz map `g: [-K, K]^d → R^q` with mesh
/// `h = eps/(C √d)`. The sup error is measured on a validation grid; if it
/// exceeds `eps` the mesh is halved, up to three times.
pub fn lipschitz_cube_net(
    g: &dyn Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    lip_const: f64,
    eps: f64,
    k: f64,
) -> Result<LipschitzNet> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(param(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(lip_const > 0.0 && lip_const.is_finite()) || !(k > 0.0 && k.is_finite()) || dim == 0 {
        return Err(param("need C > 0, K > 0 and d >= 1"));
    }
    let mut h = eps / (lip_const * (dim as f64).sqrt());
    for _attempt in 0..4 {
        let nodes = axis_nodes(k, h);
        let pts = grid_points(&nodes, dim);
        let samples: Vec<Vec<f64>> = pts.iter().map(|p| g(p)).collect();
        let q = samples[0].len();
        if q == 0 || samples.iter().any(|s| s.len() != q || s.iter().any(|v| !v.is_finite())) {
            return Err(param("g must return finite vectors of one positive length"));
        }
        let max_abs_value = samples.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let eps_mult = if dim > 1 { eps / (4.0 * (dim - 1) as f64) } else { 0.25 };
        let comps = (0..q)
            .map(|c| {
                let vals: Vec<f64> = samples.iter().map(|s| s[c]).collect();
                interp_net(&nodes, &vals, dim, eps_mult.min(0.25))
            })
            .collect::<Result<Vec<_>>>()?;
        let net = parallelize_all(&comps)?;
        let vaxis = validation_axis(k, nodes.len(), dim, 40_000);
        let vpts = grid_points(&vaxis, dim);
        let mut batch = Array2::zeros((vpts.len(), dim));
        for (i, p) in vpts.iter().enumerate() {
            for (j, v) in p.iter().enumerate() {
                batch[[i, j]] = *v;
            }
        }
        let out = net.realize_batch(&batch)?;
        let mut err = 0.0f64;
        for (i, p) in vpts.iter().enumerate() {
            let truth = g(p);
            let e: f64 = truth.iter().enumerate().map(|(c, t)| (t - out[[i, c]]).powi(2)).sum();
            err = err.max(e.sqrt());
        }
        if err <= eps {
            return Ok(LipschitzNet { net, spacing: nodes[1] - nodes[0], validated_error: err, max_abs_value });
        }
        h /= 2.0;
    }
    Err(Error::Domain(format!(
        "interpolation did not reach eps = {eps}; is the Lipschitz constant {lip_const} correct?"
    )))
}

/// Local chart of a manifold atlas.
#[derive(Clone)]
pub struct Chart {
    pub anchor: Vec<f64>,
    /// `d × D` matrix with orthonormal rows spanning the tangent space.
    pub projection: Array2<f64>,
    /// `f̂(s) = f(point of Γ near the anchor with tangent coordinate s)`.
    pub local_fn: VecFn,
    /// Locality scale δ.
    pub radius: f64,
    /// Tangent coordinates with `|s|_∞ ≤ extent` stay inside the domain of `local_fn`.
    pub extent: f64,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("anchor", &self.anchor)
            .field("projection", &self.projection)
            .field("radius", &self.radius)
            .field("extent", &self.extent)
            .finish_non_exhaustive()
    }
}

/// Finite atlas of a `d`-dimensional manifold Γ in `R^D` together with the
/// target function `f: Γ → R^q`.
#[derive(Clone)]
pub struct ChartAtlas {
    pub charts: Vec<Chart>,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    pub output_dim: usize,
    /// Orthonormal rows spanning a low-dimensional subspace that contains Γ;
    /// the partition of unity is laid out in these coordinates.
    pub support: Array2<f64>,
    /// Lipschitz constant of the local maps `f̂_i` on their extents.
    pub lipschitz: f64,
    pub target: VecFn,
    pub sampler: Sampler,
}

impl fmt::Debug for ChartAtlas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartAtlas")
            .field("charts", &self.charts)
            .field("ambient_dim", &self.ambient_dim)
            .field("intrinsic_dim", &self.intrinsic_dim)
            .field("output_dim", &self.output_dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

fn orthonormal_rows(p: &Array2<f64>, tol: f64) -> bool {
    let g = p.dot(&p.t());
    g.indexed_iter().all(|((i, j), v)| {
        let want = if i == j { 1.0 } else { 0.0 };
        (v - want).abs() <= tol
    })
}

impl ChartAtlas {
    pub fn validate(&self) -> Result<()> {
        if self.charts.is_empty() {
            return Err(Error::Geometry("atlas has no charts".into()));
        }
        if self.support.ncols() != self.ambient_dim || !orthonormal_rows(&self.support, 1e-10) {
            return Err(Error::Geometry("support basis must have orthonormal rows in R^D".into()));
        }
        for (i, c) in self.charts.iter().enumerate() {
            if c.anchor.len() != self.ambient_dim
                || c.projection.dim() != (self.intrinsic_dim, self.ambient_dim)
            {
                return Err(Error::Geometry(format!("chart {i} has inconsistent dimensions")));
            }
            if !orthonormal_rows(&c.projection, 1e-10) {
                return Err(Error::Geometry(format!("chart {i} projection rows are not orthonormal")));
            }
            if !(c.radius > 0.0) || !(c.extent > 0.0) {
                return Err(Error::Geometry(format!("chart {i} needs positive radius and extent")));
            }
        }
        Ok(())
    }

    /// Tangent coordinates `P_i (x − y_i)`.
    pub fn tangent_coords(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let c = &self.charts[i];
        c.projection
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(x).zip(&c.anchor).map(|((p, xi), yi)| p * (xi - yi)).sum())
            .collect()
    }

    pub fn support_coords(&self, x: &[f64]) -> Vec<f64> {
        self.support.rows().into_iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Unit circle in the first two coordinates of `R^D` with `M` equally spaced
/// anchors. The target is `f(x) = (1 + 2 x₁ x₂)/2 = (1 + sin 2θ)/2`.
pub fn circle_atlas_fixture(ambient: usize, charts: usize) -> Result<ChartAtlas> {
    if ambient < 2 || charts < 4 {
        return Err(param("circle fixture needs D >= 2 and M >= 4"));
    }
    const EXTENT: f64 = 0.8;
    let radius = 8.0 * (PI / (2.0 * charts as f64)).sin();
    let f_theta = |t: f64| (1.0 + (2.0 * t).sin()) / 2.0;
    let list = (0..charts)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / charts as f64;
            let mut anchor = vec![0.0; ambient];
            anchor[0] = theta.cos();
            anchor[1] = theta.sin();
            let mut projection = Array2::zeros((1, ambient));
            projection[[0, 0]] = -theta.sin();
            projection[[0, 1]] = theta.cos();
            let local_fn: VecFn = Arc::new(move |s: &[f64]| vec![f_theta(theta + s[0].clamp(-1.0, 1.0).asin())]);
            Chart { anchor, projection, local_fn, radius, extent: EXTENT }
        })
        .collect();
    let mut support = Array2::zeros((2, ambient));
    support[[0, 0]] = 1.0;
    support[[1, 1]] = 1.0;
    let sampler: Sampler = Arc::new(move |n: usize| {
        (0..n)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + 0.37) / n as f64;
                let mut x = vec![0.0; ambient];
                x[0] = t.cos();
                x[1] = t.sin();
                x
            })
            .collect()
    });
    let atlas = ChartAtlas {
        charts: list,
        ambient_dim: ambient,
        intrinsic_dim: 1,
        output_dim: 1,
        support,
        // |d/ds f(θ + asin s)| ≤ 1/√(1 − s²) for |s| ≤ EXTENT.
        lipschitz: 1.0 / (1.0 - EXTENT * EXTENT).sqrt(),
        target: Arc::new(|x: &[f64]| vec![(1.0 + 2.0 * x[0] * x[1]) / 2.0]),
        sampler,
    };
    atlas.validate()?;
    Ok(atlas)
}

#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    pub eps: f64,
    pub eps_mult: f64,
    /// Grid spacing of the partition of unity; defaults to `min radius / 8`.
    pub spacing: Option<f64>,
    /// Extra tube around Γ (in support coordinates) covered by the partition.
    pub tube: f64,
    /// Append `v ↦ ρ(v) − ρ(v − 1)` so outputs lie in `[0, 1]`.
    pub clamp: bool,
    pub validation_points: usize,
}

impl AssemblyOptions {
    pub fn new(eps: f64, eps_mult: f64) -> Self {
        Self { eps, eps_mult, spacing: None, tube: 0.0, clamp: false, validation_points: 2048 }
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldNet {
    pub net: Network,
    pub spacing: f64,
    pub grid_nodes: usize,
    pub charts_used: usize,
    /// Sup error of `|f − R(net)|` over fresh samples of Γ.
    pub validated_error: f64,
}

/// Componentwise clamp to `[0, 1]`.
pub fn clamp_net(q: usize) -> Result<Network> {
    let id = SparseMatrix::identity(q);
    let neg = id.scaled(-1.0);
    let mut bias = vec![0.0; q];
    bias.extend(std::iter::repeat_n(-1.0, q));
    Network::new(vec![
        LayerWeights::new(SparseMatrix::vstack(&[&id, &id]), bias)?,
        LayerWeights::new(SparseMatrix::hstack(&[&id, &neg]), vec![0.0; q])?,
    ])
}

fn matrix_to_sparse(a: &Array2<f64>) -> SparseMatrix {
    SparseMatrix::from_dense(a)
}

/// Builds one network realizing `Σ_i φ_i(x) f̂_i(P_i (x − y_i))`: a
/// partition of unity `φ_i` (sums of grid bumps assigned to the nearest
/// anchor) multiplied chart by chart with interpolated local maps.
pub fn assemble_manifold_net(atlas: &ChartAtlas, opts: &AssemblyOptions) -> Result<ManifoldNet> {
    atlas.validate()?;
    let eps = opts.eps;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(param(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(opts.eps_mult > 0.0 && opts.eps_mult < 0.5) {
        return Err(param("eps_mult must lie in (0, 1/2)"));
    }
    let min_radius = atlas.charts.iter().map(|c| c.radius).fold(f64::INFINITY, f64::min);
    let h = opts.spacing.unwrap_or(min_radius / 8.0);
    if !(h > 0.0) {
        return Err(param("grid spacing must be positive"));
    }
    let k = atlas.support.nrows();
    let gamma = (atlas.sampler)(4096);
    let gamma_sub: Vec<Vec<f64>> = gamma.iter().map(|x| atlas.support_coords(x)).collect();
    let reach = opts.tube + h * (k as f64).sqrt();

    // Candidate nodes: the bounding box of Γ (in support coordinates) padded by the reach.
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for z in &gamma_sub {
        for j in 0..k {
            lo[j] = lo[j].min(z[j]);
            hi[j] = hi[j].max(z[j]);
        }
    }
    let imin: Vec<i64> = lo.iter().map(|v| ((v - reach) / h).floor() as i64).collect();
    let imax: Vec<i64> = hi.iter().map(|v| ((v + reach) / h).ceil() as i64).collect();
    let mut nodes: Vec<Vec<f64>> = Vec::new();
    let mut idx = imin.clone();
    loop {
        let z: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        let near = gamma_sub.iter().any(|g| {
            g.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= reach * reach
        });
        if near {
            nodes.push(z);
        }
        let mut j = 0;
        while j < k {
            idx[j] += 1;
            if idx[j] <= imax[j] {
                break;
            }
            idx[j] = imin[j];
            j += 1;
        }
        if j == k {
            break;
        }
    }

    let anchors_sub: Vec<Vec<f64>> = atlas.charts.iter().map(|c| atlas.support_coords(&c.anchor)).collect();
    let owner: Vec<usize> = nodes
        .iter()
        .map(|z| {
            let mut best = (f64::INFINITY, 0);
            for (i, a) in anchors_sub.iter().enumerate() {
                let d2: f64 = a.iter().zip(z).map(|(p, q)| (p - q).powi(2)).sum();
                if d2 < best.0 {
                    best = (d2, i);
                }
            }
            best.1
        })
        .collect();
    let used: Vec<usize> = (0..atlas.charts.len()).filter(|i| owner.contains(i)).collect();
    let m_used = used.len();

    // Tangent extent actually reached by each chart's support on Γ.
    let d = atlas.intrinsic_dim;
    let mut extents = vec![0.0f64; atlas.charts.len()];
    for (x, zx) in gamma.iter().zip(&gamma_sub) {
        for (z, &i) in nodes.iter().zip(&owner) {
            if tensor_bump(zx, z, h) > 0.0 {
                let s = atlas.tangent_coords(i, x);
                extents[i] = s.iter().fold(extents[i], |m, v| m.max(v.abs()));
            }
        }
    }
    let q = atlas.output_dim;
    let mut local_nets = Vec::with_capacity(m_used);
    let mut max_local = 1.0f64;
    for &i in &used {
        let chart = &atlas.charts[i];
        let ext = (extents[i] * 1.05 + 0.1 * h).min(chart.extent);
        if extents[i] > chart.extent {
            return Err(Error::Geometry(format!(
                "chart {i} support reaches tangent coordinate {:.3} beyond its extent {:.3}",
                extents[i], chart.extent
            )));
        }
        let f = chart.local_fn.clone();
        let approx = lipschitz_cube_net(&|s: &[f64]| f(s), d, atlas.lipschitz, eps / m_used as f64, ext)?;
        max_local = max_local.max(approx.max_abs_value);
        let p = matrix_to_sparse(&chart.projection);
        let shift: Vec<f64> = p.matvec(&chart.anchor).into_iter().map(|v| -v).collect();
        local_nets.push(approx.net.precompose_affine(&p, &shift)?);
    }

    let assign = SparseMatrix::from_triplets(
        m_used,
        nodes.len(),
        owner.iter().enumerate().map(|(n, i)| (used.iter().position(|u| u == i).unwrap(), n, 1.0)),
    );
    let pou = pou_net(&nodes, h, opts.eps_mult)?
        .postcompose_affine(&assign, &vec![0.0; m_used])?
        .precompose_affine(&matrix_to_sparse(&atlas.support), &vec![0.0; k])?;

    let depth = local_nets.iter().map(Network::depth).chain([pou.depth()]).max().unwrap_or(1);
    let mut stage_a = vec![pou.extend_depth(depth)?];
    for net in &local_nets {
        stage_a.push(net.extend_depth(depth)?);
    }
    let stage_a = parallelize_all(&stage_a)?;

    // Stage A outputs (φ_1..φ_M, f̂_{1,1}..f̂_{M,q}); pair them for the products.
    let mult = mult_core(opts.eps_mult, (1.25 * max_local).max(2.0))?;
    let products = full_parallelize_all(&vec![mult; m_used * q])?;
    let select = SparseMatrix::from_triplets(
        2 * m_used * q,
        m_used + m_used * q,
        (0..m_used).flat_map(|i| {
            (0..q).flat_map(move |c| {
                let r = 2 * (i * q + c);
                [(r, i, 1.0), (r + 1, m_used + i * q + c, 1.0)]
            })
        }),
    );
    let sum = SparseMatrix::from_triplets(q, m_used * q, (0..m_used * q).map(|j| (j % q, j, 1.0)));
    let stage_b = products
        .precompose_affine(&select, &vec![0.0; 2 * m_used * q])?
        .postcompose_affine(&sum, &vec![0.0; q])?;
    let mut net = concat(&stage_b, &stage_a)?;
    if opts.clamp {
        net = concat(&clamp_net(q)?, &net)?;
    }

    let validation = (atlas.sampler)(opts.validation_points.max(1));
    let validated_error = sup_error(&net, &validation, &atlas.target)?;
    Ok(ManifoldNet { net, spacing: h, grid_nodes: nodes.len(), charts_used: m_used, validated_error })
}

fn to_batch(points: &[Vec<f64>]) -> Result<Array2<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    Array2::from_shape_vec((points.len(), dim), flat).map_err(|e| Error::Shape(e.to_string()))
}

/// `max_x |f(x) − R(net)(x)|` (Euclidean norm over outputs).
pub fn sup_error(net: &Network, points: &[Vec<f64>], f: &VecFn) -> Result<f64> {
    let out = net.realize_batch(&to_batch(points)?)?;
    let mut err = 0.0f64;
    for (i, x) in points.iter().enumerate() {
        let t = f(x);
        let e: f64 = t.iter().enumerate().map(|(c, v)| (v - out[[i, c]]).powi(2)).sum();
        err = err.max(e.sqrt());
    }
    Ok(err)
}

/// Monte-Carlo estimate of `E_η sup_x |R(x + η) − R(x)|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub sigma: f64,
}

/// One η per trial (i.i.d. `N(0, σ²)` per component), shared by all samples.
/// Trial `t` draws from stream `t` of `seed`.
pub fn robustness_statistic(
    net: &Network,
    samples: &[Vec<f64>],
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<RobustnessEstimate> {
    if samples.is_empty() {
        return Err(param("robustness_statistic needs at least one sample"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(param("sigma must be positive"));
    }
    if trials < 100 {
        return Err(param("robustness_statistic needs at least 100 trials"));
    }
    let dim = net.input_dim();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Shape("samples do not match the network input dimension".into()));
    }
    let clean = net.realize_batch(&to_batch(samples)?)?;
    let n = samples.len();
    let per_chunk = (1024 / n).max(1);
    let mut values = Vec::with_capacity(trials);
    let mut t0 = 0;
    while t0 < trials {
        let nt = per_chunk.min(trials - t0);
        let mut batch = Array2::zeros((nt * n, dim));
        for t in 0..nt {
            let mut rng = stream_rng(seed, (t0 + t) as u64);
            let eta: Vec<f64> = (0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
            for (p, x) in samples.iter().enumerate() {
                for j in 0..dim {
                    batch[[t * n + p, j]] = x[j] + eta[j];
                }
            }
        }
        let noisy = net.realize_batch(&batch)?;
        for t in 0..nt {
            let mut sup = 0.0f64;
            for p in 0..n {
                let e: f64 = noisy
                    .row(t * n + p)
                    .iter()
                    .zip(clean.row(p))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                sup = sup.max(e);
            }
            values.push(sup);
        }
        t0 += nt;
    }
    let (mean, std_error) = mean_and_stderr(&values);
    Ok(RobustnessEstimate { mean, std_error, trials, sigma })
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Inputs of the robustness bound.
#[derive(Debug, Clone, Copy)]
pub struct RobustnessBound {
    pub intrinsic_dim: usize,
    pub charts: usize,
    pub ambient_dim: usize,
    pub sigma: f64,
    pub eps: f64,
    pub lip_const: f64,
    pub radius: f64,
}

impl RobustnessBound {
    /// `(8C²/D) E|η|² (√(2d log M) + 2 log M + d) + 8 eps² + 2D exp(−r₀²/(2σ²))`
    /// with `E|η|² = Dσ²` and `r₀ = min(δ/(2√D), 1)`.
    pub fn rhs(&self) -> f64 {
        let dd = self.ambient_dim as f64;
        let energy = dd * self.sigma * self.sigma;
        let c_hat = 8.0 * self.lip_const * self.lip_const;
        let m = self.charts.max(2);
        let r0 = (self.radius / (2.0 * dd.sqrt())).min(1.0);
        c_hat / dd * energy * chi2_max_value(self.intrinsic_dim, m)
            + 8.0 * self.eps * self.eps
            + 2.0 * dd * (-(r0 * r0) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustNetReport {
    pub eps_target: f64,
    pub sup_error_on_manifold: f64,
    pub robustness_lhs: f64,
    pub lhs_std_error: f64,
    pub bound_rhs: f64,
    pub sigma: f64,
    pub noise_energy: f64,
    pub trials: usize,
}

/// Accuracy on Γ, the Monte-Carlo robustness statistic, and the bound it is
/// compared against, for a network built from `atlas`.
pub fn robustness_report(
    net: &Network,
    atlas: &ChartAtlas,
    eps: f64,
    sigma: f64,
    trials: usize,
    samples: usize,
    seed: u64,
) -> Result<RobustNetReport> {
    let pts = (atlas.sampler)(samples);
    let sup = sup_error(net, &pts, &atlas.target)?;
    let est = robustness_statistic(net, &pts, sigma, trials, seed)?;
    let bound = RobustnessBound {
        intrinsic_dim: atlas.intrinsic_dim,
        charts: atlas.charts.len(),
        ambient_dim: atlas.ambient_dim,
        sigma,
        eps,
        lip_const: atlas.lipschitz,
        radius: atlas.charts.iter().map(|c| c.radius).fold(f64::INFINITY, f64::min),
    };
    Ok(RobustNetReport {
        eps_target: eps,
        sup_error_on_manifold: sup,
        robustness_lhs: est.mean,
        lhs_std_error: est.std_error,
        bound_rhs: bound.rhs(),
        sigma,
        noise_energy: atlas.ambient_dim as f64 * sigma * sigma,
        trials,
    })
}

fn chi2_max_value(d: usize, m: usize) -> f64 {
    let lm = (m as f64).ln();
    (2.0 * d as f64 * lm).sqrt() + 2.0 * lm + d as f64
}

/// `√(2 d log M) + 2 log M + d`, a bound on `E max_{j ≤ M} X_j` for `X_j ~ χ²_d`.
pub fn chi2_max_bound(d: usize, m: usize) -> Result<f64> {
    if d < 1 || m < 2 {
        return Err(param("chi2_max_bound needs d >= 1 and M >= 2"));
    }
    Ok(chi2_max_value(d, m))
}

/// Monte-Carlo mean (and standard error) of `max_j |P_j η|²` for `M` random
/// rank-`d` orthogonal projections in `R^ambient` and `η ~ N(0, I)`.
pub fn chi2_max_monte_carlo(d: usize, m: usize, ambient: usize, draws: usize, seed: u64) -> Result<(f64, f64)> {
    if d < 1 || m < 1 || ambient < d || draws < 2 {
        return Err(param("need 1 <= d <= ambient, M >= 1 and at least two draws"));
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let bases: Vec<DMatrix<f64>> = (0..m)
        .map(|_| {
            let g = DMatrix::from_fn(ambient, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            g.qr().q()
        })
        .collect();
    let values: Vec<f64> = (0..draws)
        .map(|t| {
            let mut r = stream_rng(seed, t as u64);
            let eta = nalgebra::DVector::from_fn(ambient, |_, _| r.sample::<f64, _>(StandardNormal));
            bases.iter().map(|q| (q.transpose() * &eta).norm_squared()).fold(0.0, f64::max)
        })
        .collect();
    Ok(mean_and_stderr(&values))
}

/// Generalization gap bound for networks with `W` weights, `q` outputs,
/// depth `L`, weights bounded by `B`, from `m` samples at accuracy `eps`,
/// holding with probability `1 − p`.
pub fn generalization_bound(w: usize, q: usize, l: usize, b: f64, m: usize, eps: f64, p: f64) -> Result<f64> {
    if w == 0 || q == 0 || l == 0 || m == 0 {
        return Err(Error::Domain("W, q, L and m must be positive".into()));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain("B must be positive".into()));
    }
    if !(eps > 0.0 && eps < 1.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain("eps and p must lie in (0, 1)".into()));
    }
    let (wf, qf, lf, mf) = (w as f64, q as f64, l as f64, m as f64);
    let log_term = 5.0 + qf.ln() + 4.0 * lf.ln() + (1.0 / eps).ln()
        + (lf + 1.0) * (b.ceil().ln() + wf.max(qf).ln());
    Ok(((8.0 + 8.0 * wf * qf * log_term) / mf + 8.0 * (1.0 / p).ln() / mf).sqrt())
}
