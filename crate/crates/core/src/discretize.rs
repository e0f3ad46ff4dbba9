//! Parameter maps `α ↦ λ + Σ α_k φ_k`, point sampling, and the composed
//! discretized forward map from coefficients to measurement vectors.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{param, Error, Result};
use crate::forward::{self, FunctionHandle, GravGeometry};
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Transmissivity,
    EulerBernoulli,
    Volterra,
    Gravimetric,
}

impl Problem {
    pub const ALL: [Problem; 4] = [Self::Transmissivity, Self::EulerBernoulli, Self::Volterra, Self::Gravimetric];

    pub fn name(self) -> &'static str {
        match self {
            Self::Transmissivity => "transmissivity",
            Self::EulerBernoulli => "euler-bernoulli",
            Self::Volterra => "volterra",
            Self::Gravimetric => "gravimetric",
        }
    }

    /// Basis used by the experiments for this problem.
    pub fn default_basis(self, d: usize) -> Result<BasisSpec> {
        match self {
            Self::Transmissivity => BasisSpec::hat_fem(d),
            Self::EulerBernoulli => BasisSpec::new(BasisKind::CosineEb, d),
            Self::Volterra => BasisSpec::new(BasisKind::CosineVolterra, d),
            Self::Gravimetric => BasisSpec::new(BasisKind::IndicatorGrav, d),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| param(format!("unknown problem {s:?}")))
    }
}

/// Node layout of the hat basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HatMesh {
    /// Interior nodes `k/(d+1)`, `k = 1..d`.
    Uniform,
    /// Nodes `k/6` on the seven-point grid `{0, 1/6, …, 1}`; requires `d ≤ 5`.
    SevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    HatFem(HatMesh),
    /// `cos(2πkx)/10 + 0.11`
    CosineEb,
    /// `cos(2πk(x + 1/4))/4 + 1`
    CosineVolterra,
    /// Indicators of the four density cells.
    IndicatorGrav,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub d: usize,
    pub offset: f64,
}

impl BasisSpec {
    /// Offset defaults to 0.1 for hats and 0 otherwise.
    pub fn new(kind: BasisKind, d: usize) -> Result<Self> {
        let offset = if matches!(kind, BasisKind::HatFem(_)) { 0.1 } else { 0.0 };
        let b = Self { kind, d, offset };
        b.validate()?;
        Ok(b)
    }

    pub fn hat_fem(d: usize) -> Result<Self> {
        Self::new(BasisKind::HatFem(HatMesh::Uniform), d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(param("basis dimension must be >= 1"));
        }
        match self.kind {
            BasisKind::IndicatorGrav if self.d != 4 => Err(param("the gravimetric basis has exactly 4 cells")),
            BasisKind::HatFem(HatMesh::SevenPoint) if self.d > 5 => {
                Err(param("the seven-point mesh has only 5 interior nodes"))
            }
            _ if !self.offset.is_finite() => Err(param("basis offset must be finite")),
            _ => Ok(()),
        }
    }

    /// Number of mesh intervals of the hat basis.
    fn mesh_intervals(&self) -> Option<f64> {
        match self.kind {
            BasisKind::HatFem(HatMesh::Uniform) => Some((self.d + 1) as f64),
            BasisKind::HatFem(HatMesh::SevenPoint) => Some(6.0),
            _ => None,
        }
    }

    /// Points where basis functions fail to be smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self.mesh_intervals() {
            Some(n) => (0..=n as usize).map(|i| i as f64 / n).collect(),
            None => Vec::new(),
        }
    }
}

fn check_index(basis: &BasisSpec, k: usize) -> Result<()> {
    if k == 0 || k > basis.d {
        return Err(param(format!("basis index {k} outside 1..={}", basis.d)));
    }
    Ok(())
}

fn eval_1d(kind: BasisKind, n: Option<f64>, k: usize, x: f64) -> f64 {
    match kind {
        BasisKind::HatFem(_) => {
            let n = n.expect("hat basis has a mesh");
            (1.0 - (x * n - k as f64).abs()).max(0.0)
        }
        BasisKind::CosineEb => (2.0 * PI * k as f64 * x).cos() / 10.0 + 0.11,
        BasisKind::CosineVolterra => 0.25 * (2.0 * PI * k as f64 * (x + 0.25)).cos() + 1.0,
        BasisKind::IndicatorGrav => unreachable!("indicator basis is two-dimensional"),
    }
}

/// `φ_k(x)` for the one-dimensional bases, `k` in `1..=d`.
pub fn basis_eval(basis: &BasisSpec, k: usize, x: f64) -> Result<f64> {
    check_index(basis, k)?;
    if basis.kind == BasisKind::IndicatorGrav {
        return Err(param("use basis_eval_2d for the gravimetric indicators"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("basis argument {x} outside [0, 1]")));
    }
    Ok(eval_1d(basis.kind, basis.mesh_intervals(), k, x))
}

/// Indicator of cell `k` (closed cells).
pub fn basis_eval_2d(basis: &BasisSpec, k: usize, p: [f64; 2], geom: &GravGeometry) -> Result<f64> {
    check_index(basis, k)?;
    if basis.kind != BasisKind::IndicatorGrav {
        return Err(param("basis_eval_2d only applies to the gravimetric indicators"));
    }
    let c = &geom.cells[k - 1];
    Ok(if (c.x0..=c.x1).contains(&p[0]) && (c.y0..=c.y1).contains(&p[1]) { 1.0 } else { 0.0 })
}

/// `λ + Σ α_k φ_k` as a closed-form evaluator.
pub fn p_map(basis: &BasisSpec, alpha: &[f64]) -> Result<FunctionHandle> {
    basis.validate()?;
    if alpha.len() != basis.d {
        return Err(Error::Shape(format!("{} coefficients for a {}-dimensional basis", alpha.len(), basis.d)));
    }
    if basis.kind == BasisKind::IndicatorGrav {
        return Err(param("the gravimetric density is carried by its coefficient vector"));
    }
    let alpha = alpha.to_vec();
    let kind = basis.kind;
    let n = basis.mesh_intervals();
    let offset = basis.offset;
    let desc = format!("{:?} combination of {} functions, offset {offset}", kind, alpha.len());
    FunctionHandle::new(desc, basis.kinks(), move |x| match n {
        // only the two hats around x are nonzero
        Some(n) => {
            let j = (x * n).floor() as usize;
            let mut v = offset;
            for k in [j, j + 1] {
                if (1..=alpha.len()).contains(&k) {
                    v += alpha[k - 1] * eval_1d(kind, Some(n), k, x);
                }
            }
            v
        }
        None => offset + alpha.iter().enumerate().map(|(k, a)| a * eval_1d(kind, None, k + 1, x)).sum::<f64>(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplePlacement {
    /// `j/(D−1)`, both endpoints included.
    Endpoint,
    /// `(j + 1/2)/D`.
    Midpoint,
}

pub fn sample_points(d: usize, placement: SamplePlacement) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(param(format!("need D >= 2 samples, got {d}")));
    }
    Ok((0..d)
        .map(|j| match placement {
            SamplePlacement::Endpoint => j as f64 / (d - 1) as f64,
            SamplePlacement::Midpoint => (j as f64 + 0.5) / d as f64,
        })
        .collect())
}

pub fn sample_equidistant(g: &FunctionHandle, d: usize, placement: SamplePlacement) -> Result<Vec<f64>> {
    Ok(sample_points(d, placement)?.into_iter().map(|x| g.eval(x)).collect())
}

/// Potential of `Σ α_k 1_{cell_k}` at the `4D` boundary points.
pub fn sample_grav_boundary(alpha: &[f64], d: usize, geom: &GravGeometry, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    geom.boundary_points(d)?.into_iter().map(|p| forward::grav_forward(alpha, p, geom, quad)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub problem: Problem,
    pub basis: BasisSpec,
    /// Sample count, or samples per edge for gravimetry.
    pub samples: usize,
    pub coefficient_box: (f64, f64),
    pub placement: SamplePlacement,
}

impl ProblemSpec {
    /// Experiment defaults: the problem's basis, box `(0, 1)`, endpoint sampling.
    pub fn new(problem: Problem, d: usize, samples: usize) -> Result<Self> {
        let s = Self {
            problem,
            basis: problem.default_basis(d)?,
            samples,
            coefficient_box: (0.0, 1.0),
            placement: SamplePlacement::Endpoint,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        let min = if self.problem == Problem::Gravimetric { 1 } else { 2 };
        if self.samples < min {
            return Err(param(format!("D = {} is below the minimum {min}", self.samples)));
        }
        let (lo, hi) = self.coefficient_box;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(param(format!("empty coefficient box ({lo}, {hi})")));
        }
        if (self.basis.kind == BasisKind::IndicatorGrav) != (self.problem == Problem::Gravimetric) {
            return Err(param("basis does not match the problem"));
        }
        Ok(())
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.basis.d
    }

    /// Length of the measurement vector.
    pub fn output_dim(&self) -> usize {
        match self.problem {
            Problem::Gravimetric => 4 * self.samples,
            _ => self.samples,
        }
    }

    /// Default quadrature for this problem.
    pub fn default_quadrature(&self) -> QuadratureSpec {
        match self.problem {
            Problem::Gravimetric => QuadratureSpec::default_gauss(),
            _ => QuadratureSpec::default_simpson(),
        }
    }
}

/// Sampled forward map of the coefficient vector `alpha`.
pub fn ftilde(spec: &ProblemSpec, alpha: &[f64], quad: &QuadratureSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if alpha.len() != spec.intrinsic_dim() {
        return Err(Error::Shape(format!("{} coefficients, expected {}", alpha.len(), spec.intrinsic_dim())));
    }
    if spec.problem == Problem::Gravimetric {
        return sample_grav_boundary(alpha, spec.samples, &GravGeometry::default(), quad);
    }
    let g = p_map(&spec.basis, alpha)?;
    let xs = sample_points(spec.samples, spec.placement)?;
    let one = FunctionHandle::constant(1.0);
    match spec.problem {
        Problem::Transmissivity => forward::transmissivity_profile(&g, &one, 0.0, 0.0, &xs, quad),
        Problem::EulerBernoulli => forward::eb_profile(&g, &one, &[0.0; 4], &xs, quad),
        Problem::Volterra => forward::volterra_profile(&g, &xs, quad),
        Problem::Gravimetric => unreachable!(),
    }
}

/// Precomputed matrix for the linear gravimetric map, reused across a dataset.
#[derive(Debug, Clone)]
pub struct Discretized {
    spec: ProblemSpec,
    quad: QuadratureSpec,
    grav: Option<ndarray::Array2<f64>>,
}

impl Discretized {
    pub fn new(spec: ProblemSpec, quad: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        quad.validate()?;
        let grav = match spec.problem {
            Problem::Gravimetric => Some(forward::grav_matrix(spec.samples, &GravGeometry::default(), &quad)?),
            _ => None,
        };
        Ok(Self { spec, quad, grav })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// Same values as [`ftilde`]; for gravimetry the cell integrals are read
    /// from the cached matrix.
    pub fn eval(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        match &self.grav {
            Some(m) => {
                if alpha.len() != 4 {
                    return Err(Error::Shape(format!("{} coefficients, expected 4", alpha.len())));
                }
                Ok(m.rows().into_iter().map(|r| r.iter().zip(alpha).map(|(a, b)| a * b).sum()).collect())
            }
            None => ftilde(&self.spec, alpha, &self.quad),
        }
    }
}
