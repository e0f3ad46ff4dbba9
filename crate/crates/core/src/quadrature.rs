//! Composite Simpson grids with cumulative integration, and tensor
//! Gauss–Legendre rules on rectangles.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    CompositeSimpson,
    GaussLegendreTensor,
}

/// `nodes` is the Simpson node count per unit length (odd, ≥ 3) or the
/// Gauss–Legendre order per axis (≥ 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub rule: Rule,
    pub nodes: usize,
}

impl QuadratureSpec {
    /// Simpson resolution used by the one-dimensional operators. Piecewise
    /// linear coefficients near 0.1 with slopes up to d + 1 make `1/a` steep
    /// enough that 513 nodes per unit only reach about 1e-6.
    pub const DEFAULT_SIMPSON_NODES: usize = 4097;
    pub const DEFAULT_GAUSS_ORDER: usize = 16;

    pub fn simpson(nodes: usize) -> Result<Self> {
        let q = Self { rule: Rule::CompositeSimpson, nodes };
        q.validate()?;
        Ok(q)
    }

    pub fn gauss(order: usize) -> Result<Self> {
        let q = Self { rule: Rule::GaussLegendreTensor, nodes: order };
        q.validate()?;
        Ok(q)
    }

    pub fn default_simpson() -> Self {
        Self { rule: Rule::CompositeSimpson, nodes: Self::DEFAULT_SIMPSON_NODES }
    }

    pub fn default_gauss() -> Self {
        Self { rule: Rule::GaussLegendreTensor, nodes: Self::DEFAULT_GAUSS_ORDER }
    }

    pub fn validate(&self) -> Result<()> {
        match self.rule {
            Rule::CompositeSimpson if self.nodes < 3 || self.nodes % 2 == 0 => Err(param(format!(
                "Simpson node count must be odd and >= 3, got {}",
                self.nodes
            ))),
            Rule::GaussLegendreTensor if self.nodes < 2 => Err(param(format!(
                "Gauss-Legendre order must be >= 2, got {}",
                self.nodes
            ))),
            _ => Ok(()),
        }
    }

    /// Same rule at twice the resolution.
    pub fn refined(&self) -> Self {
        let nodes = match self.rule {
            Rule::CompositeSimpson => 2 * self.nodes - 1,
            Rule::GaussLegendreTensor => 2 * self.nodes,
        };
        Self { rule: self.rule, nodes }
    }
}

/// Nodes on `[0, upper]` made of uniform segments between consecutive cut
/// points, each with an even number of intervals.
#[derive(Debug, Clone)]
pub struct SimpsonGrid {
    pub x: Vec<f64>,
    /// `(start index, intervals, spacing)` per segment.
    segments: Vec<(usize, usize, f64)>,
}

impl SimpsonGrid {
    /// `cuts` are extra segment boundaries (sample points, kinks); values
    /// outside `(0, upper)` are ignored. `per_unit` is the node count per unit
    /// length.
    pub fn new(upper: f64, cuts: &[f64], per_unit: usize) -> Result<Self> {
        if !(upper >= 0.0 && upper.is_finite()) {
            return Err(param(format!("integration bound must be finite and >= 0, got {upper}")));
        }
        let mut pts: Vec<f64> = cuts.iter().copied().filter(|c| *c > 0.0 && *c < upper).collect();
        pts.push(0.0);
        pts.push(upper);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        let mut x = vec![0.0];
        let mut segments = Vec::new();
        let density = (per_unit.max(3) - 1) as f64;
        for w in pts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let mut n = (len * density).ceil() as usize;
            n = n.max(2);
            n += n % 2;
            let h = len / n as f64;
            segments.push((x.len() - 1, n, h));
            for i in 1..n {
                x.push(w[0] + i as f64 * h);
            }
            x.push(w[1]);
        }
        Ok(Self { x, segments })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Integral from 0 to every node.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.x.len());
        let mut out = vec![0.0; f.len()];
        for &(s, n, h) in &self.segments {
            let base = out[s];
            let mut acc = 0.0;
            for pair in 0..n / 2 {
                let i = s + 2 * pair;
                out[i + 1] = base + acc + h / 12.0 * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2]);
                acc += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
                out[i + 2] = base + acc;
            }
        }
        out
    }

    /// Index of the node at `x`, which must be 0 or one of the cut points.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let i = self.x.partition_point(|v| *v < x - 1e-12);
        (i < self.x.len() && (self.x[i] - x).abs() <= 1e-12).then_some(i)
    }
}

/// Tensor Gauss–Legendre rule of the given order.
#[derive(Debug, Clone)]
pub struct TensorGauss {
    rule: GaussLegendre,
}

impl TensorGauss {
    pub fn new(order: usize) -> Result<Self> {
        let n = NonZeroUsize::new(order).filter(|n| n.get() >= 2).ok_or_else(|| param("Gauss order must be >= 2"))?;
        Ok(Self { rule: GaussLegendre::new(n) })
    }

    /// `∫_{x0}^{x1} ∫_{y0}^{y1} g(x, y) dy dx`.
    pub fn integrate_rect(&self, x: (f64, f64), y: (f64, f64), g: impl Fn(f64, f64) -> f64) -> f64 {
        self.rule.integrate(x.0, x.1, |s| self.rule.integrate(y.0, y.1, |t| g(s, t)))
    }
}
