//! ReLU networks as sequences of affine layers, and the exact network calculus
//! (sparse concatenation, parallelization, identity emulation) with size
//! accounting.
//!
//! A network `((A_1, b_1), …, (A_L, b_L))` realizes
//! `x_ℓ = ρ(A_ℓ x_{ℓ-1} + b_ℓ)` for `ℓ < L` and `x_L = A_L x_{L-1} + b_L`,
//! with `ρ(t) = max{0, t}` applied componentwise.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{param, shape, Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub matrix: SparseMatrix,
    pub bias: Vec<f64>,
}

impl LayerWeights {
    pub fn new(matrix: SparseMatrix, bias: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != bias.len() {
            return Err(shape(format!(
                "layer matrix has {} rows but bias has length {}",
                matrix.nrows(),
                bias.len()
            )));
        }
        if !matrix.values().iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(param("layer contains non-finite entries"));
        }
        Ok(Self { matrix, bias })
    }

    pub fn from_dense(matrix: &Array2<f64>, bias: &[f64]) -> Result<Self> {
        Self::new(SparseMatrix::from_dense(matrix), bias.to_vec())
    }

    pub fn out_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Nonzero entries of matrix and bias.
    pub fn weight_count(&self) -> usize {
        self.matrix.nnz() + self.bias.iter().filter(|v| **v != 0.0).count()
    }
}

/// Counts attached to a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetMetrics {
    pub depth: usize,
    pub weights: usize,
    pub neurons: usize,
    pub weights_first: usize,
    pub weights_last: usize,
    pub architecture: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerWeights>,
}

impl Network {
    pub fn new(layers: Vec<LayerWeights>) -> Result<Self> {
        if layers.is_empty() {
            return Err(param("a network needs at least one layer"));
        }
        if layers[0].in_dim() == 0 {
            return Err(param("input dimension must be positive"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(shape(format!(
                    "layer {} expects {} inputs but layer {} produces {}",
                    l + 2,
                    pair[1].in_dim(),
                    l + 1,
                    pair[0].out_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// A single affine layer `x ↦ A x + b`.
    pub fn affine(matrix: SparseMatrix, bias: Vec<f64>) -> Result<Self> {
        Self::new(vec![LayerWeights::new(matrix, bias)?])
    }

    pub fn layers(&self) -> &[LayerWeights] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<LayerWeights> {
        self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(LayerWeights::weight_count).sum()
    }

    pub fn metrics(&self) -> NetMetrics {
        let mut architecture = vec![self.input_dim()];
        architecture.extend(self.layers.iter().map(LayerWeights::out_dim));
        NetMetrics {
            depth: self.depth(),
            weights: self.weight_count(),
            neurons: architecture.iter().sum(),
            weights_first: self.layers[0].weight_count(),
            weights_last: self.layers[self.layers.len() - 1].weight_count(),
            architecture,
        }
    }

    /// Largest absolute weight or bias.
    pub fn max_abs_weight(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, l| {
            let b = l.bias.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            m.max(l.matrix.max_abs()).max(b)
        })
    }

    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(shape(format!(
                "input has length {} but the network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut cur = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = layer.matrix.matvec(&cur);
            for (v, b) in next.iter_mut().zip(&layer.bias) {
                *v += b;
                if l < last {
                    *v = v.max(0.0);
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Realizes the network on every row of `points`.
    pub fn realize_batch(&self, points: &Array2<f64>) -> Result<Array2<f64>> {
        const BLOCK: usize = 256;
        let (n, dim) = points.dim();
        if dim != self.input_dim() {
            return Err(shape(format!(
                "points have dimension {dim} but the network expects {}",
                self.input_dim()
            )));
        }
        let out_dim = self.output_dim();
        let last = self.layers.len() - 1;
        let mut out = Array2::zeros((n, out_dim));
        let mut start = 0;
        while start < n {
            let npts = BLOCK.min(n - start);
            let mut cur = vec![0.0; dim * npts];
            for p in 0..npts {
                for k in 0..dim {
                    cur[k * npts + p] = points[[start + p, k]];
                }
            }
            for (l, layer) in self.layers.iter().enumerate() {
                let mut next = vec![0.0; layer.out_dim() * npts];
                layer.matrix.matmul_block(&cur, npts, &mut next);
                for (i, b) in layer.bias.iter().enumerate() {
                    let row = &mut next[i * npts..(i + 1) * npts];
                    if l < last {
                        row.iter_mut().for_each(|v| *v = (*v + b).max(0.0));
                    } else {
                        row.iter_mut().for_each(|v| *v += b);
                    }
                }
                cur = next;
            }
            for p in 0..npts {
                for k in 0..out_dim {
                    out[[start + p, k]] = cur[k * npts + p];
                }
            }
            start += npts;
        }
        Ok(out)
    }

    /// `x ↦ R(self)(M x + c)`; folds the affine map into the first layer.
    pub fn precompose_affine(&self, m: &SparseMatrix, c: &[f64]) -> Result<Network> {
        if m.nrows() != self.input_dim() || c.len() != m.nrows() {
            return Err(shape("precomposed affine map does not match the input layer"));
        }
        let first = &self.layers[0];
        let matrix = first.matrix.mul(m);
        let shift = first.matrix.matvec(c);
        let bias = first.bias.iter().zip(shift).map(|(b, s)| b + s).collect();
        let mut layers = vec![LayerWeights::new(matrix, bias)?];
        layers.extend(self.layers[1..].iter().cloned());
        Network::new(layers)
    }

    /// `x ↦ M R(self)(x) + c`; folds the affine map into the last layer.
    pub fn postcompose_affine(&self, m: &SparseMatrix, c: &[f64]) -> Result<Network> {
        if m.ncols() != self.output_dim() || c.len() != m.nrows() {
            return Err(shape("postcomposed affine map does not match the output layer"));
        }
        let last = &self.layers[self.layers.len() - 1];
        let matrix = m.mul(&last.matrix);
        let mb = m.matvec(&last.bias);
        let bias = mb.iter().zip(c).map(|(a, b)| a + b).collect();
        let mut layers = self.layers[..self.layers.len() - 1].to_vec();
        layers.push(LayerWeights::new(matrix, bias)?);
        Network::new(layers)
    }

    /// Pads the network with an identity emulation so that it has exactly
    /// `target` layers and the same realization.
    pub fn extend_depth(&self, target: usize) -> Result<Network> {
        let depth = self.depth();
        if target < depth {
            return Err(param(format!(
                "cannot shrink a depth-{depth} network to {target} layers"
            )));
        }
        if target == depth {
            return Ok(self.clone());
        }
        concat(&identity_net(self.output_dim(), target - depth)?, self)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let arch = self.metrics().architecture;
        let _ = writeln!(s, "relu-network v1");
        let _ = writeln!(
            s,
            "architecture {}",
            arch.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
        );
        for (l, layer) in self.layers.iter().enumerate() {
            let (r, c) = (layer.out_dim(), layer.in_dim());
            let nnz = layer.matrix.nnz();
            if nnz * 3 < r * c {
                let _ = writeln!(s, "layer {} {} {} sparse {}", l + 1, r, c, nnz);
                for (i, j, v) in layer.matrix.triplets() {
                    let _ = writeln!(s, "{i} {j} {}", fmt_f64(v));
                }
            } else {
                let _ = writeln!(s, "layer {} {} {} dense", l + 1, r, c);
                let dense = layer.matrix.to_dense();
                for row in dense.rows() {
                    let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
                    let _ = writeln!(s, "{}", line.join(" "));
                }
            }
            let bias: Vec<String> = layer.bias.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(s, "bias {}", bias.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Network> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |want: &str| -> Result<(usize, &str)> {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("unexpected end of input, expected {want}"),
            })
        };
        let (ln, header) = next("header")?;
        if header != "relu-network v1" {
            return Err(Error::Parse { line: ln, msg: format!("bad header {header:?}") });
        }
        let (ln, arch_line) = next("architecture")?;
        let arch: Vec<usize> = arch_line
            .strip_prefix("architecture ")
            .ok_or_else(|| Error::Parse { line: ln, msg: "expected architecture".into() })?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad size {t:?}") }))
            .collect::<Result<_>>()?;
        if arch.len() < 2 {
            return Err(Error::Parse { line: ln, msg: "architecture needs input and output".into() });
        }
        let mut layers = Vec::with_capacity(arch.len() - 1);
        for l in 1..arch.len() {
            let (ln, head) = next("layer header")?;
            let toks: Vec<&str> = head.split_whitespace().collect();
            let bad = |msg: &str| Error::Parse { line: ln, msg: msg.to_string() };
            if toks.len() < 5 || toks[0] != "layer" {
                return Err(bad("expected layer header"));
            }
            let rows: usize = toks[2].parse().map_err(|_| bad("bad row count"))?;
            let cols: usize = toks[3].parse().map_err(|_| bad("bad column count"))?;
            if rows != arch[l] || cols != arch[l - 1] {
                return Err(bad("layer shape disagrees with architecture"));
            }
            let matrix = match toks[4] {
                "dense" => {
                    let mut trip = Vec::new();
                    for i in 0..rows {
                        let (ln, row) = next("matrix row")?;
                        let vals = parse_floats(row, ln)?;
                        if vals.len() != cols {
                            return Err(Error::Parse { line: ln, msg: "wrong row length".into() });
                        }
                        trip.extend(vals.into_iter().enumerate().map(|(j, v)| (i, j, v)));
                    }
                    SparseMatrix::from_triplets(rows, cols, trip)
                }
                "sparse" => {
                    let nnz: usize = toks
                        .get(5)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("sparse layer needs an entry count"))?;
                    let mut trip = Vec::with_capacity(nnz);
                    for _ in 0..nnz {
                        let (ln, entry) = next("sparse entry")?;
                        let t: Vec<&str> = entry.split_whitespace().collect();
                        let e = || Error::Parse { line: ln, msg: format!("bad entry {entry:?}") };
                        if t.len() != 3 {
                            return Err(e());
                        }
                        let i: usize = t[0].parse().map_err(|_| e())?;
                        let j: usize = t[1].parse().map_err(|_| e())?;
                        let v: f64 = t[2].parse().map_err(|_| e())?;
                        if i >= rows || j >= cols {
                            return Err(e());
                        }
                        trip.push((i, j, v));
                    }
                    SparseMatrix::from_triplets(rows, cols, trip)
                }
                other => return Err(bad(&format!("unknown layer encoding {other:?}"))),
            };
            let (ln, bias_line) = next("bias")?;
            let bias = parse_floats(
                bias_line
                    .strip_prefix("bias")
                    .ok_or_else(|| Error::Parse { line: ln, msg: "expected bias".into() })?,
                ln,
            )?;
            if bias.len() != rows {
                return Err(Error::Parse { line: ln, msg: "wrong bias length".into() });
            }
            layers.push(LayerWeights::new(matrix, bias)?);
        }
        Network::new(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Network> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Network::from_text(&text)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse { line, msg: format!("bad number {t:?}") })
        })
        .collect()
}

/// Sparse concatenation `outer ⊙ inner`, realizing `R(outer) ∘ R(inner)` with
/// `L(outer) + L(inner)` layers.
///
/// The junction splits `z = A x + b` (the last affine map of `inner`) into
/// `(ρ(z), ρ(−z))` and feeds `A'(u⁺ − u⁻) + b'` to the rest of `outer`.
pub fn concat(outer: &Network, inner: &Network) -> Result<Network> {
    if outer.input_dim() != inner.output_dim() {
        return Err(shape(format!(
            "cannot concatenate: outer expects {} inputs, inner produces {}",
            outer.input_dim(),
            inner.output_dim()
        )));
    }
    let last = &inner.layers[inner.depth() - 1];
    let first = &outer.layers[0];
    let mut layers: Vec<LayerWeights> = inner.layers[..inner.depth() - 1].to_vec();
    let neg_last = last.matrix.scaled(-1.0);
    let split_bias: Vec<f64> = last.bias.iter().copied().chain(last.bias.iter().map(|b| -b)).collect();
    layers.push(LayerWeights::new(
        SparseMatrix::vstack(&[&last.matrix, &neg_last]),
        split_bias,
    )?);
    let neg_first = first.matrix.scaled(-1.0);
    layers.push(LayerWeights::new(
        SparseMatrix::hstack(&[&first.matrix, &neg_first]),
        first.bias.clone(),
    )?);
    layers.extend(outer.layers[1..].iter().cloned());
    Network::new(layers)
}

/// Parallelization `P(phi1, phi2)`: shared input, stacked outputs.
pub fn parallelize(phi1: &Network, phi2: &Network) -> Result<Network> {
    parallelize_all(&[phi1.clone(), phi2.clone()])
}

/// n-ary parallelization with a shared input.
pub fn parallelize_all(nets: &[Network]) -> Result<Network> {
    check_equal_depth(nets)?;
    let d = nets[0].input_dim();
    if nets.iter().any(|n| n.input_dim() != d) {
        return Err(shape("parallelized networks must share the input dimension"));
    }
    let depth = nets[0].depth();
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let mats: Vec<&SparseMatrix> = nets.iter().map(|n| &n.layers[l].matrix).collect();
        let matrix = if l == 0 {
            SparseMatrix::vstack(&mats)
        } else {
            SparseMatrix::block_diag(&mats)
        };
        let bias = nets.iter().flat_map(|n| n.layers[l].bias.iter().copied()).collect();
        layers.push(LayerWeights::new(matrix, bias)?);
    }
    Network::new(layers)
}

/// Full parallelization `FP(phi1, phi2)`: separate inputs `(x1, x2)`.
pub fn full_parallelize(phi1: &Network, phi2: &Network) -> Result<Network> {
    full_parallelize_all(&[phi1.clone(), phi2.clone()])
}

pub fn full_parallelize_all(nets: &[Network]) -> Result<Network> {
    check_equal_depth(nets)?;
    let depth = nets[0].depth();
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let mats: Vec<&SparseMatrix> = nets.iter().map(|n| &n.layers[l].matrix).collect();
        let bias = nets.iter().flat_map(|n| n.layers[l].bias.iter().copied()).collect();
        layers.push(LayerWeights::new(SparseMatrix::block_diag(&mats), bias)?);
    }
    Network::new(layers)
}

fn check_equal_depth(nets: &[Network]) -> Result<()> {
    let first = nets.first().ok_or_else(|| param("nothing to parallelize"))?;
    if nets.iter().any(|n| n.depth() != first.depth()) {
        return Err(shape("parallelized networks must have equal depth"));
    }
    Ok(())
}

/// Network of depth `depth` realizing the identity on `R^d`, with at most
/// `2 d depth` weights.
pub fn identity_net(d: usize, depth: usize) -> Result<Network> {
    if d == 0 || depth == 0 {
        return Err(param("identity_net needs d >= 1 and depth >= 1"));
    }
    let id = SparseMatrix::identity(d);
    if depth == 1 {
        return Network::affine(id, vec![0.0; d]);
    }
    let neg = id.scaled(-1.0);
    let mut layers = vec![LayerWeights::new(SparseMatrix::vstack(&[&id, &neg]), vec![0.0; 2 * d])?];
    for _ in 0..depth - 2 {
        layers.push(LayerWeights::new(SparseMatrix::identity(2 * d), vec![0.0; 2 * d])?);
    }
    layers.push(LayerWeights::new(SparseMatrix::hstack(&[&id, &neg]), vec![0.0; d])?);
    Network::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(rows: &[&[f64]], bias: &[f64]) -> LayerWeights {
        LayerWeights::new(SparseMatrix::from_rows(rows), bias.to_vec()).unwrap()
    }

    #[test]
    fn realize_single_affine_layer() {
        let net = Network::new(vec![layer(&[&[1.0]], &[0.0])]).unwrap();
        assert_eq!(net.realize(&[3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn realize_relu_identity_decomposition() {
        let net = Network::new(vec![
            layer(&[&[1.0], &[-1.0]], &[0.0, 0.0]),
            layer(&[&[1.0, -1.0]], &[0.0]),
        ])
        .unwrap();
        assert_eq!(net.realize(&[-2.0]).unwrap(), vec![-2.0]);
        assert_eq!(net.realize(&[5.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn realize_hidden_relu_then_affine() {
        let net = Network::new(vec![layer(&[&[1.0]], &[-1.0]), layer(&[&[2.0]], &[3.0])]).unwrap();
        assert_eq!(net.realize(&[0.5]).unwrap(), vec![3.0]);
        assert_eq!(net.realize(&[2.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn realize_rejects_wrong_length() {
        let net = identity_net(2, 2).unwrap();
        assert!(matches!(net.realize(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn layer_shape_is_checked() {
        assert!(LayerWeights::new(SparseMatrix::identity(2), vec![0.0]).is_err());
        let bad = Network::new(vec![
            layer(&[&[1.0, 0.0]], &[0.0]),
            layer(&[&[1.0, 1.0]], &[0.0]),
        ]);
        assert!(matches!(bad, Err(Error::Shape(_))));
    }

    #[test]
    fn non_finite_entries_rejected() {
        assert!(LayerWeights::new(SparseMatrix::from_rows(&[&[f64::NAN]]), vec![0.0]).is_err());
    }

    #[test]
    fn metrics_of_dense_affine_layer() {
        let net = Network::new(vec![layer(
            &[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]],
            &[1.0, 1.0, 1.0],
        )])
        .unwrap();
        let m = net.metrics();
        assert_eq!((m.weights, m.depth, m.neurons), (9, 1, 5));
        assert_eq!(m.architecture, vec![2, 3]);
    }

    #[test]
    fn all_zero_network_has_no_weights() {
        let net = Network::new(vec![
            layer(&[&[0.0, 0.0], &[0.0, 0.0]], &[0.0, 0.0]),
            layer(&[&[0.0, 0.0]], &[0.0]),
        ])
        .unwrap();
        assert_eq!(net.weight_count(), 0);
    }

    #[test]
    fn identity_net_is_exact() {
        let net = identity_net(3, 4).unwrap();
        assert_eq!(net.realize(&[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
        for (d, l) in [(1, 1), (5, 3), (10, 7)] {
            let net = identity_net(d, l).unwrap();
            assert_eq!(net.depth(), l);
            assert!(net.weight_count() <= 2 * d * l);
        }
        assert!(identity_net(0, 2).is_err());
        assert!(identity_net(2, 0).is_err());
    }

    #[test]
    fn extend_depth_rejects_shrinking() {
        let net = identity_net(2, 3).unwrap();
        assert!(net.extend_depth(2).is_err());
        assert_eq!(net.extend_depth(3).unwrap(), net);
    }

    #[test]
    fn concat_depth_is_additive() {
        let a = identity_net(2, 3).unwrap();
        let b = identity_net(2, 2).unwrap();
        assert_eq!(concat(&a, &b).unwrap().depth(), 5);
    }

    #[test]
    fn concat_rejects_interface_mismatch() {
        let a = identity_net(2, 1).unwrap();
        let b = identity_net(3, 1).unwrap();
        assert!(matches!(concat(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn parallelize_rejects_depth_mismatch() {
        let a = identity_net(2, 1).unwrap();
        let b = identity_net(2, 2).unwrap();
        assert!(parallelize(&a, &b).is_err());
        assert!(full_parallelize(&a, &b).is_err());
    }

    #[test]
    fn full_parallelize_identities() {
        let a = identity_net(1, 2).unwrap();
        let net = full_parallelize(&a, &a).unwrap();
        assert_eq!(net.realize(&[0.25, -7.0]).unwrap(), vec![0.25, -7.0]);
    }

    #[test]
    fn affine_pre_and_post_composition() {
        let net = Network::new(vec![
            layer(&[&[1.0], &[-1.0]], &[0.0, 0.0]),
            layer(&[&[1.0, 1.0]], &[0.0]),
        ])
        .unwrap(); // |x|
        let pre = net
            .precompose_affine(&SparseMatrix::from_rows(&[&[1.0, -1.0]]), &[0.5])
            .unwrap();
        assert_eq!(pre.realize(&[1.0, 3.0]).unwrap(), vec![1.5]);
        let post = net
            .postcompose_affine(&SparseMatrix::from_rows(&[&[2.0], &[-1.0]]), &[1.0, 0.0])
            .unwrap();
        assert_eq!(post.realize(&[-2.0]).unwrap(), vec![5.0, -2.0]);
    }

    #[test]
    fn text_format_has_header_and_architecture() {
        let net = identity_net(2, 2).unwrap();
        let text = net.to_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("relu-network v1"));
        assert_eq!(lines.next(), Some("architecture 2 4 2"));
        assert_eq!(Network::from_text(&text).unwrap(), net);
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = Network::from_text("relu-network v1\narchitecture 1 1\nlayer 1 1 1 dense\nxyz\n");
        assert!(matches!(err, Err(Error::Parse { line: 4, .. })));
        assert!(Network::from_text("nonsense").is_err());
    }
}
