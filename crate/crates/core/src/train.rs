//! Noisy training sets `(F̃(x_i) + η_i, x_i)` and gradient training of plain
//! ReLU MLPs on them.
//!
//! Training minimizes the empirical mean squared error with minibatch Adam.
//! This approximates, and does not solve, the empirical risk minimizer over
//! the network class.

use std::fmt::Write as _;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::discretize::{Discretized, ProblemSpec};
use crate::error::{param, Error, Result};
use crate::network::{LayerWeights, Network};
use crate::quadrature::QuadratureSpec;
use crate::rng::stream_rng;

/// How the per-component Gaussian perturbation is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// `y_j = F̃_j + δ ξ_j`
    Absolute,
    /// `y_j = F̃_j (1 + δ ξ_j)`
    Relative,
}

impl NoiseModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Absolute => "absolute",
            Self::Relative => "relative",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(Self::Absolute),
            "relative" => Ok(Self::Relative),
            _ => Err(param(format!("unknown noise model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub spec: ProblemSpec,
    pub quadrature: QuadratureSpec,
    pub delta: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `m × D_out` noisy measurements.
    pub inputs: Array2<f64>,
    /// `m × d` coefficients.
    pub targets: Array2<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>, meta: DatasetMeta) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!("{} inputs vs {} targets", inputs.nrows(), targets.nrows())));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite entries".into()));
        }
        Ok(Self { inputs, targets, meta })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

/// Sample `i` draws its coefficients and then its noise from stream `i` of
/// `seed`, so datasets do not depend on how the work is split.
pub fn gen_dataset(
    spec: &ProblemSpec,
    quad: &QuadratureSpec,
    delta: f64,
    noise: NoiseModel,
    m: usize,
    seed: u64,
) -> Result<Dataset> {
    if m == 0 {
        return Err(param("dataset size must be >= 1"));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(param(format!("noise level must be finite and >= 0, got {delta}")));
    }
    let op = Discretized::new(spec.clone(), *quad)?;
    let (d, out) = (spec.intrinsic_dim(), spec.output_dim());
    let (lo, hi) = spec.coefficient_box;
    let mut inputs = Array2::zeros((m, out));
    let mut targets = Array2::zeros((m, d));
    for i in 0..m {
        let mut rng = stream_rng(seed, i as u64);
        let alpha: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
        let clean = op.eval(&alpha)?;
        for (j, v) in clean.iter().enumerate() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            inputs[[i, j]] = match noise {
                NoiseModel::Absolute => v + delta * xi,
                NoiseModel::Relative => v * (1.0 + delta * xi),
            };
        }
        targets.row_mut(i).assign(&Array1::from(alpha));
    }
    let meta = DatasetMeta { spec: spec.clone(), quadrature: *quad, delta, noise, seed, m };
    Dataset::new(inputs, targets, meta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate at the last epoch as a fraction of `learning_rate`; the
    /// rate decays geometrically in between. 1 keeps it constant.
    pub final_lr_ratio: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    /// Standardize inputs and targets with training statistics; the affine
    /// maps are folded into the returned network.
    pub standardize: bool,
    /// Clamp predictions to the coefficient box when evaluating.
    pub clamp_outputs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 4,
            width: 100,
            epochs: 300,
            batch_size: 64,
            learning_rate: 2e-3,
            final_lr_ratio: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            init_seed: 1,
            shuffle_seed: 2,
            standardize: true,
            clamp_outputs: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.width == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(param("layer count, width, epochs and batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(param("learning rate must be finite and >= 0"));
        }
        if !(self.final_lr_ratio > 0.0 && self.final_lr_ratio <= 1.0) {
            return Err(param("final_lr_ratio must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(param("Adam parameters out of range"));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs == 1 {
            return self.learning_rate;
        }
        self.learning_rate * self.final_lr_ratio.powf(epoch as f64 / (self.epochs - 1) as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    /// Mean training loss over the minibatches of each epoch.
    pub history: Vec<f64>,
    pub final_test_mse: Option<f64>,
    pub config: TrainConfig,
    pub meta: DatasetMeta,
}

impl TrainedModel {
    pub fn max_abs_weight(&self) -> f64 {
        self.network.max_abs_weight()
    }

    /// `epoch,train_loss` rows.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss\n");
        for (e, l) in self.history.iter().enumerate() {
            let _ = writeln!(s, "{},{:e}", e + 1, l);
        }
        s
    }
}

/// Dense gradient of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub matrix: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
struct Mlp {
    w: Vec<Array2<f64>>,
    b: Vec<Array1<f64>>,
}

impl Mlp {
    fn from_network(net: &Network) -> Self {
        let w = net.layers().iter().map(|l| l.matrix.to_dense()).collect();
        let b = net.layers().iter().map(|l| Array1::from(l.bias.clone())).collect();
        Self { w, b }
    }

    fn to_network(&self) -> Result<Network> {
        let layers = self
            .w
            .iter()
            .zip(&self.b)
            .map(|(w, b)| LayerWeights::from_dense(w, b.as_slice().expect("contiguous bias")))
            .collect::<Result<_>>()?;
        Network::new(layers)
    }

    /// Layer inputs `a_0 = x, a_1, …, a_{L−1}` followed by the output.
    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let last = self.w.len() - 1;
        let mut acts = vec![x.to_owned()];
        for (l, (w, b)) in self.w.iter().zip(&self.b).enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Mean over rows of `Σ_k scale_k (out_k − t_k)²` and its gradient.
    fn loss_and_grad(&self, x: ArrayView2<f64>, t: ArrayView2<f64>, scale: &Array1<f64>) -> (f64, Vec<LayerGrad>) {
        let n = x.nrows() as f64;
        let acts = self.activations(x);
        let diff = acts.last().expect("output") - &t;
        let loss = (&diff * &diff * scale).sum() / n;
        let mut g = diff * &(scale * (2.0 / n));
        let mut grads = Vec::with_capacity(self.w.len());
        for l in (0..self.w.len()).rev() {
            let matrix = g.t().dot(&acts[l]);
            let bias = g.sum_axis(Axis(0));
            if l > 0 {
                let mut back = g.dot(&self.w[l]);
                ndarray::Zip::from(&mut back).and(&acts[l]).for_each(|d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
                g = back;
            }
            grads.push(LayerGrad { matrix, bias });
        }
        grads.reverse();
        (loss, grads)
    }
}

/// Architecture `(input_dim, width × hidden_layers, output_dim)` with
/// `N(0, 2/fan_in)` weights and zero biases.
pub fn init_mlp(input_dim: usize, output_dim: usize, config: &TrainConfig, seed: u64) -> Result<Network> {
    if input_dim == 0 || output_dim == 0 {
        return Err(param("network dimensions must be positive"));
    }
    config.validate()?;
    let mut rng = stream_rng(seed, 0);
    let mut dims = vec![input_dim];
    dims.extend(std::iter::repeat_n(config.width, config.hidden_layers));
    dims.push(output_dim);
    let layers = dims
        .windows(2)
        .map(|w| {
            let std = (2.0 / w[0] as f64).sqrt();
            let m = Array2::from_shape_simple_fn((w[1], w[0]), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            });
            LayerWeights::from_dense(&m, &vec![0.0; w[1]])
        })
        .collect::<Result<_>>()?;
    Network::new(layers)
}

fn check_shapes(net: &Network, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<()> {
    if inputs.nrows() != targets.nrows() || inputs.nrows() == 0 {
        return Err(Error::Shape(format!("{} inputs vs {} targets", inputs.nrows(), targets.nrows())));
    }
    if inputs.ncols() != net.input_dim() || targets.ncols() != net.output_dim() {
        return Err(Error::Shape(format!(
            "network maps {} -> {}, data is {} -> {}",
            net.input_dim(),
            net.output_dim(),
            inputs.ncols(),
            targets.ncols()
        )));
    }
    Ok(())
}

/// `mean_i |R(net)(x_i) − t_i|²` and its gradient with respect to every
/// layer's matrix and bias.
pub fn loss_and_grad(net: &Network, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<(f64, Vec<LayerGrad>)> {
    check_shapes(net, inputs, targets)?;
    let scale = Array1::ones(targets.ncols());
    Ok(Mlp::from_network(net).loss_and_grad(inputs.view(), targets.view(), &scale))
}

/// Column means and standard deviations (constant columns get scale 1).
fn column_stats(a: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = a.mean_axis(Axis(0)).expect("nonempty");
    let std = a.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    (mean, std)
}

fn fold_standardization(
    mlp: &mut Mlp,
    (mu_x, s_x): &(Array1<f64>, Array1<f64>),
    (mu_t, s_t): &(Array1<f64>, Array1<f64>),
) {
    // first layer sees (x − μ)/s
    let w0 = &mut mlp.w[0];
    for (j, mut col) in w0.columns_mut().into_iter().enumerate() {
        col /= s_x[j];
    }
    let shift = w0.dot(mu_x);
    mlp.b[0] -= &shift;
    // last layer output is rescaled and shifted back to coefficient units
    let last = mlp.w.len() - 1;
    for (i, mut row) in mlp.w[last].rows_mut().into_iter().enumerate() {
        row *= s_t[i];
    }
    mlp.b[last] = &mlp.b[last] * s_t + mu_t;
}

struct Adam {
    m: Vec<LayerGrad>,
    v: Vec<LayerGrad>,
    step: i32,
}

impl Adam {
    fn new(mlp: &Mlp) -> Self {
        let zeros: Vec<LayerGrad> = mlp
            .w
            .iter()
            .zip(&mlp.b)
            .map(|(w, b)| LayerGrad { matrix: Array2::zeros(w.raw_dim()), bias: Array1::zeros(b.len()) })
            .collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    fn update(&mut self, mlp: &mut Mlp, grads: &[LayerGrad], lr: f64, c: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        let step = lr * bc2.sqrt() / bc1;
        let eps = c.adam_eps * bc2.sqrt();
        for l in 0..grads.len() {
            let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                *p -= step * *m / (v.sqrt() + eps);
            };
            ndarray::Zip::from(&mut mlp.w[l])
                .and(&mut self.m[l].matrix)
                .and(&mut self.v[l].matrix)
                .and(&grads[l].matrix)
                .for_each(|p, m, v, g| upd(p, m, v, *g));
            ndarray::Zip::from(&mut mlp.b[l])
                .and(&mut self.m[l].bias)
                .and(&mut self.v[l].bias)
                .and(&grads[l].bias)
                .for_each(|p, m, v, g| upd(p, m, v, *g));
        }
    }
}

/// Minibatch Adam on the mean squared error, starting from
/// [`init_mlp`] with `config.init_seed`. Epoch `e` shuffles with stream `e`
/// of `config.shuffle_seed`.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    let m = dataset.len();
    if config.batch_size > m {
        return Err(param(format!("batch size {} exceeds dataset size {m}", config.batch_size)));
    }
    let net = init_mlp(dataset.inputs.ncols(), dataset.targets.ncols(), config, config.init_seed)?;
    let mut mlp = Mlp::from_network(&net);

    let q = dataset.targets.ncols();
    let (x_stats, t_stats) = if config.standardize {
        (column_stats(&dataset.inputs), column_stats(&dataset.targets))
    } else {
        let p = dataset.inputs.ncols();
        ((Array1::zeros(p), Array1::ones(p)), (Array1::zeros(q), Array1::ones(q)))
    };
    let x = (&dataset.inputs - &x_stats.0) / &x_stats.1;
    let t = (&dataset.targets - &t_stats.0) / &t_stats.1;
    // weighting by s² makes the standardized loss equal the raw one
    let scale = &t_stats.1 * &t_stats.1;

    let mut adam = Adam::new(&mlp);
    let mut order: Vec<usize> = (0..m).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut stream_rng(config.shuffle_seed, epoch as u64));
        let lr = config.lr_at(epoch);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let tb = t.select(Axis(0), chunk);
            let (loss, grads) = mlp.loss_and_grad(xb.view(), tb.view(), &scale);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss {loss} in epoch {}", epoch + 1)));
            }
            total += loss * chunk.len() as f64;
            adam.update(&mut mlp, &grads, lr, config);
        }
        history.push(total / m as f64);
    }
    fold_standardization(&mut mlp, &x_stats, &t_stats);
    Ok(TrainedModel { network: mlp.to_network()?, history, final_test_mse: None, config: config.clone(), meta: dataset.meta.clone() })
}

/// Describes why `test` is not drawn like the training data of `model`.
pub fn distribution_mismatch(model: &TrainedModel, test: &Dataset) -> Option<String> {
    let (a, b) = (&model.meta, &test.meta);
    if a.spec != b.spec || a.delta != b.delta || a.noise != b.noise || a.quadrature != b.quadrature {
        return Some(format!(
            "test set ({} D={} δ={} {}) differs from training set ({} D={} δ={} {})",
            b.spec.problem, b.spec.samples, b.delta, b.noise.name(),
            a.spec.problem, a.spec.samples, a.delta, a.noise.name()
        ));
    }
    None
}

/// Mean squared error of predictions of `net` on `data`, optionally clamped
/// to `[lo, hi]`.
pub fn mse(net: &Network, data: &Dataset, clamp: Option<(f64, f64)>) -> Result<f64> {
    check_shapes(net, &data.inputs, &data.targets)?;
    let mut pred = net.realize_batch(&data.inputs)?;
    if let Some((lo, hi)) = clamp {
        pred.mapv_inplace(|v| v.clamp(lo, hi));
    }
    let diff = pred - &data.targets;
    Ok((&diff * &diff).sum() / data.len() as f64)
}

/// Test MSE of the trained model. Use [`distribution_mismatch`] to check the
/// test set first.
pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<f64> {
    let clamp = model.config.clamp_outputs.then_some(model.meta.spec.coefficient_box);
    mse(&model.network, test, clamp)
}

/// Rows `range` of a dataset, keeping its metadata.
pub fn subset(data: &Dataset, rows: std::ops::Range<usize>) -> Result<Dataset> {
    if rows.end > data.len() || rows.is_empty() {
        return Err(param(format!("row range {rows:?} outside 0..{}", data.len())));
    }
    let mut meta = data.meta.clone();
    meta.m = rows.len();
    Dataset::new(
        data.inputs.slice(s![rows.clone(), ..]).to_owned(),
        data.targets.slice(s![rows, ..]).to_owned(),
        meta,
    )
}
