//! Sweep specifications and their flat `key = value` config format.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use invnet::discretize::Problem;
use invnet::quadrature::QuadratureSpec;
use invnet::train::{NoiseModel, TrainConfig};

use crate::error::{LabError, Result};
use crate::reference::ReferenceTable;

/// Quadrature used by a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureChoice {
    /// The problem's default rule.
    Default,
    Simpson(usize),
    Gauss(usize),
}

impl QuadratureChoice {
    pub fn resolve(self, problem: Problem) -> invnet::Result<QuadratureSpec> {
        match self {
            Self::Default if problem == Problem::Gravimetric => Ok(QuadratureSpec::default_gauss()),
            Self::Default => Ok(QuadratureSpec::default_simpson()),
            Self::Simpson(n) => QuadratureSpec::simpson(n),
            Self::Gauss(n) => QuadratureSpec::gauss(n),
        }
    }
}

impl std::fmt::Display for QuadratureChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Default => f.write_str("default"),
            Self::Simpson(n) => write!(f, "simpson:{n}"),
            Self::Gauss(n) => write!(f, "gauss:{n}"),
        }
    }
}

impl FromStr for QuadratureChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "default" {
            return Ok(Self::Default);
        }
        let (rule, n) = s.split_once(':').ok_or_else(|| format!("expected default, simpson:N or gauss:N, got {s:?}"))?;
        let n: usize = n.parse().map_err(|_| format!("bad node count in {s:?}"))?;
        match rule {
            "simpson" => Ok(Self::Simpson(n)),
            "gauss" => Ok(Self::Gauss(n)),
            _ => Err(format!("unknown quadrature rule {rule:?}")),
        }
    }
}

/// One experiment grid: every `(d, D, δ)` combination is trained `runs` times.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub problem: Problem,
    pub d_values: Vec<usize>,
    /// Sample counts `D` (samples per edge for gravimetry).
    pub samples_values: Vec<usize>,
    pub delta_values: Vec<f64>,
    pub runs: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub noise: NoiseModel,
    pub quadrature: QuadratureChoice,
    pub train: TrainConfig,
    pub root_seed: u64,
    pub output_path: PathBuf,
    pub workers: usize,
    /// Write each trained network next to the results file.
    pub save_models: bool,
}

pub const FULL_RUNS: usize = 10;
pub const FULL_M_TRAIN: usize = 40_000;
pub const DESK_RUNS: usize = 3;
pub const DESK_M_TRAIN: usize = 20_000;
pub const DEFAULT_M_TEST: usize = 8_000;

/// Relative noise for the one-dimensional problems, absolute for gravimetry.
pub fn default_noise(problem: Problem) -> NoiseModel {
    match problem {
        Problem::Gravimetric => NoiseModel::Absolute,
        _ => NoiseModel::Relative,
    }
}

impl SweepSpec {
    /// Desk-scale defaults: 3 runs of 20000 training samples on the
    /// transmissivity subgrid D ∈ {20, 60, 100, 160}, δ ∈ {0, 0.01, 0.03}.
    pub fn desk(problem: Problem) -> Self {
        let (d_values, samples_values, delta_values) = match problem {
            Problem::Gravimetric => (vec![4], vec![8, 20, 40], vec![0.0, 1e-4, 1e-3]),
            _ => (vec![4], vec![20, 60, 100, 160], vec![0.0, 0.01, 0.03]),
        };
        Self {
            problem,
            d_values,
            samples_values,
            delta_values,
            runs: DESK_RUNS,
            m_train: DESK_M_TRAIN,
            m_test: DEFAULT_M_TEST,
            noise: default_noise(problem),
            quadrature: QuadratureChoice::Default,
            train: TrainConfig::default(),
            root_seed: 0,
            output_path: PathBuf::from(format!("results-{}.csv", problem.name())),
            workers: 1,
            save_models: false,
        }
    }

    /// Full-scale sweep over every cell of a reference table.
    pub fn full(reference: &ReferenceTable, table: u8) -> Result<Self> {
        let rows: Vec<_> = reference.rows.iter().filter(|r| r.table == table).collect();
        let first = rows.first().ok_or_else(|| LabError::Config(format!("no reference table {table}")))?;
        let mut spec = Self::desk(first.problem);
        spec.d_values = sorted_unique(rows.iter().map(|r| r.d));
        spec.samples_values = sorted_unique(rows.iter().map(|r| r.samples));
        let mut deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
        deltas.sort_by(f64::total_cmp);
        deltas.dedup();
        spec.delta_values = deltas;
        spec.runs = FULL_RUNS;
        spec.m_train = FULL_M_TRAIN;
        spec.output_path = PathBuf::from(format!("results-table{table}.csv"));
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::Config(m.to_string()));
        if self.d_values.is_empty() || self.samples_values.is_empty() || self.delta_values.is_empty() {
            return bad("d_values, D_values and delta_values must be non-empty");
        }
        if self.runs == 0 {
            return bad("runs must be >= 1");
        }
        if self.m_train == 0 || self.m_test == 0 {
            return bad("m_train and m_test must be >= 1");
        }
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        if self.delta_values.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("noise levels must be finite and >= 0");
        }
        if self.train.batch_size > self.m_train {
            return bad("batch_size exceeds m_train");
        }
        self.train.validate()?;
        for &d in &self.d_values {
            for &s in &self.samples_values {
                invnet::discretize::ProblemSpec::new(self.problem, d, s)?;
            }
        }
        self.quadrature.resolve(self.problem)?;
        Ok(())
    }

    /// Number of result rows a complete sweep produces.
    pub fn job_count(&self) -> usize {
        self.d_values.len() * self.samples_values.len() * self.delta_values.len() * self.runs
    }

    /// Parses the config format; keys not present keep the desk defaults of
    /// `problem`, which must be given.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected key = value", i + 1)))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let problem = pairs
            .iter()
            .find(|(_, k, _)| k == "problem")
            .ok_or_else(|| LabError::Config("missing key problem".into()))?;
        let mut spec = Self::desk(problem.2.parse::<Problem>()?);
        let mut seen = std::collections::HashSet::new();
        for (line, k, v) in &pairs {
            if !seen.insert(k.clone()) {
                return Err(LabError::Config(format!("line {line}: duplicate key {k}")));
            }
            spec.set(k, v).map_err(|e| LabError::Config(format!("line {line}: {k}: {e}")))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let t = &mut self.train;
        match key {
            "problem" => self.problem = value.parse::<Problem>().map_err(|e| e.to_string())?,
            "d_values" => self.d_values = list(value)?,
            "D_values" => self.samples_values = list(value)?,
            "delta_values" => self.delta_values = list(value)?,
            "runs" => self.runs = scalar(value)?,
            "m_train" => self.m_train = scalar(value)?,
            "m_test" => self.m_test = scalar(value)?,
            "noise" => self.noise = NoiseModel::parse(value).map_err(|e| e.to_string())?,
            "quadrature" => self.quadrature = value.parse()?,
            "root_seed" => self.root_seed = scalar(value)?,
            "output_path" => self.output_path = PathBuf::from(value),
            "workers" => self.workers = scalar(value)?,
            "save_models" => self.save_models = scalar(value)?,
            "hidden_layers" => t.hidden_layers = scalar(value)?,
            "width" => t.width = scalar(value)?,
            "epochs" => t.epochs = scalar(value)?,
            "batch_size" => t.batch_size = scalar(value)?,
            "learning_rate" => t.learning_rate = scalar(value)?,
            "final_lr_ratio" => t.final_lr_ratio = scalar(value)?,
            "beta1" => t.beta1 = scalar(value)?,
            "beta2" => t.beta2 = scalar(value)?,
            "adam_eps" => t.adam_eps = scalar(value)?,
            "standardize" => t.standardize = scalar(value)?,
            "clamp_outputs" => t.clamp_outputs = scalar(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Writes every key; `parse(to_text())` reproduces the spec.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("problem", self.problem.name().into());
        kv("d_values", join(self.d_values.iter().map(|v| v.to_string()).collect()));
        kv("D_values", join(self.samples_values.iter().map(|v| v.to_string()).collect()));
        kv("delta_values", join(self.delta_values.iter().map(|v| v.to_string()).collect()));
        kv("runs", self.runs.to_string());
        kv("m_train", self.m_train.to_string());
        kv("m_test", self.m_test.to_string());
        kv("noise", self.noise.name().into());
        kv("quadrature", self.quadrature.to_string());
        kv("root_seed", self.root_seed.to_string());
        kv("output_path", self.output_path.display().to_string());
        kv("workers", self.workers.to_string());
        kv("save_models", self.save_models.to_string());
        kv("hidden_layers", t.hidden_layers.to_string());
        kv("width", t.width.to_string());
        kv("epochs", t.epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        kv("final_lr_ratio", t.final_lr_ratio.to_string());
        kv("beta1", t.beta1.to_string());
        kv("beta2", t.beta2.to_string());
        kv("adam_eps", t.adam_eps.to_string());
        kv("standardize", t.standardize.to_string());
        kv("clamp_outputs", t.clamp_outputs.to_string());
        s
    }
}

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|p| scalar(p.trim())).collect()
}

fn sorted_unique(it: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = it.collect();
    v.sort_unstable();
    v.dedup();
    v
}
