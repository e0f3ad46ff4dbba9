//! Sweep execution: one result row per grid cell and run, appended to a CSV
//! file as soon as it is produced.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use invnet::discretize::{Problem, ProblemSpec};
use invnet::rng::derive_seed;
use invnet::train::{evaluate, gen_dataset, train, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::SweepSpec;
use crate::error::{csv_err, io_err, Result};

/// Column order of the results file.
pub const RESULT_HEADER: [&str; 20] = [
    "problem",
    "d",
    "D",
    "delta",
    "noise",
    "run_id",
    "m_train",
    "m_test",
    "config",
    "status",
    "test_mse",
    "mse_per_coefficient",
    "final_train_loss",
    "train_seconds",
    "max_abs_weight",
    "train_seed",
    "test_seed",
    "init_seed",
    "shuffle_seed",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub d: usize,
    #[serde(rename = "D")]
    pub samples: usize,
    pub delta: f64,
    pub noise: String,
    pub run_id: usize,
    pub m_train: usize,
    pub m_test: usize,
    /// Fingerprint of the training configuration and quadrature.
    pub config: String,
    /// `ok` or `failed`.
    pub status: String,
    /// Mean squared Euclidean error over the test set.
    pub test_mse: Option<f64>,
    /// `test_mse / d`.
    pub mse_per_coefficient: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub train_seconds: f64,
    pub max_abs_weight: Option<f64>,
    pub train_seed: u64,
    pub test_seed: u64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub error: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn job_key(&self) -> JobKey {
        JobKey {
            problem: self.problem.clone(),
            d: self.d,
            samples: self.samples,
            delta: self.delta.to_bits(),
            run_id: self.run_id,
            m_train: self.m_train,
            m_test: self.m_test,
            noise: self.noise.clone(),
            config: self.config.clone(),
            train_seed: self.train_seed,
        }
    }
}

/// Identifies a row for resuming: same cell, run, sizes, configuration and seeds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct JobKey {
    problem: String,
    d: usize,
    samples: usize,
    delta: u64,
    run_id: usize,
    m_train: usize,
    m_test: usize,
    noise: String,
    config: String,
    train_seed: u64,
}

/// Seeds of one run, derived from the root seed and the cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub train: u64,
    pub test: u64,
    pub init: u64,
    pub shuffle: u64,
}

impl RunSeeds {
    pub fn derive(root: u64, problem: Problem, d: usize, samples: usize, delta: f64, run_id: usize) -> Self {
        let p = Problem::ALL.iter().position(|&q| q == problem).unwrap_or(0) as u64;
        let at = |purpose: u64| derive_seed(root, &[p, d as u64, samples as u64, delta.to_bits(), run_id as u64, purpose]);
        Self { train: at(0), test: at(1), init: at(2), shuffle: at(3) }
    }
}

/// One unit of work: a grid cell and a run index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub d: usize,
    pub samples: usize,
    pub delta: f64,
    pub run_id: usize,
}

/// Jobs in grid order: d, then D, then δ, then run.
pub fn jobs(spec: &SweepSpec) -> Vec<Job> {
    let mut out = Vec::with_capacity(spec.job_count());
    for &d in &spec.d_values {
        for &samples in &spec.samples_values {
            for &delta in &spec.delta_values {
                for run_id in 0..spec.runs {
                    out.push(Job { d, samples, delta, run_id });
                }
            }
        }
    }
    out
}

/// FNV-1a over the text of everything that changes a run besides the cell.
pub fn config_fingerprint(spec: &SweepSpec) -> String {
    let t = &spec.train;
    let text = format!(
        "{} {} {} {} {} {} {} {} {} {} {}",
        t.hidden_layers, t.width, t.epochs, t.batch_size, t.learning_rate, t.final_lr_ratio,
        t.beta1, t.beta2, t.adam_eps, t.standardize, t.clamp_outputs
    ) + &format!(" {}", spec.quadrature);
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Trains and evaluates one job. Failures become failed rows.
pub fn run_job(spec: &SweepSpec, job: Job) -> ResultRow {
    let seeds = RunSeeds::derive(spec.root_seed, spec.problem, job.d, job.samples, job.delta, job.run_id);
    let mut row = ResultRow {
        problem: spec.problem.name().to_string(),
        d: job.d,
        samples: job.samples,
        delta: job.delta,
        noise: spec.noise.name().to_string(),
        run_id: job.run_id,
        m_train: spec.m_train,
        m_test: spec.m_test,
        config: config_fingerprint(spec),
        status: "ok".into(),
        test_mse: None,
        mse_per_coefficient: None,
        final_train_loss: None,
        train_seconds: 0.0,
        max_abs_weight: None,
        train_seed: seeds.train,
        test_seed: seeds.test,
        init_seed: seeds.init,
        shuffle_seed: seeds.shuffle,
        error: String::new(),
    };
    let start = Instant::now();
    match train_job(spec, job, seeds) {
        Ok((test, loss, wmax, model)) => {
            row.test_mse = Some(test);
            row.mse_per_coefficient = Some(test / job.d as f64);
            row.final_train_loss = Some(loss);
            row.max_abs_weight = Some(wmax);
            if let Some(net) = model {
                if let Err(e) = save_model(spec, job, &net) {
                    row.status = "failed".into();
                    row.error = e.to_string();
                }
            }
        }
        Err(e) => {
            row.status = "failed".into();
            row.error = e.to_string();
        }
    }
    row.train_seconds = start.elapsed().as_secs_f64();
    row
}

type JobOutcome = (f64, f64, f64, Option<invnet::Network>);

fn train_job(spec: &SweepSpec, job: Job, seeds: RunSeeds) -> invnet::Result<JobOutcome> {
    let pspec = ProblemSpec::new(spec.problem, job.d, job.samples)?;
    let quad = spec.quadrature.resolve(spec.problem)?;
    let data = gen_dataset(&pspec, &quad, job.delta, spec.noise, spec.m_train, seeds.train)?;
    let test = gen_dataset(&pspec, &quad, job.delta, spec.noise, spec.m_test, seeds.test)?;
    let config = TrainConfig { init_seed: seeds.init, shuffle_seed: seeds.shuffle, ..spec.train.clone() };
    let model = train(&data, &config)?;
    drop(data);
    let mse = evaluate(&model, &test)?;
    let loss = model.history.last().copied().unwrap_or(f64::NAN);
    let wmax = model.max_abs_weight();
    Ok((mse, loss, wmax, spec.save_models.then_some(model.network)))
}

/// Directory holding saved networks of a sweep.
pub fn model_dir(spec: &SweepSpec) -> PathBuf {
    let stem = spec.output_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    spec.output_path.with_file_name(format!("{stem}-models"))
}

pub fn model_path(spec: &SweepSpec, job: Job) -> PathBuf {
    model_dir(spec).join(format!(
        "{}-d{}-D{}-delta{}-run{}.net",
        spec.problem.name(),
        job.d,
        job.samples,
        job.delta,
        job.run_id
    ))
}

fn save_model(spec: &SweepSpec, job: Job, net: &invnet::Network) -> Result<()> {
    let dir = model_dir(spec);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    net.save(&model_path(spec, job))?;
    Ok(())
}

/// Runs every job of `spec` not already present in its results file and
/// returns the rows of all jobs in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    run_sweep_with(spec, |_| {})
}

/// [`run_sweep`] calling `on_row` for every freshly produced row.
pub fn run_sweep_with(spec: &SweepSpec, mut on_row: impl FnMut(&ResultRow)) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let path = &spec.output_path;
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let existing = load_for_resume(path)?;
    let all = jobs(spec);
    let template: Vec<JobKey> = all.iter().map(|&j| expected_key(spec, j)).collect();
    let done: HashSet<JobKey> = existing.iter().map(ResultRow::job_key).collect();
    let pending: Vec<usize> = (0..all.len()).filter(|&i| !done.contains(&template[i])).collect();

    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    let fresh = file.metadata().map_err(io_err(path))?.len() == 0;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        writer.write_record(RESULT_HEADER).map_err(csv_err(path))?;
        writer.flush().map_err(io_err(path))?;
    }

    let mut produced: Vec<(usize, ResultRow)> = Vec::with_capacity(pending.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, ResultRow)>();
    let workers = spec.workers.min(pending.len()).max(1);
    let write_result = std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, all) = (&next, &pending, &all);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&job) = pending.get(i) else { break };
                if tx.send((job, run_job(spec, all[job]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (job, row) in rx {
            writer.serialize(&row).map_err(csv_err(path))?;
            writer.flush().map_err(io_err(path))?;
            on_row(&row);
            produced.push((job, row));
        }
        Ok(())
    });
    write_result?;

    let index: std::collections::HashMap<&JobKey, usize> = template.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut slots: Vec<Option<ResultRow>> = vec![None; all.len()];
    for r in existing {
        if let Some(&i) = index.get(&r.job_key()) {
            slots[i].get_or_insert(r);
        }
    }
    for (i, r) in produced {
        slots[i] = Some(r);
    }
    let rows: Vec<ResultRow> = slots.into_iter().flatten().collect();
    crate::analysis::write_summary(spec, &rows, &summary_path(spec))?;
    Ok(rows)
}

pub fn summary_path(spec: &SweepSpec) -> PathBuf {
    spec.output_path.with_extension("json")
}

fn expected_key(spec: &SweepSpec, job: Job) -> JobKey {
    let seeds = RunSeeds::derive(spec.root_seed, spec.problem, job.d, job.samples, job.delta, job.run_id);
    JobKey {
        problem: spec.problem.name().to_string(),
        d: job.d,
        samples: job.samples,
        delta: job.delta.to_bits(),
        run_id: job.run_id,
        m_train: spec.m_train,
        m_test: spec.m_test,
        noise: spec.noise.name().to_string(),
        config: config_fingerprint(spec),
        train_seed: seeds.train,
    }
}

/// Reads the rows already in `path`, cutting off a partially written last
/// line left by an interrupted sweep.
fn load_for_resume(path: &Path) -> Result<Vec<ResultRow>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        f.set_len(keep as u64).map_err(io_err(path))?;
        return load_for_resume(path);
    }
    if text.is_empty() {
        return Ok(Vec::new());
    }
    read_rows(path)
}

/// Writes rows with a header line; an empty slice gives a header-only file.
pub fn emit_rows_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(RESULT_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(RESULT_HEADER) {
        return Err(crate::error::LabError::Config(format!("{}: unexpected results header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}
