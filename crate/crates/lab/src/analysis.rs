//! Aggregation of result rows, trend checks, reference comparison and
//! plot-data emission.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use invnet::discretize::Problem;
use serde::{Deserialize, Serialize, Serializer};

use crate::config::SweepSpec;
use crate::error::{csv_err, io_err, LabError, Result};
use crate::reference::ReferenceTable;
use crate::sweep::ResultRow;

/// Grid cell `(problem, d, D, δ)`. Noise levels compare by bit pattern.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CellKey {
    #[serde(serialize_with = "problem_name")]
    pub problem: Problem,
    pub d: usize,
    #[serde(rename = "D")]
    pub samples: usize,
    pub delta: f64,
}

fn problem_name<S: Serializer>(p: &Problem, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(p.name())
}

impl CellKey {
    pub fn new(problem: Problem, d: usize, samples: usize, delta: f64) -> Self {
        Self { problem, d, samples, delta }
    }

    fn order(&self) -> (usize, usize, usize, u64) {
        let p = Problem::ALL.iter().position(|&q| q == self.problem).unwrap_or(0);
        (p, self.d, self.samples, self.delta.to_bits())
    }
}

impl PartialEq for CellKey {
    fn eq(&self, o: &Self) -> bool {
        self.order() == o.order()
    }
}

impl Eq for CellKey {}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for CellKey {
    // non-negative f64 bit patterns sort like the values
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.order().cmp(&o.order())
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} d={} D={} delta={}", self.problem, self.d, self.samples, self.delta)
    }
}

/// Which error column is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Squared Euclidean error summed over the d coefficients.
    Summed,
    /// Summed error divided by d; the scale the reference tables use.
    PerCoefficient,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Self::Summed => "summed",
            Self::PerCoefficient => "per-coefficient",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "summed" => Ok(Self::Summed),
            "per-coefficient" => Ok(Self::PerCoefficient),
            _ => Err(LabError::Config(format!("unknown metric {s:?}"))),
        }
    }

    fn of(self, row: &ResultRow) -> Option<f64> {
        match self {
            Self::Summed => row.test_mse,
            Self::PerCoefficient => row.mse_per_coefficient,
        }
    }
}

/// Mean and sample standard deviation over the successful runs of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellStats {
    #[serde(flatten)]
    pub key: CellKey,
    /// NaN when every run failed.
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    pub failed: usize,
}

pub fn aggregate(rows: &[ResultRow], metric: Metric) -> Result<Vec<CellStats>> {
    let mut cells: BTreeMap<CellKey, (Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let key = CellKey::new(r.problem.parse::<Problem>()?, r.d, r.samples, r.delta);
        let entry = cells.entry(key).or_default();
        match metric.of(r).filter(|_| r.is_ok()) {
            Some(v) => entry.0.push(v),
            None => entry.1 += 1,
        }
    }
    Ok(cells
        .into_iter()
        .map(|(key, (v, failed))| {
            let n = v.len();
            let mean = if n == 0 { f64::NAN } else { v.iter().sum::<f64>() / n as f64 };
            let std = if n < 2 {
                0.0
            } else {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            CellStats { key, mean, std, runs: n, failed }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    /// Number of samples D.
    Samples,
    /// Intrinsic dimension d.
    Dim,
    /// Noise level δ.
    Delta,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Samples => "D",
            Self::Dim => "d",
            Self::Delta => "delta",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "D" => Ok(Self::Samples),
            "d" => Ok(Self::Dim),
            "delta" => Ok(Self::Delta),
            _ => Err(LabError::Config(format!("unknown axis {s:?}"))),
        }
    }

    fn coord(self, k: &CellKey) -> f64 {
        match self {
            Self::Samples => k.samples as f64,
            Self::Dim => k.d as f64,
            Self::Delta => k.delta,
        }
    }

    /// The key with this axis' coordinate cleared, identifying a line.
    fn line(self, k: &CellKey) -> CellKey {
        let mut l = *k;
        match self {
            Self::Samples => l.samples = 0,
            Self::Dim => l.d = 0,
            Self::Delta => l.delta = 0.0,
        }
        l
    }
}

/// Allowed growth of the error from the smallest to the largest D.
pub const SAMPLES_SLACK: f64 = 0.2;
/// Allowed drop between neighbouring d.
pub const DIM_SLACK: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendCheck {
    pub axis: Axis,
    /// The remaining coordinates of the line.
    pub line: String,
    /// `(coordinate, mean)` along the axis.
    pub points: Vec<(f64, f64)>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub checks: Vec<TrendCheck>,
}

impl TrendReport {
    /// `None` if no line along `axis` had two cells.
    pub fn passed(&self, axis: Axis) -> Option<bool> {
        let mut it = self.checks.iter().filter(|c| c.axis == axis).peekable();
        it.peek()?;
        Some(it.all(|c| c.pass))
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Along D the error at the largest D may exceed the one at the smallest by
/// [`SAMPLES_SLACK`]; along d each step may drop by [`DIM_SLACK`]; along δ
/// the error must not decrease.
pub fn check_trends(stats: &[CellStats]) -> TrendReport {
    let mut checks = Vec::new();
    for axis in [Axis::Samples, Axis::Dim, Axis::Delta] {
        let mut lines: BTreeMap<CellKey, Vec<(f64, f64)>> = BTreeMap::new();
        for s in stats {
            lines.entry(axis.line(&s.key)).or_default().push((axis.coord(&s.key), s.mean));
        }
        for (line, mut points) in lines {
            if points.len() < 2 {
                continue;
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let pass = match axis {
                Axis::Samples => points[points.len() - 1].1 <= (1.0 + SAMPLES_SLACK) * points[0].1,
                Axis::Dim => points.windows(2).all(|w| w[1].1 * (1.0 + DIM_SLACK) >= w[0].1),
                Axis::Delta => points.windows(2).all(|w| w[1].1 >= w[0].1),
            };
            checks.push(TrendCheck { axis, line: describe_line(axis, &line), points, pass });
        }
    }
    TrendReport { checks }
}

fn describe_line(axis: Axis, k: &CellKey) -> String {
    match axis {
        Axis::Samples => format!("{} d={} delta={}", k.problem, k.d, k.delta),
        Axis::Dim => format!("{} D={} delta={}", k.problem, k.samples, k.delta),
        Axis::Delta => format!("{} d={} D={}", k.problem, k.d, k.samples),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellComparison {
    #[serde(flatten)]
    pub key: CellKey,
    pub table: u8,
    pub measured: f64,
    pub reference: f64,
    /// measured / reference
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub factor: f64,
    pub cells: Vec<CellComparison>,
}

impl ComparisonReport {
    /// False when no cell overlaps.
    pub fn all_passed(&self) -> bool {
        !self.cells.is_empty() && self.cells.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CellComparison> {
        self.cells.iter().filter(|c| !c.pass).collect()
    }
}

/// Ratio measured/reference on every overlapping cell; a cell passes if the
/// ratio lies in `[1/factor, factor]`.
pub fn compare_reference(stats: &[CellStats], reference: &ReferenceTable, factor: f64) -> ComparisonReport {
    let mut cells = Vec::new();
    for s in stats {
        for r in reference.rows.iter().filter(|r| r.key() == s.key) {
            let ratio = s.mean / r.mse;
            let pass = ratio >= 1.0 / factor && ratio <= factor;
            cells.push(CellComparison { key: s.key, table: r.table, measured: s.mean, reference: r.mse, ratio, pass });
        }
    }
    ComparisonReport { factor, cells }
}

pub const STATS_HEADER: [&str; 8] = ["problem", "d", "D", "delta", "mean", "std", "runs", "failed"];

#[derive(Debug, Serialize, Deserialize)]
struct StatsRecord {
    problem: String,
    d: usize,
    #[serde(rename = "D")]
    samples: usize,
    delta: f64,
    mean: f64,
    std: f64,
    runs: usize,
    failed: usize,
}

pub fn emit_stats_csv(stats: &[CellStats], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(STATS_HEADER).map_err(csv_err(path))?;
    for s in stats {
        let rec = StatsRecord {
            problem: s.key.problem.name().into(),
            d: s.key.d,
            samples: s.key.samples,
            delta: s.key.delta,
            mean: s.mean,
            std: s.std,
            runs: s.runs,
            failed: s.failed,
        };
        w.serialize(rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_stats_csv(path: &Path) -> Result<Vec<CellStats>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for rec in r.deserialize::<StatsRecord>() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(CellStats {
            key: CellKey::new(rec.problem.parse()?, rec.d, rec.samples, rec.delta),
            mean: rec.mean,
            std: rec.std,
            runs: rec.runs,
            failed: rec.failed,
        });
    }
    Ok(out)
}

pub const PLOT_HEADER: [&str; 4] = ["series", "x", "mean", "std"];

/// Long-format plot data: one series per line of cells along `axis`
/// (one per δ for a single-d, single-D table), points sorted by coordinate.
pub fn emit_plotdata(stats: &[CellStats], axis: Axis, path: &Path) -> Result<()> {
    let mut series: BTreeMap<CellKey, Vec<&CellStats>> = BTreeMap::new();
    for s in stats {
        series.entry(axis.line(&s.key)).or_default().push(s);
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(PLOT_HEADER).map_err(csv_err(path))?;
    for (line, mut pts) in series {
        pts.sort_by(|a, b| axis.coord(&a.key).total_cmp(&axis.coord(&b.key)));
        let label = describe_line(axis, &line);
        for p in pts {
            w.serialize((&label, axis.coord(&p.key), p.mean, p.std)).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    config: String,
    jobs: usize,
    rows: usize,
    failed: usize,
    summed: Vec<CellStats>,
    per_coefficient: Vec<CellStats>,
    trends: TrendReport,
    rows_detail: &'a [ResultRow],
}

/// JSON summary of a sweep: its config, per-cell statistics under both
/// metrics and the trend report on the per-coefficient error.
pub fn write_summary(spec: &SweepSpec, rows: &[ResultRow], path: &Path) -> Result<()> {
    let per = aggregate(rows, Metric::PerCoefficient)?;
    let summary = Summary {
        config: spec.to_text(),
        jobs: spec.job_count(),
        rows: rows.len(),
        failed: rows.iter().filter(|r| !r.is_ok()).count(),
        summed: aggregate(rows, Metric::Summed)?,
        trends: check_trends(&per),
        per_coefficient: per,
        rows_detail: rows,
    };
    let file = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(file, &summary)
        .map_err(|source| LabError::Json { path: path.display().to_string(), source })
}
