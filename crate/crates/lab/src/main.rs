use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invnet::constructive::{
    assemble_manifold_net, circle_atlas_fixture, generalization_bound, mult_net, robustness_report,
    robustness_statistic, square_net, sup_error, AssemblyOptions,
};
use invnet::discretize::{ftilde, Problem, ProblemSpec};
use invnet::rng::{derive_seed, stream_rng};
use invnet::train::{gen_dataset, NoiseModel};
use invnet::Network;
use invnet_lab::config::{default_noise, QuadratureChoice, SweepSpec, FULL_M_TRAIN, FULL_RUNS};
use invnet_lab::error::LabError;
use invnet_lab::sweep::{run_job, Job};
use invnet_lab::{
    aggregate, check_trends, compare_reference, emit_plotdata, emit_stats_csv, read_rows, run_sweep_with, Axis,
    Metric, ReferenceTable,
};
use rand::Rng;

#[derive(Parser)]
#[command(name = "invnet-lab", version, about = "Experiments on neural solvers for discretized inverse problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the sampled forward map at a coefficient vector.
    Forward(ForwardArgs),
    /// Generate a noisy dataset and write it as CSV.
    Dataset(DatasetArgs),
    /// Train and evaluate a single cell.
    Train(TrainArgs),
    /// Run a sweep over a grid of cells.
    Sweep(SweepArgs),
    /// Build a constructive network and verify its accuracy.
    Construct(ConstructArgs),
    /// Monte-Carlo robustness statistic of a constructed or saved network.
    Robustness(RobustnessArgs),
    /// Evaluate the generalization bound.
    Bound(BoundArgs),
    /// Compare sweep results with the reference tables.
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct CellArgs {
    #[arg(long)]
    problem: Problem,
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Number of samples (per edge for gravimetry).
    #[arg(long = "D", default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value = "default")]
    quadrature: QuadratureChoice,
}

#[derive(Args)]
struct ForwardArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Comma-separated coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    cell: CellArgs,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// absolute or relative; defaults per problem.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cell: CellArgs,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    run_id: usize,
    /// Config file supplying noise model, sizes and training parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    over: Overrides,
    /// Directory for the saved network.
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    m_train: Option<usize>,
    #[arg(long)]
    m_test: Option<usize>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, spec: &mut SweepSpec) -> Result<(), LabError> {
        if let Some(v) = self.seed {
            spec.root_seed = v;
        }
        if let Some(v) = self.runs {
            spec.runs = v;
        }
        if let Some(v) = self.m_train {
            spec.m_train = v;
        }
        if let Some(v) = self.m_test {
            spec.m_test = v;
        }
        if let Some(v) = &self.noise {
            spec.noise = NoiseModel::parse(v)?;
        }
        if let Some(v) = self.epochs {
            spec.train.epochs = v;
        }
        if let Some(v) = self.workers {
            spec.workers = v;
        }
        if let Some(v) = &self.output {
            spec.output_path = v.clone();
        }
        Ok(())
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Config file; alternatively give --problem or --table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<Problem>,
    /// Take the grid of a reference table (1 to 6).
    #[arg(long)]
    table: Option<u8>,
    /// Full scale: 10 runs with 40000 training samples.
    #[arg(long)]
    full: bool,
    #[arg(long, value_delimiter = ',')]
    d_values: Option<Vec<usize>>,
    #[arg(long = "D-values", value_delimiter = ',')]
    samples_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    delta_values: Option<Vec<f64>>,
    #[command(flatten)]
    over: Overrides,
    /// Require all trend checks to pass.
    #[arg(long)]
    check_trends: bool,
    /// Require every cell to lie within this factor of the reference tables.
    #[arg(long)]
    compare_factor: Option<f64>,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct ConstructArgs {
    /// mult, square or circle
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Half-width of the input box for mult and square.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Ambient dimension of the circle fixture.
    #[arg(long, default_value_t = 2)]
    ambient: usize,
    #[arg(long, default_value_t = 8)]
    charts: usize,
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Args)]
struct RobustnessArgs {
    /// Saved network; without it the circle fixture is built.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Problem whose noiseless measurements serve as samples for a saved model.
    #[arg(long)]
    problem: Option<Problem>,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long = "D", default_value_t = 20)]
    samples_dim: usize,
    #[arg(long, default_value_t = 10)]
    ambient: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    w: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    l: usize,
    #[arg(long)]
    b: f64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    p: f64,
}

#[derive(Args)]
struct CompareArgs {
    /// Results CSV written by a sweep.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    factor: f64,
    /// per-coefficient or summed
    #[arg(long, default_value = "per-coefficient")]
    metric: String,
    #[arg(long)]
    table: Option<u8>,
    #[arg(long)]
    stats_out: Option<PathBuf>,
    #[arg(long)]
    plotdata_out: Option<PathBuf>,
    /// D, d or delta
    #[arg(long, default_value = "D")]
    axis: String,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every requested check passed.
fn run(cli: Cli) -> Result<bool, LabError> {
    match cli.cmd {
        Cmd::Forward(a) => forward(a),
        Cmd::Dataset(a) => dataset(a),
        Cmd::Train(a) => train_cell(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Construct(a) => construct(a),
        Cmd::Robustness(a) => robustness(a),
        Cmd::Bound(a) => {
            let v = generalization_bound(a.w, a.q, a.l, a.b, a.m, a.eps, a.p)?;
            println!("{v:e}");
            Ok(true)
        }
        Cmd::Compare(a) => compare(a),
    }
}

fn forward(a: ForwardArgs) -> Result<bool, LabError> {
    let spec = ProblemSpec::new(a.cell.problem, a.cell.d, a.cell.samples)?;
    let quad = a.cell.quadrature.resolve(a.cell.problem)?;
    let y = ftilde(&spec, &a.alpha, &quad)?;
    println!("{}", y.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
    Ok(true)
}

fn dataset(a: DatasetArgs) -> Result<bool, LabError> {
    let spec = ProblemSpec::new(a.cell.problem, a.cell.d, a.cell.samples)?;
    let quad = a.cell.quadrature.resolve(a.cell.problem)?;
    let noise = match &a.noise {
        Some(n) => NoiseModel::parse(n)?,
        None => default_noise(a.cell.problem),
    };
    let data = gen_dataset(&spec, &quad, a.delta, noise, a.m, a.seed)?;
    let path = &a.out;
    let csv_err = |source| LabError::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (0..data.inputs.ncols()).map(|j| format!("y{j}")).collect();
    header.extend((0..data.targets.ncols()).map(|k| format!("alpha{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for (x, t) in data.inputs.rows().into_iter().zip(data.targets.rows()) {
        let rec: Vec<String> = x.iter().chain(t.iter()).map(|v| v.to_string()).collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| LabError::Io { path: path.display().to_string(), source })?;
    eprintln!("wrote {} samples to {}", data.len(), path.display());
    Ok(true)
}

fn train_cell(a: TrainArgs) -> Result<bool, LabError> {
    let mut spec = match &a.config {
        Some(p) => SweepSpec::parse(&read_text(p)?)?,
        None => SweepSpec::desk(a.cell.problem),
    };
    spec.problem = a.cell.problem;
    spec.quadrature = a.cell.quadrature;
    spec.d_values = vec![a.cell.d];
    spec.samples_values = vec![a.cell.samples];
    spec.delta_values = vec![a.delta];
    if a.config.is_none() {
        spec.noise = default_noise(a.cell.problem);
    }
    a.over.apply(&mut spec)?;
    if let Some(dir) = &a.save_model {
        spec.save_models = true;
        spec.output_path = dir.join("train.csv");
    }
    spec.validate()?;
    let row = run_job(&spec, Job { d: a.cell.d, samples: a.cell.samples, delta: a.delta, run_id: a.run_id });
    println!("{}", serde_json::to_string_pretty(&row).expect("rows serialize"));
    if !row.is_ok() {
        eprintln!("training failed: {}", row.error);
    }
    Ok(row.is_ok())
}

fn sweep(a: SweepArgs) -> Result<bool, LabError> {
    let reference = ReferenceTable::builtin();
    let mut spec = match (&a.config, a.table, a.problem) {
        (Some(p), _, _) => SweepSpec::parse(&read_text(p)?)?,
        (None, Some(t), _) => {
            let mut s = SweepSpec::full(&reference, t)?;
            if !a.full {
                let desk = SweepSpec::desk(s.problem);
                s.runs = desk.runs;
                s.m_train = desk.m_train;
            }
            s
        }
        (None, None, Some(p)) => SweepSpec::desk(p),
        (None, None, None) => return Err(LabError::Config("give --config, --table or --problem".into())),
    };
    if a.full {
        spec.runs = FULL_RUNS;
        spec.m_train = FULL_M_TRAIN;
    }
    if let Some(v) = a.d_values {
        spec.d_values = v;
    }
    if let Some(v) = a.samples_values {
        spec.samples_values = v;
    }
    if let Some(v) = a.delta_values {
        spec.delta_values = v;
    }
    a.over.apply(&mut spec)?;
    spec.validate()?;
    if a.dry_run {
        print!("{}", spec.to_text());
        return Ok(true);
    }
    let total = spec.job_count();
    let mut done = 0;
    let rows = run_sweep_with(&spec, |r| {
        done += 1;
        eprintln!(
            "[{done}] d={} D={} delta={} run={} {} mse={} ({:.1}s)",
            r.d,
            r.samples,
            r.delta,
            r.run_id,
            r.status,
            r.test_mse.map_or("-".into(), |v| format!("{v:e}")),
            r.train_seconds
        );
    })?;
    eprintln!("{} of {total} rows in {}", rows.len(), spec.output_path.display());
    let stats = aggregate(&rows, Metric::PerCoefficient)?;
    for s in &stats {
        println!("{}  mean {:e}  std {:e}  runs {}  failed {}", s.key, s.mean, s.std, s.runs, s.failed);
    }
    let mut ok = true;
    if a.check_trends {
        let report = check_trends(&stats);
        for c in &report.checks {
            println!("trend {} [{}]: {}", c.axis.name(), c.line, if c.pass { "pass" } else { "FAIL" });
        }
        ok &= report.all_passed();
    }
    if let Some(f) = a.compare_factor {
        ok &= print_comparison(&stats, &reference, f);
    }
    Ok(ok)
}

fn print_comparison(stats: &[invnet_lab::CellStats], reference: &ReferenceTable, factor: f64) -> bool {
    let report = compare_reference(stats, reference, factor);
    for c in &report.cells {
        println!(
            "table {} {}: measured {:e} reference {:e} ratio {:.3} {}",
            c.table,
            c.key,
            c.measured,
            c.reference,
            c.ratio,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    if report.cells.is_empty() {
        println!("no cell overlaps the reference tables");
    }
    report.all_passed()
}

fn construct(a: ConstructArgs) -> Result<bool, LabError> {
    let (net, err) = match a.kind.as_str() {
        "mult" => {
            let net = mult_net(a.eps, a.k)?;
            let n = 201;
            let mut pts = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let g = |t: usize| -a.k + 2.0 * a.k * t as f64 / (n - 1) as f64;
                    pts.push(vec![g(i), g(j)]);
                }
            }
            let f = std::sync::Arc::new(|x: &[f64]| vec![x[0] * x[1]]);
            let e = sup_error(&net, &pts, &(f as invnet::constructive::VecFn))?;
            let zero = pts.iter().filter(|p| p[0] == 0.0 || p[1] == 0.0).all(|p| net.realize(p).map_or(false, |v| v[0] == 0.0));
            println!("zero-product line exact: {zero}");
            (net, if zero { e } else { f64::INFINITY })
        }
        "square" => {
            let net = square_net(a.eps, a.k)?;
            let pts: Vec<Vec<f64>> = (0..10_001).map(|i| vec![-a.k + 2.0 * a.k * i as f64 / 10_000.0]).collect();
            let f = std::sync::Arc::new(|x: &[f64]| vec![x[0] * x[0]]);
            let e = sup_error(&net, &pts, &(f as invnet::constructive::VecFn))?;
            (net, e)
        }
        "circle" => {
            let atlas = circle_atlas_fixture(a.ambient, a.charts)?;
            let built = assemble_manifold_net(&atlas, &AssemblyOptions::new(a.eps, a.eps / 50.0))?;
            let e = sup_error(&built.net, &(atlas.sampler)(2000), &atlas.target)?;
            (built.net, e)
        }
        k => return Err(LabError::Config(format!("unknown kind {k:?}; use mult, square or circle"))),
    };
    let m = net.metrics();
    println!("kind {}  eps {}  sup error {:e}  W {}  L {}", a.kind, a.eps, err, m.weights, m.depth);
    if let Some(p) = &a.save {
        net.save(p)?;
    }
    let ok = err <= a.eps;
    println!("{}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}

fn robustness(a: RobustnessArgs) -> Result<bool, LabError> {
    match &a.model {
        None => {
            let atlas = circle_atlas_fixture(a.ambient, 8)?;
            let built = assemble_manifold_net(&atlas, &AssemblyOptions::new(a.eps, a.eps / 50.0))?;
            let r = robustness_report(&built.net, &atlas, a.eps, a.sigma, a.trials, a.samples, a.seed)?;
            println!(
                "D {}  sup error {:e}  lhs {:e} ± {:e}  rhs {:e}",
                a.ambient, r.sup_error_on_manifold, r.robustness_lhs, r.lhs_std_error, r.bound_rhs
            );
            let ok = r.robustness_lhs <= r.bound_rhs && r.sup_error_on_manifold <= a.eps;
            println!("{}", if ok { "pass" } else { "FAIL" });
            Ok(ok)
        }
        Some(path) => {
            let net = Network::load(path)?;
            let problem = a.problem.ok_or_else(|| LabError::Config("--problem is required with --model".into()))?;
            let spec = ProblemSpec::new(problem, a.d, a.samples_dim)?;
            let quad = spec.default_quadrature();
            let (lo, hi) = spec.coefficient_box;
            let seed = derive_seed(a.seed, &[1]);
            let pts = (0..a.samples)
                .map(|i| {
                    let mut rng = stream_rng(seed, i as u64);
                    let alpha: Vec<f64> = (0..a.d).map(|_| rng.random_range(lo..hi)).collect();
                    ftilde(&spec, &alpha, &quad)
                })
                .collect::<invnet::Result<Vec<_>>>()?;
            let r = robustness_statistic(&net, &pts, a.sigma, a.trials, derive_seed(a.seed, &[2]))?;
            println!("lhs {:e} ± {:e}  sigma {}  trials {}", r.mean, r.std_error, r.sigma, r.trials);
            Ok(true)
        }
    }
}

fn compare(a: CompareArgs) -> Result<bool, LabError> {
    let rows = read_rows(&a.results)?;
    let metric = Metric::parse(&a.metric)?;
    let stats = aggregate(&rows, metric)?;
    let reference = match a.table {
        Some(t) => ReferenceTable::builtin().table(t),
        None => ReferenceTable::builtin(),
    };
    if let Some(p) = &a.stats_out {
        emit_stats_csv(&stats, p)?;
    }
    if let Some(p) = &a.plotdata_out {
        emit_plotdata(&stats, Axis::parse(&a.axis)?, p)?;
    }
    Ok(print_comparison(&stats, &reference, a.factor))
}

fn read_text(p: &PathBuf) -> Result<String, LabError> {
    std::fs::read_to_string(p).map_err(|source| LabError::Io { path: p.display().to_string(), source })
}
