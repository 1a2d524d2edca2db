//! Command-line interface of the `hmp` binary.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 usage error, 3 empty
//! selection grid, 4 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::datagen::{self, DEFAULT_NOISE, GENERATOR_VERSION};
use crate::error::HmpError;
use crate::io::{self as hio, KeyValues};
use crate::networks::params::{param_count, rate_curve, theorem1_params, vc_bound_shape};
use crate::networks::ArchSpec;
use crate::training::{self, ReplicationConfig, SelectionGrid, TrainConfig};
use crate::verify::{self, Suite, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EMPTY_GRID: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hmp", version, about = "Hierarchical max-pooling classifiers: data, training, checks and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic two-class shape dataset.
    Generate(GenerateArgs),
    /// Select and train a classifier by splitting the sample.
    Train(TrainArgs),
    /// Evaluate a trained network, or aggregate metrics files.
    Eval(EvalArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Print weight counts and bound shapes for the main-theorem architectures.
    Bounds(BoundsArgs),
    /// Repeat generate, select and evaluate over many seeds and summarize.
    ReproduceTable2(ReproduceArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of images.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the pixel noise.
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    noise: f64,
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct OptimArgs {
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    batch: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    restarts: u64,
    /// Truncation constant in `beta = max(1, c4 ln n)`.
    #[arg(long, default_value_t = 1.0)]
    c4: f64,
    /// Keep grid points with more weights than data points.
    #[arg(long)]
    no_weight_guard: bool,
}

impl OptimArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch as usize,
            restarts: self.restarts as usize,
            c4: self.c4,
            weight_guard: !self.no_weight_guard,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training dataset.
    #[arg(long)]
    data: PathBuf,
    /// Classifier index: 1 to 4.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=4))]
    classifier: u64,
    /// Parameter grid: full, reduced or small.
    #[arg(long, default_value = "full", value_parser = ["full", "reduced", "small"])]
    grid: String,
    /// Keep at most this many grid points.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    optim: OptimArgs,
    /// Output weights file.
    #[arg(long, default_value = "weights.hmpw")]
    out: PathBuf,
    /// Selection report; defaults to `<out>.report`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["weights", "aggregate"])))]
struct EvalArgs {
    /// Trained weights file.
    #[arg(long, requires = "data")]
    weights: Option<PathBuf>,
    /// Test dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Metrics output; defaults to `<weights>.metrics`.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Metrics files to summarize by median and interquartile range.
    #[arg(long, num_args = 1.., conflicts_with_all = ["weights", "data"])]
    aggregate: Vec<PathBuf>,
    /// Metric key used by `--aggregate`.
    #[arg(long, default_value = "misclassification")]
    key: String,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run a single suite.
    #[arg(long, value_parser = suite_names())]
    only: Option<String>,
    /// Inject a fault into one suite to test the harness.
    #[arg(long, value_parser = suite_names())]
    sabotage: Option<String>,
    /// Largest level of the dimension check.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=12))]
    exhaustive_l: u64,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn suite_names() -> clap::builder::PossibleValuesParser {
    clap::builder::PossibleValuesParser::new(Suite::ALL.map(Suite::name))
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Model parameters, e.g. `l=3,n=2,2,b=2,2`.
    #[arg(long)]
    theta_from: String,
    /// Sample size.
    #[arg(long)]
    n: f64,
    /// Smoothness, at least 1.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Depth of the approximating feedforward nets.
    #[arg(long, default_value_t = 1)]
    ln: usize,
    /// Additive channel constant.
    #[arg(long, default_value_t = 8)]
    c2: usize,
    /// Image side length.
    #[arg(long, default_value_t = 31)]
    d: usize,
    /// Also print the rate at these sample sizes.
    #[arg(long, value_delimiter = ',')]
    table: Vec<f64>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Runs per sample size.
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[arg(long, value_delimiter = ',', default_value = "200,400")]
    sizes: Vec<usize>,
    /// Size of each independent test set.
    #[arg(long, default_value_t = 2000)]
    test_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    classifiers: Vec<usize>,
    #[arg(long, default_value = "full", value_parser = ["full", "reduced", "small"])]
    grid: String,
    /// Keep at most this many grid points per classifier.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    noise: f64,
    #[command(flatten)]
    optim: OptimArgs,
    /// Directory for per-run metrics, the summary and the manifest.
    #[arg(long, default_value = "table2")]
    out_dir: PathBuf,
}

/// Failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<HmpError> for Failure {
    fn from(e: HmpError) -> Self {
        let code = match e {
            HmpError::EmptyGrid(_) => EXIT_EMPTY_GRID,
            HmpError::Config(_) | HmpError::Spec(_) => EXIT_USAGE,
            _ => EXIT_IO,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: msg.into() }
}

fn io_fail(path: &Path, e: HmpError) -> Failure {
    Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    let started = Instant::now();
    let res = match cli.command {
        Command::Generate(a) => generate(a, &argv, started, out),
        Command::Train(a) => train(a, &argv, started, out, err),
        Command::Eval(a) => eval(a, &argv, started, out),
        Command::Verify(a) => verify_cmd(a, &argv, started, out),
        Command::Bounds(a) => bounds(a, out),
        Command::ReproduceTable2(a) => reproduce(a, &argv, started, out),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn manifest(command: &str, argv: &str, seed: u64) -> KeyValues {
    let mut kv = KeyValues::new();
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    kv.set("command", command)
        .set("argv", argv)
        .set("seed", seed)
        .set("crate_version", env!("CARGO_PKG_VERSION"))
        .set("generator_version", GENERATOR_VERSION)
        .set("started_unix", now);
    kv
}

fn finish_manifest(mut kv: KeyValues, started: Instant, path: &Path) -> CmdResult {
    kv.set("elapsed_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
    kv.save(path).map_err(|e| io_fail(path, e))
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn config_entries(cfg: &TrainConfig, kv: &mut KeyValues) {
    kv.set("learning_rate", cfg.learning_rate)
        .set("moments", format!("{},{}", cfg.moments.0, cfg.moments.1))
        .set("epsilon", cfg.epsilon)
        .set("epochs", cfg.epochs)
        .set("batch_size", cfg.batch_size)
        .set("init", cfg.init.id())
        .set("c4", cfg.c4)
        .set("restarts", cfg.restarts)
        .set("weight_guard", cfg.weight_guard);
}

fn generate(a: GenerateArgs, argv: &str, started: Instant, out: &mut dyn Write) -> CmdResult {
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(usage("--noise must be a nonnegative number"));
    }
    let ds = datagen::generate(a.n as usize, a.seed, a.noise);
    datagen::save(&ds, &a.out).map_err(|e| io_fail(&a.out, e))?;
    let mut kv = manifest("generate", argv, a.seed);
    kv.set("n", a.n).set("noise", a.noise).set("image", "31,31").set("output", a.out.display());
    let mpath = a.manifest.unwrap_or_else(|| with_suffix(&a.out, ".manifest"));
    finish_manifest(kv, started, &mpath)?;
    let _ = writeln!(out, "wrote {} images to {}", a.n, a.out.display());
    Ok(())
}

fn grid_for(name: &str, j: usize, budget: Option<usize>) -> SelectionGrid {
    let mut g = SelectionGrid::named(name, &[j]).expect("validated by the parser");
    g.budget = budget;
    g
}

fn train(a: TrainArgs, argv: &str, started: Instant, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let data = datagen::load(&a.data).map_err(|e| io_fail(&a.data, e))?;
    let cfg = a.optim.config(a.seed);
    cfg.validate()?;
    let grid = grid_for(&a.grid, a.classifier as usize, a.budget);
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".report"));
    let sel = match training::model_select_observed(&grid, &data, &cfg, |c| {
        let _ = writeln!(err, "candidate {}", c.line());
    }) {
        Ok(s) => s,
        Err(HmpError::EmptyGrid(m)) => {
            let text = format!("# empty grid: {m}\n");
            std::fs::write(&report_path, &text).map_err(|e| io_fail(&report_path, e.into()))?;
            return Err(HmpError::EmptyGrid(m).into());
        }
        Err(e) => return Err(e.into()),
    };
    std::fs::write(&report_path, sel.report_text()).map_err(|e| io_fail(&report_path, e.into()))?;
    let beta = cfg.beta(data.len());
    let mut extra = KeyValues::new();
    extra.set("beta", beta);
    hio::save_weights(&sel.net, &extra, &a.out).map_err(|e| io_fail(&a.out, e))?;
    let mut kv = manifest("train", argv, a.seed);
    config_entries(&cfg, &mut kv);
    kv.set("data", a.data.display())
        .set("classifier", a.classifier)
        .set("grid", &a.grid)
        .set("budget", a.budget.map_or("none".to_string(), |b| b.to_string()))
        .set("selected", sel.report[sel.winner].line())
        .set("output", a.out.display())
        .set("report", report_path.display());
    let mpath = a.manifest.unwrap_or_else(|| with_suffix(&a.out, ".manifest"));
    finish_manifest(kv, started, &mpath)?;
    let _ = writeln!(out, "selected {}", sel.report[sel.winner].line());
    let _ = writeln!(out, "wrote {} and {}", a.out.display(), report_path.display());
    Ok(())
}

fn eval(a: EvalArgs, argv: &str, started: Instant, out: &mut dyn Write) -> CmdResult {
    if !a.aggregate.is_empty() {
        let mut values = Vec::with_capacity(a.aggregate.len());
        for p in &a.aggregate {
            let kv = KeyValues::load(p).map_err(|e| io_fail(p, e))?;
            values.push(kv.parse::<f64>(&a.key).map_err(|e| io_fail(p, e))?);
        }
        let (m, iqr) = hio::median_iqr(&values).ok_or_else(|| usage("metric values are not numbers"))?;
        let _ = writeln!(out, "files {}", values.len());
        let _ = writeln!(out, "median {m:.4}");
        let _ = writeln!(out, "iqr {iqr:.4}");
        return Ok(());
    }
    let wpath = a.weights.expect("required by the argument group");
    let dpath = a.data.expect("required with --weights");
    let (net, header) = hio::load_weights(&wpath).map_err(|e| io_fail(&wpath, e))?;
    let data = datagen::load(&dpath).map_err(|e| io_fail(&dpath, e))?;
    if data.is_empty() {
        return Err(io_fail(&dpath, HmpError::Shape("empty dataset".into())));
    }
    if data.dims() != net.arch().image {
        return Err(io_fail(
            &dpath,
            HmpError::Shape(format!("images {:?} do not match network input {:?}", data.dims(), net.arch().image)),
        ));
    }
    let beta = header.parse::<f64>("beta").unwrap_or(1.0);
    let err = training::empirical_misclassification(&net, beta, &data).map_err(|e| io_fail(&dpath, e))?;
    let l2 = training::empirical_l2_risk(&net, &data).map_err(|e| io_fail(&dpath, e))?;
    let mut metrics = KeyValues::new();
    metrics
        .set("misclassification", format!("{err:.6}"))
        .set("l2_risk", format!("{l2:.6}"))
        .set("n", data.len())
        .set("weights", wpath.display())
        .set("data", dpath.display());
    let mpath = a.metrics.unwrap_or_else(|| with_suffix(&wpath, ".metrics"));
    metrics.save(&mpath).map_err(|e| io_fail(&mpath, e))?;
    let mut kv = manifest("eval", argv, 0);
    kv.set("metrics", mpath.display());
    finish_manifest(kv, started, &with_suffix(&mpath, ".manifest"))?;
    let _ = writeln!(out, "misclassification {err:.4}");
    Ok(())
}

fn verify_cmd(a: VerifyArgs, argv: &str, started: Instant, out: &mut dyn Write) -> CmdResult {
    let cfg = VerifyConfig {
        trials: a.trials as usize,
        seed: a.seed,
        sabotage: a.sabotage.as_deref().and_then(Suite::from_name),
        max_level: a.exhaustive_l as usize,
    };
    let only = a.only.as_deref().and_then(Suite::from_name);
    let reports = verify::run_all(&cfg, only)?;
    for r in &reports {
        let _ = writeln!(out, "{}", r.line());
    }
    if let Some(p) = &a.manifest {
        let mut kv = manifest("verify", argv, a.seed);
        kv.set("trials", a.trials).set("passed", reports.iter().all(|r| r.passed));
        finish_manifest(kv, started, p)?;
    }
    match verify::first_failure(&reports) {
        Some(e) => Err(Failure { code: EXIT_VERIFY, message: e.to_string() }),
        None => Ok(()),
    }
}

/// Parses `l=3,n=2,2,b=2,2`: a token without `=` extends the previous key.
fn parse_theta(s: &str) -> std::result::Result<(usize, Vec<usize>, Vec<usize>), Failure> {
    let (mut l, mut n, mut b) = (None, Vec::new(), Vec::new());
    let mut key = "";
    for tok in s.split(',').map(str::trim) {
        let val = match tok.split_once('=') {
            Some((k, v)) => {
                key = k.trim();
                v.trim()
            }
            None => tok,
        };
        let v: usize = val.parse().map_err(|_| usage(format!("bad number {val:?} in --theta-from")))?;
        match key {
            "l" if l.is_none() => l = Some(v),
            "n" => n.push(v),
            "b" => b.push(v),
            _ => return Err(usage(format!("unexpected {tok:?} in --theta-from"))),
        }
    }
    let l = l.ok_or_else(|| usage("--theta-from needs l=<level>"))?;
    if l >= 2 && n.is_empty() {
        n = vec![1; l - 1];
    }
    if l >= 2 && b.is_empty() {
        b = vec![1; l - 1];
    }
    Ok((l, n, b))
}

fn bounds(a: BoundsArgs, out: &mut dyn Write) -> CmdResult {
    if !(a.p >= 1.0 && a.p.is_finite()) {
        return Err(usage("--p must be at least 1"));
    }
    if !(a.n >= 1.0 && a.n.is_finite()) {
        return Err(usage("--n must be at least 1"));
    }
    let (l, n, b) = parse_theta(&a.theta_from)?;
    let t = theorem1_params(l, &b, &n, a.ln, a.c2, a.d, a.d)?;
    let line = |name: &str, arch: &ArchSpec| {
        format!(
            "{name} {} weights {} vc_shape {:.6}",
            arch.describe(),
            param_count(arch),
            vc_bound_shape(arch.depth, a.d, a.d)
        )
    };
    let _ = writeln!(out, "{}", line("theta1", &t.theta1));
    let _ = writeln!(out, "{}", line("theta2", &t.theta2));
    let _ = writeln!(out, "{}", line("theta3", &t.theta3));
    let _ = writeln!(out, "rate n {} p {} value {:.6}", a.n, a.p, rate_curve(a.n, a.p));
    for &m in &a.table {
        let _ = writeln!(out, "rate n {m} p {} value {:.6}", a.p, rate_curve(m, a.p));
    }
    Ok(())
}

fn reproduce(a: ReproduceArgs, argv: &str, started: Instant, out: &mut dyn Write) -> CmdResult {
    if a.classifiers.iter().any(|&j| !(1..=4).contains(&j)) {
        return Err(usage("classifiers must lie in 1..4"));
    }
    if a.sizes.iter().any(|&n| n < 5) || a.test_size == 0 {
        return Err(usage("sizes must be at least 5 and the test size positive"));
    }
    let mut grid = SelectionGrid::named(&a.grid, &[]).expect("validated by the parser");
    grid.budget = a.budget;
    let cfg = ReplicationConfig {
        sizes: a.sizes.clone(),
        runs: a.runs as usize,
        test_size: a.test_size,
        classifiers: a.classifiers.clone(),
        grid,
        train: a.optim.config(a.seed),
        seed: a.seed,
        noise: a.noise,
    };
    cfg.train.validate()?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_fail(&a.out_dir, e.into()))?;
    let mut write_err = None;
    let results = training::replicate(&cfg, |r| {
        let mut kv = KeyValues::new();
        kv.set("misclassification", format!("{:.6}", r.test_err))
            .set("n", r.n)
            .set("run", r.run)
            .set("classifier", r.j)
            .set("selected", &r.winner);
        let p = a.out_dir.join(format!("n{}_run{}_f{}.metrics", r.n, r.run, r.j));
        if let Err(e) = kv.save(&p) {
            write_err.get_or_insert(io_fail(&p, e));
        }
        let _ = writeln!(out, "run n {} run {} classifier {} error {:.4}", r.n, r.run, r.j, r.test_err);
    });
    if let Some(f) = write_err {
        return Err(f);
    }
    let results = results?;
    let mut table = String::from("# classifier n median iqr runs\n");
    for s in training::summarize(&results) {
        table.push_str(&format!("{} {} {:.4} {:.4} {}\n", s.j, s.n, s.median, s.iqr, s.runs));
    }
    let tpath = a.out_dir.join("summary.txt");
    std::fs::write(&tpath, &table).map_err(|e| io_fail(&tpath, e.into()))?;
    let _ = write!(out, "{table}");
    let mut kv = manifest("reproduce-table2", argv, a.seed);
    config_entries(&cfg.train, &mut kv);
    kv.set("runs", a.runs)
        .set("sizes", a.sizes.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .set("test_size", a.test_size)
        .set("grid", &a.grid)
        .set("noise", a.noise)
        .set("summary", tpath.display());
    finish_manifest(kv, started, &a.out_dir.join("manifest"))?;
    Ok(())
}
