//! Least-squares training, truncation, plug-in classification and
//! splitting-of-the-sample model selection.

use rand::seq::SliceRandom;

use crate::datagen::Dataset;
use crate::error::{HmpError, Result};
use crate::model::{admissible_pooling, ImageGrid};
use crate::networks::backprop::loss_and_gradients;
use crate::networks::params::{param_count, table1_params};
use crate::networks::{join, ArchSpec, Network, Variant};
use crate::rng::{derive_seed, stream, Purpose};

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Filters uniform in `+-sqrt(6 / fan_in)`, biases zero, output weights
    /// uniform in `+-1/sqrt(k_L)`.
    UniformFanIn,
}

impl InitScheme {
    pub fn id(self) -> &'static str {
        match self {
            InitScheme::UniformFanIn => "uniform-fan-in",
        }
    }
}

/// Optimizer and estimator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Adam moment decays `(beta1, beta2)`.
    pub moments: (f64, f64),
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init: InitScheme,
    pub seed: u64,
    /// Truncation constant: `beta = max(1, c4 ln n)`.
    pub c4: f64,
    /// Independent initializations; the lowest final training risk wins.
    pub restarts: usize,
    /// Drop grid points with more weights than data points.
    pub weight_guard: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            moments: (0.9, 0.999),
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            init: InitScheme::UniformFanIn,
            seed: 0,
            c4: 1.0,
            restarts: 1,
            weight_guard: true,
        }
    }
}

impl TrainConfig {
    /// Truncation level for sample size `n`.
    pub fn beta(&self, n: usize) -> f64 {
        (self.c4 * (n.max(1) as f64).ln()).max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.moments;
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&b1)
            && (0.0..1.0).contains(&b2)
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.restarts > 0
            && self.c4 > 0.0;
        if !ok {
            return Err(HmpError::config(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }

    /// Copy with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig { seed, ..self.clone() }
    }
}

/// `max(-beta, min(beta, v))`.
pub fn truncate(v: f64, beta: f64) -> f64 {
    v.clamp(-beta, beta)
}

/// `1` iff the truncated network output is at least `1/2`.
pub fn plugin_classify(net: &Network, beta: f64, x: &ImageGrid) -> Result<u8> {
    Ok(label_of(net.forward(x)?, beta))
}

/// Plug-in label of a raw network output.
pub fn label_of(value: f64, beta: f64) -> u8 {
    u8::from(truncate(value, beta) >= 0.5)
}

/// `(1/n) sum (y_i - f(x_i))^2`.
pub fn empirical_l2_risk(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(HmpError::config("risk of an empty dataset"));
    }
    let mut s = 0.0;
    for (x, y) in data.items() {
        s += (f64::from(*y) - net.forward(x)?).powi(2);
    }
    Ok(s / data.len() as f64)
}

/// Fraction of items whose plug-in label differs from the true label.
pub fn empirical_misclassification(net: &Network, beta: f64, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(HmpError::config("misclassification risk of an empty dataset"));
    }
    let mut wrong = 0usize;
    for (x, y) in test.items() {
        wrong += usize::from(plugin_classify(net, beta, x)? != *y);
    }
    Ok(wrong as f64 / test.len() as f64)
}

/// Result of [`train_with_history`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Network,
    /// Mean mini-batch loss per epoch of the winning restart.
    pub epoch_losses: Vec<f64>,
    /// Training risk of the returned weights.
    pub final_risk: f64,
    /// Index of the winning restart.
    pub restart: usize,
    /// True if the network has more weights than data points.
    pub over_parameterized: bool,
}

/// Mini-batch Adam on the squared loss; returns the trained network.
pub fn train(arch: &ArchSpec, data: &Dataset, cfg: &TrainConfig) -> Result<Network> {
    Ok(train_with_history(arch, data, cfg)?.net)
}

/// As [`train`], also reporting per-epoch losses.
///
/// Restart `r` draws its initialization from stream `(seed, Init, r)` and its
/// batch order from `(seed, Shuffle, r)`.
pub fn train_with_history(arch: &ArchSpec, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    arch.validate()?;
    if data.is_empty() {
        return Err(HmpError::config("training on an empty dataset"));
    }
    if data.dims() != arch.image {
        return Err(HmpError::shape(format!("data {:?} does not match network input {:?}", data.dims(), arch.image)));
    }
    let mut best: Option<TrainOutcome> = None;
    for r in 0..cfg.restarts {
        let net = Network::init(arch.clone(), &mut stream(cfg.seed, Purpose::Init, r as u64))?;
        let (net, epoch_losses) = adam(net, data, cfg, r as u64)?;
        let final_risk = empirical_l2_risk(&net, data)?;
        if best.as_ref().is_none_or(|b| final_risk < b.final_risk) {
            let over_parameterized = net.param_count() > data.len();
            best = Some(TrainOutcome { net, epoch_losses, final_risk, restart: r, over_parameterized });
        }
    }
    Ok(best.expect("at least one restart"))
}

fn adam(mut net: Network, data: &Dataset, cfg: &TrainConfig, restart: u64) -> Result<(Network, Vec<f64>)> {
    let (b1, b2) = cfg.moments;
    let mut p = net.flat_params();
    let mut m = vec![0.0; p.len()];
    let mut v = vec![0.0; p.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = stream(cfg.seed, Purpose::Shuffle, restart);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut t = 0i32;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&ImageGrid, u8)> = chunk.iter().map(|&i| (&data.items()[i].0, data.items()[i].1)).collect();
            let (loss, grads) = loss_and_gradients(&net, &batch)?;
            if !loss.is_finite() {
                return Err(HmpError::Divergence { epoch, loss });
            }
            sum += loss * chunk.len() as f64;
            let g = grads.flatten();
            t += 1;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
            }
            net.set_flat_params(&p)?;
        }
        let mean = sum / data.len() as f64;
        if !mean.is_finite() || p.iter().any(|w| !w.is_finite()) {
            return Err(HmpError::Divergence { epoch, loss: mean });
        }
        losses.push(mean);
    }
    Ok((net, losses))
}

/// Adaptive parameter grid.
///
/// Points are enumerated in canonical order: classifier `j`, level `l`,
/// pooling vector `n` (lexicographic), channels `k`, depth `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionGrid {
    pub classifiers: Vec<usize>,
    pub levels: Vec<usize>,
    /// Pooling vectors to use; `None` takes every admissible vector of each level.
    pub pooling: Option<Vec<Vec<usize>>>,
    pub channels: Vec<usize>,
    pub depths: Vec<usize>,
    /// Keep at most this many admissible points, evenly spaced in canonical order.
    pub budget: Option<usize>,
}

/// One point of a [`SelectionGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub j: usize,
    pub l: usize,
    pub n: Vec<usize>,
    pub k: usize,
    pub z: usize,
    pub arch: ArchSpec,
    pub weights: usize,
}

impl SelectionGrid {
    /// The full grid: `l in {3,4}`, `k in {2,4,8}`, `z in {1,2,3}`.
    pub fn full(classifiers: &[usize]) -> Self {
        SelectionGrid {
            classifiers: classifiers.to_vec(),
            levels: vec![3, 4],
            pooling: None,
            channels: vec![2, 4, 8],
            depths: vec![1, 2, 3],
            budget: None,
        }
    }

    /// `l = 3`, `k in {4,8}`, `z in {1,2}`.
    pub fn reduced(classifiers: &[usize]) -> Self {
        SelectionGrid { levels: vec![3], channels: vec![4, 8], depths: vec![1, 2], ..Self::full(classifiers) }
    }

    /// `l = 3`, `k = 2`, `z = 1`, pooling `(1,1)` and `(2,2)`.
    pub fn small(classifiers: &[usize]) -> Self {
        SelectionGrid {
            classifiers: classifiers.to_vec(),
            levels: vec![3],
            pooling: Some(vec![vec![1, 1], vec![2, 2]]),
            channels: vec![2],
            depths: vec![1],
            budget: None,
        }
    }

    /// Named grid: `full`, `reduced` or `small`.
    pub fn named(name: &str, classifiers: &[usize]) -> Option<Self> {
        match name {
            "full" => Some(Self::full(classifiers)),
            "reduced" => Some(Self::reduced(classifiers)),
            "small" => Some(Self::small(classifiers)),
            _ => None,
        }
    }

    /// Every grid point for `d1 x d2` images in canonical order.
    pub fn points(&self, d1: usize, d2: usize) -> Result<Vec<GridPoint>> {
        let mut out = Vec::new();
        for &j in &self.classifiers {
            for &l in &self.levels {
                let pools = match &self.pooling {
                    Some(p) => p.iter().filter(|v| v.len() + 1 == l).cloned().collect(),
                    None => admissible_pooling(l),
                };
                for n in pools {
                    for &k in &self.channels {
                        for &z in &self.depths {
                            let arch = table1_params(j, l, &n, k, z, d1, d2)?;
                            let weights = param_count(&arch);
                            out.push(GridPoint { j, l, n: n.clone(), k, z, arch, weights });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Points kept by the weight guard `W <= n_data` (all points if `guard`
    /// is off), thinned to the budget.
    pub fn admissible(&self, d1: usize, d2: usize, n_data: usize, guard: bool) -> Result<Vec<GridPoint>> {
        let kept: Vec<GridPoint> = self.points(d1, d2)?.into_iter().filter(|p| !guard || p.weights <= n_data).collect();
        Ok(match self.budget {
            Some(b) if b < kept.len() => (0..b).map(|i| kept[i * kept.len() / b].clone()).collect(),
            _ => kept,
        })
    }
}

/// One line of the selection report.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateReport {
    pub point: GridPoint,
    /// Training risk on the learning sample.
    pub train_risk: f64,
    /// Misclassification risk on the testing sample.
    pub test_err: f64,
    pub selected: bool,
}

impl CandidateReport {
    /// `j l n-vector k z W train_risk test_err selected?`
    pub fn line(&self) -> String {
        let p = &self.point;
        format!(
            "{} {} {} {} {} {} {:.6} {:.4} {}",
            p.j,
            p.l,
            join(&p.n),
            p.k,
            p.z,
            p.weights,
            self.train_risk,
            self.test_err,
            if self.selected { "yes" } else { "no" }
        )
    }
}

/// Outcome of [`model_select`].
#[derive(Debug, Clone)]
pub struct Selection {
    /// Winner retrained on all data.
    pub net: Network,
    /// Candidates in canonical grid order.
    pub report: Vec<CandidateReport>,
    /// Index of the winner in `report`.
    pub winner: usize,
    pub n_learn: usize,
    pub n_test: usize,
}

impl Selection {
    /// Report lines, one candidate per line.
    pub fn report_text(&self) -> String {
        let mut s = String::from("# j l n k z W train_risk test_err selected\n");
        for c in &self.report {
            s.push_str(&c.line());
            s.push('\n');
        }
        s
    }
}

/// `(floor(4n/5), n - floor(4n/5))`.
pub fn split_sizes(n: usize) -> (usize, usize) {
    let learn = 4 * n / 5;
    (learn, n - learn)
}

/// Trains every admissible grid point on the first `floor(4n/5)` items,
/// selects by misclassification on the rest (ties to the earliest point),
/// then retrains the winner on all items.
///
/// Candidate `i` trains with seed `derive_seed(cfg.seed, Grid, i)`. Points
/// with identical architectures share the run of the first one.
pub fn model_select(grid: &SelectionGrid, data: &Dataset, cfg: &TrainConfig) -> Result<Selection> {
    model_select_observed(grid, data, cfg, |_| {})
}

/// As [`model_select`], calling `observe` after each candidate.
pub fn model_select_observed(
    grid: &SelectionGrid,
    data: &Dataset,
    cfg: &TrainConfig,
    observe: impl FnMut(&CandidateReport),
) -> Result<Selection> {
    model_select_cached(grid, data, cfg, &mut TrainCache::default(), observe)
}

/// Architecture with pooling removed when every pool size is 1: such F1,
/// F2 and F3 networks compute exactly the F4 function with the same weights.
pub fn canonical_arch(arch: &ArchSpec) -> ArchSpec {
    if arch.pool.iter().all(|&s| s == 1) {
        ArchSpec { variant: Variant::F4, pool: vec![1], ..arch.clone() }
    } else {
        arch.clone()
    }
}

/// Training results reused across selections on the same dataset and
/// configuration, keyed by canonical architecture and seed.
#[derive(Debug, Default)]
pub struct TrainCache {
    split: Vec<(ArchSpec, u64, f64, f64)>,
    full: Vec<(ArchSpec, u64, Network)>,
}

impl TrainCache {
    /// Number of distinct training runs stored.
    pub fn runs(&self) -> usize {
        self.split.len() + self.full.len()
    }
}

/// As [`model_select_observed`], sharing runs through `cache`. The cache must
/// only be reused with the same `data` and `cfg`.
pub fn model_select_cached(
    grid: &SelectionGrid,
    data: &Dataset,
    cfg: &TrainConfig,
    cache: &mut TrainCache,
    mut observe: impl FnMut(&CandidateReport),
) -> Result<Selection> {
    cfg.validate()?;
    if data.len() < 5 {
        return Err(HmpError::config(format!("model selection needs at least 5 items, got {}", data.len())));
    }
    let (d1, d2) = data.dims();
    let points = grid.admissible(d1, d2, data.len(), cfg.weight_guard)?;
    if points.is_empty() {
        return Err(HmpError::EmptyGrid(format!("every grid point has more than {} weights", data.len())));
    }
    let (n_learn, n_test) = split_sizes(data.len());
    let learn = data.slice(0..n_learn);
    let test = data.slice(n_learn..data.len());
    let beta = cfg.beta(n_learn);
    let mut seeds: Vec<(ArchSpec, u64)> = Vec::new();
    let mut report = Vec::with_capacity(points.len());
    for (i, point) in points.into_iter().enumerate() {
        let seed = match seeds.iter().find(|s| s.0 == point.arch) {
            Some(s) => s.1,
            None => {
                let seed = derive_seed(cfg.seed, Purpose::Grid, i as u64);
                seeds.push((point.arch.clone(), seed));
                seed
            }
        };
        let key = canonical_arch(&point.arch);
        let (train_risk, test_err) = match cache.split.iter().find(|c| c.0 == key && c.1 == seed) {
            Some(c) => (c.2, c.3),
            None => {
                let out = train_with_history(&point.arch, &learn, &cfg.with_seed(seed))?;
                let err = empirical_misclassification(&out.net, beta, &test)?;
                cache.split.push((key, seed, out.final_risk, err));
                (out.final_risk, err)
            }
        };
        let c = CandidateReport { point, train_risk, test_err, selected: false };
        observe(&c);
        report.push(c);
    }
    let mut winner = 0;
    for (i, c) in report.iter().enumerate() {
        if c.test_err < report[winner].test_err {
            winner = i;
        }
    }
    report[winner].selected = true;
    let arch = report[winner].point.arch.clone();
    let seed = seeds.iter().find(|s| s.0 == arch).expect("seeded").1;
    let key = canonical_arch(&arch);
    let net = match cache.full.iter().find(|c| c.0 == key && c.1 == seed) {
        Some(c) => Network::new(arch, c.2.blocks().to_vec(), c.2.out_weights().to_vec())?,
        None => {
            let net = train(&arch, data, &cfg.with_seed(seed))?;
            cache.full.push((key, seed, net.clone()));
            net
        }
    };
    Ok(Selection { net, report, winner, n_learn, n_test })
}

/// Repeated selection experiment: for every sample size and run, one
/// training set and one test set shared by all classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationConfig {
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub test_size: usize,
    pub classifiers: Vec<usize>,
    /// Grid template; its classifier list is replaced per classifier.
    pub grid: SelectionGrid,
    pub train: TrainConfig,
    pub seed: u64,
    pub noise: f64,
}

/// One classifier's result in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub n: usize,
    pub run: usize,
    pub j: usize,
    /// Misclassification risk on the independent test set.
    pub test_err: f64,
    /// Report line of the selected grid point.
    pub winner: String,
}

/// Runs the experiment, calling `observe` after every classifier.
///
/// Run `r` at size `n` draws its training set with seed
/// `derive_seed(seed, Run, 4 r)` mixed with `n`, its test set with
/// `4 r + 1`, and trains with `4 r + 2`.
pub fn replicate(cfg: &ReplicationConfig, mut observe: impl FnMut(&RunResult)) -> Result<Vec<RunResult>> {
    let mut out = Vec::new();
    for &n in &cfg.sizes {
        for r in 0..cfg.runs {
            let base = derive_seed(cfg.seed, Purpose::Run, n as u64);
            let data = crate::datagen::generate(n, derive_seed(base, Purpose::Run, 4 * r as u64), cfg.noise);
            let test =
                crate::datagen::generate(cfg.test_size, derive_seed(base, Purpose::Run, 4 * r as u64 + 1), cfg.noise);
            let train_cfg = cfg.train.with_seed(derive_seed(base, Purpose::Run, 4 * r as u64 + 2));
            let mut cache = TrainCache::default();
            for &j in &cfg.classifiers {
                let grid = SelectionGrid { classifiers: vec![j], ..cfg.grid.clone() };
                let sel = model_select_cached(&grid, &data, &train_cfg, &mut cache, |_| {})?;
                let test_err = empirical_misclassification(&sel.net, train_cfg.beta(n), &test)?;
                let res = RunResult { n, run: r, j, test_err, winner: sel.report[sel.winner].line() };
                observe(&res);
                out.push(res);
            }
        }
    }
    Ok(out)
}

/// Median and interquartile range of the test errors per classifier and size.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub j: usize,
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    pub runs: usize,
}

/// Summaries in order of first appearance of `(j, n)`.
pub fn summarize(results: &[RunResult]) -> Vec<Summary> {
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for r in results {
        if !keys.contains(&(r.j, r.n)) {
            keys.push((r.j, r.n));
        }
    }
    keys.into_iter()
        .map(|(j, n)| {
            let errs: Vec<f64> = results.iter().filter(|r| r.j == j && r.n == n).map(|r| r.test_err).collect();
            let (median, iqr) = crate::io::median_iqr(&errs).expect("nonempty");
            Summary { j, n, median, iqr, runs: errs.len() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{ConvBlock, ConvLayer};
    use crate::networks::Variant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `f(x) = w_out * relu(w * x + b)` on a 1x1 image.
    fn probe(w: f64, b: f64, w_out: f64) -> Network {
        let arch = ArchSpec {
            variant: Variant::F4,
            image: (1, 1),
            channels: vec![1],
            filters: vec![1],
            depth: 1,
            pool: vec![1],
            window: (1, 1),
        };
        let layer = ConvLayer::new(1, 1, 1, vec![w], vec![b]).unwrap();
        Network::new(arch, vec![ConvBlock::new(vec![layer]).unwrap()], vec![w_out]).unwrap()
    }

    fn points(values: &[(f64, u8)]) -> Dataset {
        Dataset::new(values.iter().map(|&(v, y)| (ImageGrid::constant(1, 1, v).unwrap(), y)).collect()).unwrap()
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(0.4, 1.0), 0.4);
        assert_eq!(truncate(7.0, 2.0), 2.0);
        assert_eq!(truncate(-7.0, 2.0), -2.0);
    }

    #[test]
    fn plugin_examples() {
        let x = ImageGrid::constant(1, 1, 1.0).unwrap();
        let beta = TrainConfig::default().beta(400);
        assert_eq!(plugin_classify(&probe(0.0, 0.49, 1.0), beta, &x).unwrap(), 0);
        assert_eq!(plugin_classify(&probe(0.0, 0.5, 1.0), beta, &x).unwrap(), 1);
        assert_eq!(plugin_classify(&probe(0.0, 10.0, 1.0), 2.0 * 400f64.ln(), &x).unwrap(), 1);
    }

    #[test]
    fn beta_is_at_least_one() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.beta(1), 1.0);
        assert_eq!(cfg.beta(2), 1.0);
        assert!((cfg.beta(400) - 400f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn risk_examples() {
        let zero = probe(0.0, 0.0, 0.0);
        assert_eq!(empirical_l2_risk(&zero, &points(&[(0.2, 0), (0.7, 0)])).unwrap(), 0.0);
        assert_eq!(empirical_l2_risk(&zero, &points(&[(0.2, 1), (0.7, 1)])).unwrap(), 1.0);
        let half = probe(0.0, 0.5, 1.0);
        assert_eq!(empirical_l2_risk(&half, &points(&[(0.2, 0), (0.7, 1)])).unwrap(), 0.25);
        assert!(empirical_l2_risk(&zero, &points(&[])).is_err());
        assert_eq!(empirical_misclassification(&zero, 1.0, &points(&[(0.1, 1), (0.3, 1)])).unwrap(), 1.0);
        assert!(empirical_misclassification(&zero, 1.0, &points(&[])).is_err());
        // Identity probe thresholds the pixel at 1/2.
        let id = probe(1.0, 0.0, 1.0);
        assert_eq!(empirical_misclassification(&id, 1.0, &points(&[(0.1, 0), (0.9, 1)])).unwrap(), 0.0);
    }

    #[test]
    fn misclassification_of_constant_matches_label_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let p = 0.3;
        let data = points(&(0..n).map(|_| (0.0, u8::from(rng.random::<f64>() < p))).collect::<Vec<_>>());
        let err = empirical_misclassification(&probe(0.0, 0.0, 0.0), 1.0, &data).unwrap();
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((err - p).abs() < 3.0 * sd, "err {err}");
    }

    fn linear_task() -> (ArchSpec, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = points(&(0..64).map(|_| rng.random::<f64>()).map(|v| (v, u8::from(v > 0.5))).collect::<Vec<_>>());
        (probe(0.0, 0.0, 0.0).arch().clone(), data)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (arch, data) = linear_task();
        let cfg = TrainConfig { epochs: 0, seed: 3, ..TrainConfig::default() };
        let net = train(&arch, &data, &cfg).unwrap();
        let init = Network::init(arch, &mut stream(3, Purpose::Init, 0)).unwrap();
        assert_eq!(net.flat_params(), init.flat_params());
    }

    #[test]
    fn training_is_deterministic_and_reduces_risk() {
        let (arch, data) = linear_task();
        for seed in 0..5 {
            let cfg = TrainConfig { epochs: 40, learning_rate: 1e-2, seed, ..TrainConfig::default() };
            let a = train_with_history(&arch, &data, &cfg).unwrap();
            let b = train_with_history(&arch, &data, &cfg).unwrap();
            assert_eq!(a.net.flat_params(), b.net.flat_params());
            let init = Network::init(arch.clone(), &mut stream(seed, Purpose::Init, 0)).unwrap();
            assert!(a.final_risk <= empirical_l2_risk(&init, &data).unwrap());
            assert!(a.epoch_losses.last() <= a.epoch_losses.first());
        }
    }

    #[test]
    fn restarts_keep_the_lowest_risk() {
        let (arch, data) = linear_task();
        let cfg = TrainConfig { epochs: 5, restarts: 3, seed: 1, ..TrainConfig::default() };
        let best = train_with_history(&arch, &data, &cfg).unwrap();
        for r in 0..3 {
            let net = Network::init(arch.clone(), &mut stream(1, Purpose::Init, r)).unwrap();
            let (net, _) = adam(net, &data, &cfg, r).unwrap();
            assert!(best.final_risk <= empirical_l2_risk(&net, &data).unwrap());
        }
    }

    #[test]
    fn divergence_is_reported() {
        let (arch, data) = linear_task();
        let cfg = TrainConfig { epochs: 3, learning_rate: f64::INFINITY, ..TrainConfig::default() };
        assert!(matches!(train(&arch, &data, &cfg), Err(HmpError::Divergence { .. })));
    }

    #[test]
    fn split_arithmetic() {
        for n in 5..500 {
            let (a, b) = split_sizes(n);
            assert_eq!(a + b, n);
            assert_eq!(a, (0.8 * n as f64).floor() as usize);
        }
        assert_eq!(split_sizes(400), (320, 80));
    }

    #[test]
    fn guard_over_full_grid() {
        let grid = SelectionGrid::full(&[1, 2, 3, 4]);
        let all = grid.points(31, 31).unwrap();
        let kept = grid.admissible(31, 31, 200, true).unwrap();
        assert!(!kept.is_empty() && kept.len() < all.len());
        assert!(kept.iter().all(|p| p.weights <= 200 && p.weights == param_count(&p.arch)));
        let dropped = all.iter().filter(|p| p.weights > 200).count();
        assert_eq!(kept.len() + dropped, all.len());
        // Canonical order starts with classifier 1, level 3, pooling (1,1), k = 2, z = 1.
        assert_eq!((all[0].j, all[0].l, all[0].n.clone(), all[0].k, all[0].z), (1, 3, vec![1, 1], 2, 1));
    }

    fn tiny_grid_data() -> Dataset {
        crate::datagen::generate(20, 2, 0.05)
    }

    #[test]
    fn single_point_grid_wins_and_retrains_on_all() {
        let data = tiny_grid_data();
        let grid = SelectionGrid {
            classifiers: vec![4],
            levels: vec![3],
            pooling: Some(vec![vec![1, 1]]),
            channels: vec![1],
            depths: vec![1],
            budget: None,
        };
        let cfg = TrainConfig { epochs: 2, weight_guard: false, ..TrainConfig::default() };
        let sel = model_select(&grid, &data, &cfg).unwrap();
        assert_eq!((sel.winner, sel.report.len(), sel.n_learn, sel.n_test), (0, 1, 16, 4));
        assert!(sel.report[0].selected);
        let seed = derive_seed(cfg.seed, Purpose::Grid, 0);
        let direct = train(&sel.report[0].point.arch, &data, &cfg.with_seed(seed)).unwrap();
        assert_eq!(direct.flat_params(), sel.net.flat_params());
        assert_eq!(sel.report_text().lines().count(), 2);
    }

    #[test]
    fn duplicate_architectures_share_one_run() {
        let data = tiny_grid_data();
        let grid = SelectionGrid {
            classifiers: vec![4],
            levels: vec![3],
            pooling: Some(vec![vec![1, 1], vec![2, 2]]),
            channels: vec![1],
            depths: vec![1],
            budget: None,
        };
        let cfg = TrainConfig { epochs: 1, weight_guard: false, ..TrainConfig::default() };
        let sel = model_select(&grid, &data, &cfg).unwrap();
        assert_eq!(sel.report[0].train_risk, sel.report[1].train_risk);
        assert_eq!(sel.winner, 0);
    }

    #[test]
    fn empty_grid_and_small_data_are_rejected() {
        let data = tiny_grid_data();
        let grid = SelectionGrid::reduced(&[4]);
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        assert!(matches!(model_select(&grid, &data, &cfg), Err(HmpError::EmptyGrid(_))));
        assert!(model_select(&grid, &data.slice(0..4), &cfg).is_err());
    }

    #[test]
    fn equivalent_architectures_share_runs_across_classifiers() {
        let data = tiny_grid_data();
        let cfg = TrainConfig { epochs: 1, weight_guard: false, ..TrainConfig::default() };
        let grid = |j| SelectionGrid {
            classifiers: vec![j],
            levels: vec![3],
            pooling: Some(vec![vec![1, 1]]),
            channels: vec![1],
            depths: vec![1],
            budget: None,
        };
        let mut cache = TrainCache::default();
        let a = model_select_cached(&grid(1), &data, &cfg, &mut cache, |_| {}).unwrap();
        let b = model_select_cached(&grid(4), &data, &cfg, &mut cache, |_| {}).unwrap();
        assert_eq!(cache.runs(), 2);
        assert_eq!(a.net.flat_params(), b.net.flat_params());
        assert_eq!(b.net.arch().variant, Variant::F4);
        let fresh = model_select(&grid(4), &data, &cfg).unwrap();
        assert_eq!(fresh.net, b.net);
    }

    #[test]
    fn budget_thins_evenly() {
        let mut grid = SelectionGrid::reduced(&[1]);
        let all = grid.admissible(31, 31, 400, false).unwrap();
        grid.budget = Some(5);
        let some = grid.admissible(31, 31, 400, false).unwrap();
        assert_eq!(some.len(), 5);
        assert_eq!(some[0], all[0]);
        assert_eq!(some[1], all[all.len() / 5]);
    }

    #[test]
    fn replication_is_deterministic_and_summarized() {
        let cfg = ReplicationConfig {
            sizes: vec![10],
            runs: 3,
            test_size: 20,
            classifiers: vec![1, 4],
            grid: SelectionGrid {
                classifiers: vec![],
                levels: vec![3],
                pooling: Some(vec![vec![1, 1], vec![2, 2]]),
                channels: vec![1],
                depths: vec![1],
                budget: None,
            },
            train: TrainConfig { epochs: 1, weight_guard: false, ..TrainConfig::default() },
            seed: 3,
            noise: 0.05,
        };
        let a = replicate(&cfg, |_| {}).unwrap();
        assert_eq!(a, replicate(&cfg, |_| {}).unwrap());
        assert_eq!(a.len(), 6);
        let s = summarize(&a);
        assert_eq!(s.iter().map(|x| (x.j, x.runs)).collect::<Vec<_>>(), vec![(1, 3), (4, 3)]);
    }

    #[test]
    fn report_line_format() {
        let p = SelectionGrid::small(&[1]).points(31, 31).unwrap().remove(1);
        let c = CandidateReport { train_risk: 0.25, test_err: 0.125, selected: true, point: p };
        assert_eq!(c.line(), format!("1 3 2,2 2 1 {} 0.250000 0.1250 yes", c.point.weights));
    }
}
