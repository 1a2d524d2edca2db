//! Randomized and exhaustive checks of the network rewrites, the model
//! bounds, the integer identities and the gradients.
//!
//! Every suite compares an implementation against an independent oracle and
//! reports one deviation figure. Trial `t` of a suite draws from stream
//! `(seed, Verify, 1000 * suite + t)`, so a failing trial can be replayed.

use std::fmt;

use rand::Rng;

use crate::error::{HmpError, Result};
use crate::layers::{
    conv_block_forward, conv_layer_backward, conv_layer_forward, local_max_pool, local_max_pool_backward,
    local_max_pool_with_argmax, output_layer_backward, output_layer_with_argmax, subsample, subsample_backward,
    ConvBlock, ConvLayer, FeatureStack,
};
use crate::model::{
    admissible_pooling, dims, dims_closed_form, eval_model, BuiltinG, GFunction, HmpSpec, ImageGrid, Mode,
};
use crate::networks::backprop::{loss_and_gradients, Trace};
use crate::networks::params::table1_params;
use crate::networks::Network;
use crate::rng::{stream, Purpose};
use crate::transforms::{
    commute_subsample, convert_f1_to_f2, convert_f2_to_f3, embed_feedforward, maxpool_to_conv_sub, represent_hmp,
    FeedforwardNet,
};

/// Absolute tolerance of the exact rewrites.
pub const REWRITE_TOL: f64 = 1e-9;
/// Finite-difference step.
pub const FD_STEP: f64 = 1e-4;
/// Relative error allowed between analytic and numeric derivatives.
pub const FD_REL_TOL: f64 = 1e-4;
/// Minimum fraction of agreeing coordinates per gradient check.
pub const FD_MIN_AGREEMENT: f64 = 0.95;

/// Verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Max-pooling rewritten as a conv block plus subsampling.
    Maxpool,
    /// Feedforward net embedded in a conv block.
    Embed,
    /// Dilated block commuting with subsampling.
    Dilation,
    /// Ceiling identities over `1 <= a, b, c <= 50`.
    Ceiling,
    /// F1 to F2 to F3 conversion.
    Inclusion,
    /// Perturbation bound of the relaxed model.
    Perturbation,
    /// Exact network representation of the relaxed model.
    Represent,
    /// Closed form of the level dimensions.
    Dims,
    /// Finite-difference gradient checks.
    Gradcheck,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Maxpool,
        Suite::Embed,
        Suite::Dilation,
        Suite::Ceiling,
        Suite::Inclusion,
        Suite::Perturbation,
        Suite::Represent,
        Suite::Dims,
        Suite::Gradcheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Maxpool => "maxpool",
            Suite::Embed => "embed",
            Suite::Dilation => "dilation",
            Suite::Ceiling => "ceiling",
            Suite::Inclusion => "inclusion",
            Suite::Perturbation => "perturbation",
            Suite::Represent => "represent",
            Suite::Dims => "dims",
            Suite::Gradcheck => "gradcheck",
        }
    }

    pub fn from_name(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }

    fn index(self) -> u64 {
        Suite::ALL.iter().position(|&x| x == self).expect("listed") as u64
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings shared by all suites.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Random trials per randomized suite.
    pub trials: usize,
    pub seed: u64,
    /// Suite whose implementation side gets a deliberate fault.
    pub sabotage: Option<Suite>,
    /// Largest level of the dimension check.
    pub max_level: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { trials: 100, seed: 0, sabotage: None, max_level: 5 }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    /// Name of the reported figure.
    pub metric: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Number of checked cases.
    pub cases: usize,
    /// First failing trial, if any.
    pub failing_trial: Option<usize>,
    pub seed: u64,
}

impl SuiteReport {
    /// `name metric value PASS|FAIL`.
    pub fn line(&self) -> String {
        let v = if self.metric == "failures" { format!("{}", self.value) } else { format!("{:.6e}", self.value) };
        let mut s = format!("{} {} {} {}", self.suite, self.metric, v, if self.passed { "PASS" } else { "FAIL" });
        if let Some(t) = self.failing_trial {
            s.push_str(&format!(" trial {t} seed {}", self.seed));
        }
        s
    }
}

/// Running maximum that remembers the first trial over tolerance.
struct Tally {
    max: f64,
    tol: f64,
    fail: Option<usize>,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Tally { max: 0.0, tol, fail: None }
    }

    fn add(&mut self, trial: usize, v: f64) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.max = self.max.max(v);
        if v > self.tol && self.fail.is_none() {
            self.fail = Some(trial);
        }
    }
}

fn trial_rng(cfg: &VerifyConfig, suite: Suite, t: usize) -> rand_chacha::ChaCha8Rng {
    stream(cfg.seed, Purpose::Verify, 1000 * suite.index() + t as u64)
}

/// Fault added to the implementation side when `suite` is sabotaged.
fn fault(cfg: &VerifyConfig, suite: Suite, t: usize) -> f64 {
    if cfg.sabotage == Some(suite) && t == 0 {
        1e-3
    } else {
        0.0
    }
}

fn random_stack(rows: usize, cols: usize, ch: usize, rng: &mut impl Rng) -> FeatureStack {
    FeatureStack::new(rows, cols, ch, (0..rows * cols * ch).map(|_| rng.random::<f64>()).collect()).expect("sized")
}

fn random_image(d1: usize, d2: usize, rng: &mut impl Rng) -> ImageGrid {
    ImageGrid::new(d1, d2, (0..d1 * d2).map(|_| rng.random::<f64>()).collect()).expect("unit values")
}

fn random_layer(kin: usize, kout: usize, m: usize, rng: &mut impl Rng) -> ConvLayer {
    let w = (0..m * m * kin * kout).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = (0..kout).map(|_| rng.random_range(-0.5..0.5)).collect();
    ConvLayer::new(kin, kout, m, w, b).expect("sized")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs `suite` with `trials` random trials (ignored by exhaustive suites).
pub fn run_suite_trials(suite: Suite, cfg: &VerifyConfig, trials: usize) -> Result<SuiteReport> {
    let (metric, tally, cases) = match suite {
        Suite::Maxpool => maxpool(cfg, trials)?,
        Suite::Embed => embed(cfg, trials)?,
        Suite::Dilation => dilation(cfg, trials)?,
        Suite::Ceiling => ceiling(cfg),
        Suite::Inclusion => inclusion(cfg, trials)?,
        Suite::Perturbation => perturbation(cfg, trials)?,
        Suite::Represent => represent(cfg, trials)?,
        Suite::Dims => dimensions(cfg)?,
        Suite::Gradcheck => return gradcheck(cfg, trials),
    };
    Ok(SuiteReport {
        suite,
        metric,
        value: tally.max,
        tolerance: tally.tol,
        passed: tally.fail.is_none(),
        cases,
        failing_trial: tally.fail,
        seed: cfg.seed,
    })
}

/// Runs `suite` with `cfg.trials` trials.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    run_suite_trials(suite, cfg, cfg.trials)
}

type Outcome = (&'static str, Tally, usize);

fn maxpool(cfg: &VerifyConfig, trials: usize) -> Result<Outcome> {
    let mut tally = Tally::new(REWRITE_TOL);
    for t in 0..trials {
        let mut rng = trial_rng(cfg, Suite::Maxpool, t);
        let k = rng.random_range(1..=2);
        let n = [1u32, 2, 4][rng.random_range(0..3)];
        let m = (1 << (n - 1)) + 1 + rng.random_range(0..=1);
        let f = random_stack(8, 8, 2 * k + 4, &mut rng);
        let block = maxpool_to_conv_sub(k, n, m)?;
        let got = subsample(&conv_block_forward(&f, &block)?, 1 << n);
        let want = local_max_pool(&f, 1 << n);
        let mut d = fault(cfg, Suite::Maxpool, t);
        for c in 1..=k {
            d = d.max(max_diff(&got.channel(c), &want.channel(c)) + fault(cfg, Suite::Maxpool, t));
        }
        tally.add(t, d);
    }
    Ok(("max_abs_diff", tally, trials))
}

/// `relu(g(...))` read directly from the stack with zero extension.
fn embed_oracle(f: &FeatureStack, g: &FeedforwardNet, ch: [usize; 5], delta: usize) -> Vec<f64> {
    let at = |i: usize, j: usize, c: usize| if i <= f.rows() && j <= f.cols() { f.get(i, j, c) } else { 0.0 };
    let mut out = Vec::with_capacity(f.rows() * f.cols());
    for i in 1..=f.rows() {
        for j in 1..=f.cols() {
            let u =
                [at(i, j, ch[0]), at(i + delta, j, ch[1]), at(i, j + delta, ch[2]), at(i + delta, j + delta, ch[3])];
            out.push(g.eval(u).max(0.0));
        }
    }
    out
}

fn embed(cfg: &VerifyConfig, trials: usize) -> Result<Outcome> {
    let mut tally = Tally::new(REWRITE_TOL);
    for tr in 0..trials {
        let mut rng = trial_rng(cfg, Suite::Embed, tr);
        let g = FeedforwardNet::random(rng.random_range(1..=3), rng.random_range(1..=4), 1.0, &mut rng);
        let t = rng.random_range(1..=4);
        let ch = [0; 5].map(|_| rng.random_range(1..=t));
        let delta = rng.random_range(1..=3);
        let filter = delta + 1 + rng.random_range(0..=1);
        let (rows, cols) = (rng.random_range(5..=10), rng.random_range(5..=10));
        let f = random_stack(rows, cols, t, &mut rng).padded(t + g.width());
        let out = conv_block_forward(&f, &embed_feedforward(&g, t, ch, delta, filter)?)?;
        let mut d = max_diff(&out.channel(ch[4]), &embed_oracle(&f, &g, ch, delta)) + fault(cfg, Suite::Embed, tr);
        for c in (1..=t).filter(|&c| c != ch[4]) {
            d = d.max(max_diff(&out.channel(c), &f.channel(c)));
        }
        tally.add(tr, d);
    }
    Ok(("max_abs_diff", tally, trials))
}

fn dilation(cfg: &VerifyConfig, trials: usize) -> Result<Outcome> {
    let mut tally = Tally::new(REWRITE_TOL);
    for t in 0..trials {
        let mut rng = trial_rng(cfg, Suite::Dilation, t);
        let (kin, k) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let m = rng.random_range(1..=3);
        let z = rng.random_range(1..=2);
        let n = [2, 4][rng.random_range(0..2)];
        let layers = (0..z).map(|i| random_layer(if i == 0 { kin } else { k }, k, m, &mut rng)).collect();
        let block = ConvBlock::new(layers)?;
        let f = random_stack(rng.random_range(8..=16), rng.random_range(8..=16), kin, &mut rng);
        let lhs = subsample(&conv_block_forward(&f, &commute_subsample(&block, n))?, n);
        let rhs = conv_block_forward(&subsample(&f, n), &block)?;
        tally.add(t, max_diff(lhs.data(), rhs.data()) + fault(cfg, Suite::Dilation, t));
    }
    Ok(("max_abs_diff", tally, trials))
}

/// Smallest `q` with `q b >= c`, by search.
fn ceil_by_search(c: usize, b: usize) -> usize {
    (0..).find(|q| q * b >= c).expect("terminates")
}

fn ceiling(cfg: &VerifyConfig) -> Outcome {
    let mut failures = 0usize;
    let mut first = None;
    let mut cases = 0;
    for a in 1..=50usize {
        for b in 1..=50usize {
            for c in 1..=50usize {
                let lhs = (a - 1) * b < c;
                let mut ok = lhs == (a <= ceil_by_search(c, b));
                ok &= c.div_ceil(a * b) == ceil_by_search(ceil_by_search(c, a), b);
                ok &= c.div_ceil(a).div_ceil(b) == ceil_by_search(c, a * b);
                if cfg.sabotage == Some(Suite::Ceiling) && (a, b, c) == (1, 1, 1) {
                    ok = false;
                }
                cases += 2;
                if !ok {
                    failures += 1;
                    first.get_or_insert(cases / 2 - 1);
                }
            }
        }
    }
    let mut tally = Tally::new(0.0);
    tally.max = failures as f64;
    tally.fail = first;
    ("failures", tally, cases)
}

fn inclusion(cfg: &VerifyConfig, trials: usize) -> Result<Outcome> {
    let mut tally = Tally::new(REWRITE_TOL);
    let mut cases = 0;
    for t in 0..trials {
        let mut rng = trial_rng(cfg, Suite::Inclusion, t);
        let l = rng.random_range(1..=3);
        let pools = admissible_pooling(l);
        let n = pools[rng.random_range(0..pools.len())].clone();
        let (k, z) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let arch = table1_params(1, l, &n, k, z, 31, 31)?;
        let mut f1 = Network::init(arch.clone(), &mut rng)?;
        for b in f1.blocks_mut() {
            for layer in b.layers_mut() {
                layer.bias_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
            }
        }
        let f2 = convert_f1_to_f2(&f1)?;
        let f3 = convert_f2_to_f3(&f2)?;
        let s_max = n.iter().copied().max().unwrap_or(1);
        let mut prod = 1;
        let mut shape_ok = f2.arch().channels == vec![2 * k + 4; l]
            && f2.arch().depth == z + 3 * k * s_max.trailing_zeros() as usize
            && f3.arch().pool == vec![n.iter().product::<usize>()];
        for r in 0..l {
            if r > 0 {
                prod *= n[r - 1];
            }
            shape_ok &= f3.arch().filters[r] == (arch.filters[r] - 1) * prod + 1;
        }
        if !shape_ok {
            tally.add(t, f64::INFINITY);
        }
        for _ in 0..20 {
            let x = random_image(31, 31, &mut rng);
            let y1 = f1.forward(&x)?;
            let d = (f2.forward(&x)? - y1).abs().max((f3.forward(&x)? - y1).abs());
            tally.add(t, d + fault(cfg, Suite::Inclusion, t));
            cases += 1;
        }
    }
    Ok(("max_abs_diff", tally, cases))
}

/// Random spec of level `l` on `d1 x d2` images with functions from `g`.
fn random_spec(
    l: usize,
    rng: &mut impl Rng,
    mut g: impl FnMut(&mut dyn rand::RngCore) -> GFunction,
) -> Result<HmpSpec> {
    let features: Vec<usize> = (1..l).map(|_| rng.random_range(1..=2)).collect();
    let pools = admissible_pooling(l);
    let pooling = pools[rng.random_range(0..pools.len())].clone();
    let mut b = vec![1];
    b.extend(&features);
    b.push(1);
    let wiring = (1..=l)
        .map(|k| {
            (0..b[k]).map(|_| if k == 1 { [1; 4] } else { [0; 4].map(|_| rng.random_range(1..=b[k - 1])) }).collect()
        })
        .collect();
    let funcs = (1..=l).map(|k| (0..b[k]).map(|_| g(rng)).collect()).collect();
    HmpSpec::new(l, features, pooling, wiring, funcs)
}

fn represent(cfg: &VerifyConfig, trials: usize) -> Result<Outcome> {
    let mut tally = Tally::new(REWRITE_TOL);
    let mut cases = 0;
    for t in 0..trials {
        let mut rng = trial_rng(cfg, Suite::Represent, t);
        let l = rng.random_range(1..=3);
        let (depth, width) = (rng.random_range(1..=2), rng.random_range(1..=3));
        let spec = random_spec(l, &mut rng, |mut r| GFunction::Net(FeedforwardNet::random(depth, width, 1.0, &mut r)))?;
        let d1 = (1 << l) * rng.random_range(2..=4) - 1;
        let d2 = (1 << l) * rng.random_range(2..=4) - 1;
        let net = represent_hmp(&spec, d1, d2)?;
        for _ in 0..20 {
            let x = random_image(d1, d2, &mut rng);
            let d = (net.forward(&x)? - eval_model(&x, &spec, Mode::Relaxed)?).abs();
            tally.add(t, d + fault(cfg, Suite::Represent, t));
            cases += 1;
        }
    }
    Ok(("max_abs_diff", tally, cases))
}

/// `clamp(a . u + c, 0, 1)` with `|a|_2 = lipschitz`.
fn lipschitz_g(lipschitz: f64, rng: &mut dyn rand::RngCore) -> ([f64; 4], f64) {
    let mut a = [0.0; 4].map(|_: f64| rng.random_range(-1.0..1.0));
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    a.iter_mut().for_each(|v| *v *= lipschitz / norm);
    (a, rng.random_range(0.0..1.0))
}

fn perturbation(cfg: &VerifyConfig, trials: usize) -> Result<Outcome> {
    // Reported figure: observed |m - m_bar| divided by the bound. The bound
    // is attained at level 1, so the ratio gets a rounding allowance.
    let mut tally = Tally::new(1.0 + 1e-9);
    let mut cases = 0;
    for t in 0..trials {
        let mut rng = trial_rng(cfg, Suite::Perturbation, t);
        let l = rng.random_range(1..=3);
        let c = rng.random_range(0.5..2.0);
        let eps = [1e-3, 1e-2][t % 2];
        let mut params = Vec::new();
        let exact = random_spec(l, &mut rng, |r| {
            let (a, b) = lipschitz_g(c, r);
            let omega = [0.0; 4].map(|_: f64| r.random_range(-3.0..3.0));
            params.push((a, b, omega));
            GFunction::custom(move |u| (a.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>() + b).clamp(0.0, 1.0))
        })?;
        let mut it = params.into_iter();
        let g_bar = exact
            .g
            .iter()
            .map(|row| {
                row.iter()
                    .map(|_| {
                        let (a, b, omega) = it.next().expect("one per function");
                        GFunction::custom(move |u| {
                            let lin = (a.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>() + b).clamp(0.0, 1.0);
                            lin + eps * omega.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>().cos()
                        })
                    })
                    .collect()
            })
            .collect();
        let relaxed = HmpSpec { g: g_bar, ..exact.clone() };
        let bound = (2.0 * c + 1.0).powi(l as i32 - 1) * eps;
        let d = (1 << l) * rng.random_range(2..=4) - 1;
        for _ in 0..10 {
            let x = random_image(d, d, &mut rng);
            let diff = (eval_model(&x, &exact, Mode::Exact)? - eval_model(&x, &relaxed, Mode::Relaxed)?).abs();
            tally.add(t, diff / bound + fault(cfg, Suite::Perturbation, t) * 1e6);
            cases += 1;
        }
    }
    Ok(("max_bound_ratio", tally, cases))
}

fn dimensions(cfg: &VerifyConfig) -> Result<Outcome> {
    let mut failures = 0usize;
    let mut first = None;
    let mut cases = 0;
    for l in 1..=cfg.max_level {
        for m in 2..=4usize {
            let d = (1 << l) * m - 1;
            for n in admissible_pooling(l) {
                let wiring = (1..=l).map(|_| vec![[1; 4]]).collect();
                let spec = HmpSpec::uniform(l, vec![1; l - 1], n.clone(), wiring, GFunction::Builtin(BuiltinG::First))?;
                for k in 0..=l {
                    let (a, b) = dims(k, d, d, &spec)?;
                    let want = dims_closed_form(k, m, &spec);
                    let mut ok = a == want && b == want;
                    if k >= 1 && k < l {
                        ok &= a % n[k - 1] == 0;
                    }
                    if cfg.sabotage == Some(Suite::Dims) && cases == 0 {
                        ok = false;
                    }
                    if !ok {
                        failures += 1;
                        first.get_or_insert(cases);
                    }
                    cases += 1;
                }
            }
        }
    }
    let mut tally = Tally::new(0.0);
    tally.max = failures as f64;
    tally.fail = first;
    Ok(("failures", tally, cases))
}

/// Fraction of coordinates where analytic and central-difference derivatives
/// agree, skipping coordinates whose perturbation changes the activation
/// pattern. `eval(p)` returns the loss and the pattern at parameters `p`.
pub fn gradient_agreement(
    params: &[f64],
    analytic: &[f64],
    mut eval: impl FnMut(&[f64]) -> (f64, Vec<usize>),
) -> (f64, usize) {
    let (_, base) = eval(params);
    let mut p = params.to_vec();
    let (mut agree, mut used) = (0usize, 0usize);
    for i in 0..params.len() {
        p[i] = params[i] + FD_STEP;
        let (up, pu) = eval(&p);
        p[i] = params[i] - FD_STEP;
        let (down, pd) = eval(&p);
        p[i] = params[i];
        if pu != base || pd != base {
            continue;
        }
        used += 1;
        let num = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        let scale = a.abs().max(num.abs());
        if (a - num).abs() <= 1e-8 || (a - num).abs() <= FD_REL_TOL * scale {
            agree += 1;
        }
    }
    let frac = if used == 0 { 1.0 } else { agree as f64 / used as f64 };
    (frac, used)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn coeffs(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Conv layer with loss `c . o(x)` over input, filter and bias.
fn check_conv(rng: &mut impl Rng, skew: f64) -> Result<f64> {
    let (kin, kout, m) = (2, 3, rng.random_range(2..=3));
    let x = random_stack(5, 5, kin, rng);
    let layer = random_layer(kin, kout, m, rng);
    let out = conv_layer_forward(&x, &layer)?;
    let c = coeffs(out.data().len(), rng);
    let (mut gw, mut gb, mut gi) = (vec![0.0; layer.weights().len()], vec![0.0; kout], vec![0.0; x.data().len()]);
    conv_layer_backward(&x, &layer, &out, &c, &mut gw, &mut gb, Some(&mut gi));
    let (nx, nw) = (x.data().len(), layer.weights().len());
    let params: Vec<f64> = x.data().iter().chain(layer.weights()).chain(layer.bias()).copied().collect();
    let analytic: Vec<f64> = gi.iter().chain(&gw).chain(&gb).map(|v| v * skew).collect();
    let eval = |p: &[f64]| {
        let xs = FeatureStack::new(5, 5, kin, p[..nx].to_vec()).expect("sized");
        let l = ConvLayer::new(kin, kout, m, p[nx..nx + nw].to_vec(), p[nx + nw..].to_vec()).expect("sized");
        let o = conv_layer_forward(&xs, &l).expect("shapes match");
        (dot(&c, o.data()), o.data().iter().map(|&v| usize::from(v > 0.0)).collect())
    };
    Ok(gradient_agreement(&params, &analytic, eval).0)
}

fn check_pool(rng: &mut impl Rng, skew: f64) -> Result<f64> {
    let s = rng.random_range(2..=3);
    let x = random_stack(7, 7, 2, rng);
    let (out, arg) = local_max_pool_with_argmax(&x, s);
    let c = coeffs(out.data().len(), rng);
    let mut gi = vec![0.0; x.data().len()];
    local_max_pool_backward(&arg, &c, &mut gi);
    let analytic: Vec<f64> = gi.iter().map(|v| v * skew).collect();
    let eval = |p: &[f64]| {
        let (o, a) = local_max_pool_with_argmax(&FeatureStack::new(7, 7, 2, p.to_vec()).expect("sized"), s);
        (dot(&c, o.data()), a)
    };
    Ok(gradient_agreement(x.data(), &analytic, eval).0)
}

fn check_subsample(rng: &mut impl Rng, skew: f64) -> Result<f64> {
    let s = rng.random_range(2..=3);
    let x = random_stack(7, 6, 2, rng);
    let out = subsample(&x, s);
    let c = coeffs(out.data().len(), rng);
    let mut gi = vec![0.0; x.data().len()];
    subsample_backward(7, 6, 2, s, &c, &mut gi);
    let analytic: Vec<f64> = gi.iter().map(|v| v * skew).collect();
    let eval =
        |p: &[f64]| (dot(&c, subsample(&FeatureStack::new(7, 6, 2, p.to_vec()).expect("sized"), s).data()), vec![]);
    Ok(gradient_agreement(x.data(), &analytic, eval).0)
}

fn check_output(rng: &mut impl Rng, skew: f64) -> Result<f64> {
    let k = 3;
    let x = random_stack(5, 5, k, rng);
    let w = coeffs(k, rng);
    let window = (rng.random_range(1..=5), rng.random_range(1..=5));
    let (_, arg) = output_layer_with_argmax(&x, &w, window)?;
    let (mut gw, mut gi) = (vec![0.0; k], vec![0.0; x.data().len()]);
    output_layer_backward(&x, &w, arg, 1.0, &mut gw, &mut gi);
    let nx = x.data().len();
    let params: Vec<f64> = x.data().iter().chain(&w).copied().collect();
    let analytic: Vec<f64> = gi.iter().chain(&gw).map(|v| v * skew).collect();
    let eval = |p: &[f64]| {
        let xs = FeatureStack::new(5, 5, k, p[..nx].to_vec()).expect("sized");
        let (v, a) = output_layer_with_argmax(&xs, &p[nx..], window).expect("window fits");
        (v, vec![a.0, a.1])
    };
    Ok(gradient_agreement(&params, &analytic, eval).0)
}

fn check_network(rng: &mut impl Rng, skew: f64) -> Result<f64> {
    let pools = admissible_pooling(3);
    let n = pools[rng.random_range(0..pools.len())].clone();
    let arch = table1_params(1, 3, &n, 2, rng.random_range(1..=2), 11, 11)?;
    let mut net = Network::init(arch, rng)?;
    let mut p = net.flat_params();
    p.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
    net.set_flat_params(&p)?;
    let x = random_image(11, 11, rng);
    let y = rng.random_range(0..=1u8);
    let (_, grads) = loss_and_gradients(&net, &[(&x, y)])?;
    let analytic: Vec<f64> = grads.flatten().iter().map(|v| v * skew).collect();
    let mut probe = net.clone();
    let eval = |q: &[f64]| {
        probe.set_flat_params(q).expect("same length");
        let t = Trace::record(&probe, &x).expect("input fits");
        ((t.value() - f64::from(y)).powi(2), t.activation_pattern())
    };
    Ok(gradient_agreement(&p, &analytic, eval).0)
}

fn gradcheck(cfg: &VerifyConfig, trials: usize) -> Result<SuiteReport> {
    let mut worst = 1.0f64;
    let mut fail = None;
    for t in 0..trials {
        let mut rng = trial_rng(cfg, Suite::Gradcheck, t);
        let skew = if fault(cfg, Suite::Gradcheck, t) > 0.0 { 1.01 } else { 1.0 };
        let fr = [
            check_conv(&mut rng, skew)?,
            check_pool(&mut rng, skew)?,
            check_subsample(&mut rng, skew)?,
            check_output(&mut rng, skew)?,
            check_network(&mut rng, skew)?,
        ];
        let m = fr.iter().copied().fold(1.0, f64::min);
        worst = worst.min(m);
        if m < FD_MIN_AGREEMENT && fail.is_none() {
            fail = Some(t);
        }
    }
    Ok(SuiteReport {
        suite: Suite::Gradcheck,
        metric: "min_agreement",
        value: worst,
        tolerance: FD_MIN_AGREEMENT,
        passed: fail.is_none(),
        cases: 5 * trials,
        failing_trial: fail,
        seed: cfg.seed,
    })
}

/// Runs the named suites, or all of them.
pub fn run_all(cfg: &VerifyConfig, only: Option<Suite>) -> Result<Vec<SuiteReport>> {
    let suites: Vec<Suite> = match only {
        Some(s) => vec![s],
        None => Suite::ALL.to_vec(),
    };
    suites.into_iter().map(|s| run_suite(s, cfg)).collect()
}

/// Error naming the first failing suite.
pub fn first_failure(reports: &[SuiteReport]) -> Option<HmpError> {
    reports.iter().find(|r| !r.passed).map(|r| {
        HmpError::Config(format!(
            "{} failed: {} {} (trial {:?}, seed {})",
            r.suite, r.metric, r.value, r.failing_trial, r.seed
        ))
    })
}
