//! Hierarchical max-pooling model with local max-pooling.
//!
//! The evaluator computes the level maps `y_{k,s}` and pooled maps `z_{k,s}`
//! bottom-up and returns the global maximum of the level-`l` map. Public
//! indices are 1-based: pixel `(i, j)` ranges over `{1..d1} x {1..d2}`, levels
//! over `0..=l` and features over `1..=b_k`.

use std::fmt;
use std::sync::Arc;

use crate::error::{HmpError, Result};
use crate::transforms::FeedforwardNet;

/// A `d1 x d2` grey-value image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    d1: usize,
    d2: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    /// Builds an image from row-major values; every value must lie in `[0, 1]`.
    pub fn new(d1: usize, d2: usize, values: Vec<f64>) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(HmpError::shape("image dimensions must be positive"));
        }
        if values.len() != d1 * d2 {
            return Err(HmpError::shape(format!(
                "expected {} values for a {d1}x{d2} image, got {}",
                d1 * d2,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(HmpError::shape(format!("grey value {v} outside [0,1]")));
        }
        Ok(ImageGrid { d1, d2, values })
    }

    /// Constant image.
    pub fn constant(d1: usize, d2: usize, c: f64) -> Result<Self> {
        Self::new(d1, d2, vec![c; d1 * d2])
    }

    /// Number of rows.
    pub fn d1(&self) -> usize {
        self.d1
    }

    /// Number of columns.
    pub fn d2(&self) -> usize {
        self.d2
    }

    /// Pixel at 1-based `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!((1..=self.d1).contains(&i) && (1..=self.d2).contains(&j), "pixel ({i},{j}) out of range");
        self.values[(i - 1) * self.d2 + (j - 1)]
    }

    /// Row-major pixel values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Built-in combination functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinG {
    /// `u1`.
    First,
    /// `max(u1, u2, u3, u4)`.
    Max,
    /// `(u1 + u2 + u3 + u4) / 4`.
    Average,
    /// `u1 u2 u3 u4` clamped to `[0, 1]`.
    Product,
    /// `1` if `u1 + u2 + u3 + u4 >= t`, else `0`.
    Threshold(f64),
}

/// A four-argument combination function `g_{k,s}` or its approximant.
#[derive(Clone)]
pub enum GFunction {
    Builtin(BuiltinG),
    Net(FeedforwardNet),
    Custom(Arc<dyn Fn([f64; 4]) -> f64 + Send + Sync>),
}

impl fmt::Debug for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GFunction::Builtin(b) => write!(f, "Builtin({b:?})"),
            GFunction::Net(n) => write!(f, "Net(depth {}, width {})", n.depth(), n.width()),
            GFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl GFunction {
    /// Wraps a closure.
    pub fn custom(f: impl Fn([f64; 4]) -> f64 + Send + Sync + 'static) -> Self {
        GFunction::Custom(Arc::new(f))
    }

    /// Evaluates the function.
    pub fn eval(&self, u: [f64; 4]) -> f64 {
        match self {
            GFunction::Builtin(b) => match *b {
                BuiltinG::First => u[0],
                BuiltinG::Max => u[0].max(u[1]).max(u[2]).max(u[3]),
                BuiltinG::Average => (u[0] + u[1] + u[2] + u[3]) / 4.0,
                BuiltinG::Product => (u[0] * u[1] * u[2] * u[3]).clamp(0.0, 1.0),
                BuiltinG::Threshold(t) => {
                    if u[0] + u[1] + u[2] + u[3] >= t {
                        1.0
                    } else {
                        0.0
                    }
                }
            },
            GFunction::Net(n) => n.eval(u),
            GFunction::Custom(f) => f(u),
        }
    }

    /// Checks on `samples` points of `[0,1]^4` that the function maps into `[0,1]`.
    pub fn check_unit_range(&self, samples: usize, rng: &mut impl rand::Rng) -> bool {
        (0..samples).all(|_| {
            let u = [rng.random(), rng.random(), rng.random(), rng.random()];
            (0.0..=1.0).contains(&self.eval(u))
        })
    }
}

/// Evaluation mode of [`eval_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Ground-truth model `m` with the functions applied as given.
    Exact,
    /// Relaxed model `m-bar`: the ReLU is applied after every function.
    Relaxed,
}

/// Level `l`, feature counts `b`, pooling sizes `n`, wiring and functions.
#[derive(Debug, Clone)]
pub struct HmpSpec {
    /// Level `l >= 1`.
    pub level: usize,
    /// `(b_1..b_{l-1})`; `b_0 = b_l = 1` are implicit.
    pub features: Vec<usize>,
    /// `(n_1..n_{l-1})`; `n_0 = n_l = 1` are implicit.
    pub pooling: Vec<usize>,
    /// `wiring[k-1][s-1] = (r_1, r_2, r_3, r_4)(k, s)` for `k = 1..l`, `s = 1..b_k`.
    pub wiring: Vec<Vec<[usize; 4]>>,
    /// `g[k-1][s-1] = g_{k,s}`.
    pub g: Vec<Vec<GFunction>>,
    /// Optional smoothness metadata `(p, C)`; informational only.
    pub smoothness: Option<(f64, f64)>,
}

impl HmpSpec {
    /// Builds a spec, checking that all vectors have matching shapes.
    pub fn new(
        level: usize,
        features: Vec<usize>,
        pooling: Vec<usize>,
        wiring: Vec<Vec<[usize; 4]>>,
        g: Vec<Vec<GFunction>>,
    ) -> Result<Self> {
        if level == 0 {
            return Err(HmpError::spec("level must be at least 1"));
        }
        if features.len() != level - 1 || pooling.len() != level - 1 {
            return Err(HmpError::spec(format!("features and pooling need {} entries each", level - 1)));
        }
        if features.contains(&0) || pooling.contains(&0) {
            return Err(HmpError::spec("feature counts and pooling sizes must be positive"));
        }
        let spec = HmpSpec { level, features, pooling, wiring, g, smoothness: None };
        for k in 1..=level {
            let bk = spec.b(k);
            if spec.wiring.len() != level || spec.wiring[k - 1].len() != bk {
                return Err(HmpError::spec(format!("wiring at level {k} needs {bk} entries")));
            }
            if spec.g.len() != level || spec.g[k - 1].len() != bk {
                return Err(HmpError::spec(format!("functions at level {k} need {bk} entries")));
            }
        }
        Ok(spec)
    }

    /// Spec with the same function at every node.
    pub fn uniform(
        level: usize,
        features: Vec<usize>,
        pooling: Vec<usize>,
        wiring: Vec<Vec<[usize; 4]>>,
        g: GFunction,
    ) -> Result<Self> {
        let mut b = vec![1];
        b.extend(&features);
        b.push(1);
        let funcs = (1..=level).map(|k| vec![g.clone(); b[k]]).collect();
        Self::new(level, features, pooling, wiring, funcs)
    }

    /// Tree wiring without pooling: `b_k = 4^{l-k}`, `r_i(k, s) = 4(s-1) + i`
    /// for `k >= 2`; level 1 reads the image.
    pub fn tree(level: usize, g: GFunction) -> Result<Self> {
        let features: Vec<usize> = (1..level).map(|k| 4usize.pow((level - k) as u32)).collect();
        let pooling = vec![1; level - 1];
        let wiring = (1..=level)
            .map(|k| {
                let bk = if k == level { 1 } else { features[k - 1] };
                (1..=bk).map(|s| if k == 1 { [1; 4] } else { [4 * s - 3, 4 * s - 2, 4 * s - 1, 4 * s] }).collect()
            })
            .collect();
        Self::uniform(level, features, pooling, wiring, g)
    }

    /// `b_k` with `b_0 = b_l = 1`.
    pub fn b(&self, k: usize) -> usize {
        if k == 0 || k >= self.level {
            1
        } else {
            self.features[k - 1]
        }
    }

    /// `n_k` with `n_0 = n_l = 1`.
    pub fn n(&self, k: usize) -> usize {
        if k == 0 || k >= self.level {
            1
        } else {
            self.pooling[k - 1]
        }
    }

    /// `max(b_1, .., b_l)`.
    pub fn b_max(&self) -> usize {
        (1..=self.level).map(|k| self.b(k)).max().unwrap_or(1)
    }

    /// `prod_{i=0}^{k} n_i`.
    pub fn pool_product(&self, k: usize) -> usize {
        (0..=k).map(|i| self.n(i)).product()
    }
}

/// `delta_k = 2^k / prod_{i=0}^{k} n_i` for `0 <= k <= l - 1`.
pub fn delta(k: usize, spec: &HmpSpec) -> Result<usize> {
    if k >= spec.level {
        return Err(HmpError::Index(format!("delta index {k} outside 0..{}", spec.level - 1)));
    }
    let num = 1usize << k;
    let den = spec.pool_product(k);
    if !num.is_multiple_of(den) || num < den {
        return Err(HmpError::spec(format!("delta_{k} = {num}/{den} is not a positive integer")));
    }
    Ok(num / den)
}

/// `(d1(k), d2(k))` by the recursion `d(k) = ceil(d(k-1) / n_{k-1}) - delta_{k-1}`.
pub fn dims(k: usize, d1: usize, d2: usize, spec: &HmpSpec) -> Result<(usize, usize)> {
    if k > spec.level {
        return Err(HmpError::Index(format!("level {k} exceeds {}", spec.level)));
    }
    let (mut a, mut b) = (d1 as i64, d2 as i64);
    for r in 1..=k {
        let n = spec.n(r - 1) as i64;
        let dl = delta(r - 1, spec)? as i64;
        a = ceil_div(a, n) - dl;
        b = ceil_div(b, n) - dl;
        if a < 1 || b < 1 {
            return Err(HmpError::spec(format!("dimension at level {r} is not positive ({a}x{b})")));
        }
    }
    Ok((a as usize, b as usize))
}

fn ceil_div(a: i64, b: i64) -> i64 {
    (a + b - 1).div_euclid(b)
}

/// `N^{(k)}_{(i,j)}`: the `n_k x n_k` window of pooled position `(i, j)`, clipped
/// to `{1..d1(k)} x {1..d2(k)}`. Indices are 1-based.
pub fn neighborhood(k: usize, i: usize, j: usize, spec: &HmpSpec, d1: usize, d2: usize) -> Result<Vec<(usize, usize)>> {
    let (e1, e2) = dims(k, d1, d2, spec)?;
    let n = spec.n(k);
    let (p1, p2) = (e1.div_ceil(n), e2.div_ceil(n));
    if !(1..=p1).contains(&i) || !(1..=p2).contains(&j) {
        return Err(HmpError::Index(format!("pooled position ({i},{j}) outside {p1}x{p2}")));
    }
    let mut out = Vec::with_capacity(n * n);
    for a in (i - 1) * n + 1..=(i * n).min(e1) {
        for b in (j - 1) * n + 1..=(j * n).min(e2) {
            out.push((a, b));
        }
    }
    Ok(out)
}

/// One named condition of [`validate_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`validate_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Fatal conditions.
    pub checks: Vec<Check>,
    /// `Some(m)` if both dimensions have the form `2^l m - 1` with `m >= 2`.
    pub power_form: Option<(usize, usize)>,
}

impl ValidationReport {
    /// True if every fatal condition passed.
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// The first failing condition.
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Checks the spec against an image size.
pub fn validate_spec(spec: &HmpSpec, d1: usize, d2: usize) -> ValidationReport {
    let l = spec.level;
    let mut checks = Vec::new();

    let bad_pow: Vec<usize> = spec.pooling.iter().copied().filter(|n| !n.is_power_of_two()).collect();
    checks.push(Check {
        name: "power_of_two_pooling",
        passed: bad_pow.is_empty(),
        detail: if bad_pow.is_empty() { String::new() } else { format!("not powers of two: {bad_pow:?}") },
    });

    let mut product_fail = None;
    for k in 1..l {
        if spec.pool_product(k) > 1 << k {
            product_fail = Some(k);
            break;
        }
    }
    checks.push(Check {
        name: "pooling_product_bound",
        passed: product_fail.is_none(),
        detail: product_fail.map(|k| format!("prod n_1..n_{k} = {} > 2^{k}", spec.pool_product(k))).unwrap_or_default(),
    });

    let need = (1usize << l) + spec.pool_product(l.saturating_sub(1)) - 1;
    checks.push(Check {
        name: "minimum_image_size",
        passed: d1.min(d2) >= need,
        detail: format!("min(d1,d2) = {} vs required {need}", d1.min(d2)),
    });

    let mut wiring_fail = None;
    'outer: for k in 1..=l {
        let prev = spec.b(k - 1);
        for (s, r) in spec.wiring.get(k - 1).map(|v| v.as_slice()).unwrap_or(&[]).iter().enumerate() {
            if r.iter().any(|&x| x == 0 || x > prev) {
                wiring_fail = Some(format!("r(k={k}, s={}) = {r:?} outside 1..{prev}", s + 1));
                break 'outer;
            }
        }
    }
    checks.push(Check { name: "wiring_range", passed: wiring_fail.is_none(), detail: wiring_fail.unwrap_or_default() });

    let form = |d: usize| {
        let p = 1usize << l;
        ((d + 1).is_multiple_of(p) && (d + 1) / p >= 2).then_some((d + 1) / p)
    };
    let power_form = form(d1).zip(form(d2));
    ValidationReport { checks, power_form }
}

/// A pooled or unpooled map stored row-major with 0-based storage.
struct Map {
    rows: usize,
    cols: usize,
    v: Vec<f64>,
}

impl Map {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.cols + j]
    }
}

/// Evaluates `m(x)` (exact mode) or `m-bar(x)` (relaxed mode).
pub fn eval_model(x: &ImageGrid, spec: &HmpSpec, mode: Mode) -> Result<f64> {
    eval_model_argmax(x, spec, mode).map(|(v, _)| v)
}

/// Like [`eval_model`], also returning the first row-major maximizing position (1-based).
pub fn eval_model_argmax(x: &ImageGrid, spec: &HmpSpec, mode: Mode) -> Result<(f64, (usize, usize))> {
    let report = validate_spec(spec, x.d1(), x.d2());
    if let Some(c) = report.first_failure() {
        return Err(HmpError::spec(format!("{} failed: {}", c.name, c.detail)));
    }
    let l = spec.level;
    // Pooled maps of the previous level; level 0 is the image itself (n_0 = 1).
    let mut z = vec![Map { rows: x.d1(), cols: x.d2(), v: x.values().to_vec() }];
    let mut last = None;
    for k in 1..=l {
        let (e1, e2) = dims(k, x.d1(), x.d2(), spec)?;
        let dl = delta(k - 1, spec)?;
        let nk = spec.n(k);
        let mut next = Vec::with_capacity(spec.b(k));
        for s in 1..=spec.b(k) {
            let r = spec.wiring[k - 1][s - 1];
            let g = &spec.g[k - 1][s - 1];
            let mut y = Vec::with_capacity(e1 * e2);
            for i in 0..e1 {
                for j in 0..e2 {
                    let u = [
                        z[r[0] - 1].at(i, j),
                        z[r[1] - 1].at(i + dl, j),
                        z[r[2] - 1].at(i, j + dl),
                        z[r[3] - 1].at(i + dl, j + dl),
                    ];
                    let v = g.eval(u);
                    y.push(match mode {
                        Mode::Exact => v,
                        Mode::Relaxed => v.max(0.0),
                    });
                }
            }
            let y = Map { rows: e1, cols: e2, v: y };
            next.push(if nk == 1 { y } else { pool(&y, nk) });
        }
        if k == l {
            last = next.into_iter().next();
            break;
        }
        z = next;
    }
    let top = last.expect("level l map");
    let mut best = f64::NEG_INFINITY;
    let mut arg = (1, 1);
    for i in 0..top.rows {
        for j in 0..top.cols {
            let v = top.at(i, j);
            if v > best {
                best = v;
                arg = (i + 1, j + 1);
            }
        }
    }
    Ok((best, arg))
}

fn pool(y: &Map, n: usize) -> Map {
    let (p1, p2) = (y.rows.div_ceil(n), y.cols.div_ceil(n));
    let mut v = Vec::with_capacity(p1 * p2);
    for i in 0..p1 {
        for j in 0..p2 {
            let mut m = f64::NEG_INFINITY;
            for a in i * n..((i + 1) * n).min(y.rows) {
                for b in j * n..((j + 1) * n).min(y.cols) {
                    m = m.max(y.at(a, b));
                }
            }
            v.push(m);
        }
    }
    Map { rows: p1, cols: p2, v }
}

/// Closed form `d(k) = 2^k / prod_{i=0}^{k-1} n_i * (2^{l-k} m - 1)` for `d = 2^l m - 1`.
pub fn dims_closed_form(k: usize, m: usize, spec: &HmpSpec) -> usize {
    let l = spec.level;
    let p: usize = if k == 0 { 1 } else { spec.pool_product(k - 1) };
    ((1usize << k) / p) * ((1usize << (l - k)) * m - 1)
}

/// All pooling vectors `(n_1..n_{l-1})` of powers of two with `prod_{i<=r} n_i <= 2^r`,
/// in lexicographic order.
pub fn admissible_pooling(level: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(level: usize, cur: &mut Vec<usize>, prod: usize, out: &mut Vec<Vec<usize>>) {
        let r = cur.len() + 1;
        if r == level {
            out.push(cur.clone());
            return;
        }
        let mut n = 1;
        while prod * n <= 1 << r {
            cur.push(n);
            rec(level, cur, prod * n, out);
            cur.pop();
            n *= 2;
        }
    }
    if level >= 1 {
        rec(level, &mut cur, 1, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(level: usize, pooling: Vec<usize>, g: GFunction) -> HmpSpec {
        let features = vec![1; level - 1];
        let wiring = vec![vec![[1, 1, 1, 1]]; level];
        HmpSpec::uniform(level, features, pooling, wiring, g).unwrap()
    }

    fn random_image(d: usize, rng: &mut ChaCha8Rng) -> ImageGrid {
        ImageGrid::new(d, d, (0..d * d).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn delta_examples() {
        let s = chain(3, vec![2, 2], GFunction::Builtin(BuiltinG::First));
        assert_eq!(delta(0, &s).unwrap(), 1);
        assert_eq!(delta(2, &s).unwrap(), 1);
        let s = chain(3, vec![1, 1], GFunction::Builtin(BuiltinG::First));
        assert_eq!(delta(2, &s).unwrap(), 4);
        let bad = chain(3, vec![4, 1], GFunction::Builtin(BuiltinG::First));
        assert!(matches!(delta(1, &bad), Err(HmpError::Spec(_))));
    }

    #[test]
    fn dims_examples() {
        let s = chain(3, vec![2, 2], GFunction::Builtin(BuiltinG::First));
        assert_eq!(dims(0, 31, 31, &s).unwrap(), (31, 31));
        assert_eq!(dims(1, 31, 31, &s).unwrap(), (30, 30));
        assert_eq!(dims(2, 31, 31, &s).unwrap(), (14, 14));
        assert_eq!(dims(3, 31, 31, &s).unwrap(), (6, 6));
        let s = chain(3, vec![1, 1], GFunction::Builtin(BuiltinG::First));
        assert_eq!(dims(3, 31, 31, &s).unwrap(), (24, 24));
    }

    #[test]
    fn neighborhood_examples() {
        let s = chain(2, vec![1], GFunction::Builtin(BuiltinG::First));
        assert_eq!(neighborhood(1, 3, 4, &s, 9, 9).unwrap(), vec![(3, 4)]);
        // Level 1 of a level-3 model with n_1 = 2 on an image with d(1) = 3.
        let s = chain(3, vec![2, 1], GFunction::Builtin(BuiltinG::First));
        assert_eq!(dims(1, 4, 4, &s).unwrap(), (3, 3));
        assert_eq!(neighborhood(1, 1, 1, &s, 4, 4).unwrap(), vec![(1, 1), (1, 2), (2, 1), (2, 2)]);
        assert_eq!(neighborhood(1, 2, 2, &s, 4, 4).unwrap(), vec![(3, 3)]);
        assert!(matches!(neighborhood(1, 3, 1, &s, 4, 4), Err(HmpError::Index(_))));
    }

    #[test]
    fn constant_image_identity_propagation() {
        let s = chain(3, vec![2, 2], GFunction::Builtin(BuiltinG::First));
        let x = ImageGrid::constant(31, 31, 0.37).unwrap();
        assert_eq!(eval_model(&x, &s, Mode::Exact).unwrap(), 0.37);
    }

    #[test]
    fn level_one_average_matches_window_brute_force() {
        // Wiring at level 1 may only reference feature 1 of level 0.
        let bad = HmpSpec::uniform(1, vec![], vec![], vec![vec![[1, 2, 3, 4]]], GFunction::Builtin(BuiltinG::Average))
            .unwrap();
        assert!(eval_model(&ImageGrid::constant(3, 3, 0.0).unwrap(), &bad, Mode::Exact).is_err());
        let s = HmpSpec::uniform(1, vec![], vec![], vec![vec![[1, 1, 1, 1]]], GFunction::Builtin(BuiltinG::Average))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = random_image(3, &mut rng);
            let mut best = f64::NEG_INFINITY;
            for i in 1..=2 {
                for j in 1..=2 {
                    let avg = (x.get(i, j) + x.get(i + 1, j) + x.get(i, j + 1) + x.get(i + 1, j + 1)) / 4.0;
                    best = best.max(avg);
                }
            }
            assert!((eval_model(&x, &s, Mode::Exact).unwrap() - best).abs() < 1e-15);
        }
    }

    /// Literal hierarchy on a `2^k x 2^k` window anchored at 0-based `(a, b)`.
    fn tree_window(x: &ImageGrid, g: &GFunction, k: usize, a: usize, b: usize) -> f64 {
        if k == 0 {
            return x.get(a + 1, b + 1);
        }
        let h = 1 << (k - 1);
        g.eval([
            tree_window(x, g, k - 1, a, b),
            tree_window(x, g, k - 1, a + h, b),
            tree_window(x, g, k - 1, a, b + h),
            tree_window(x, g, k - 1, a + h, b + h),
        ])
    }

    #[test]
    fn tree_wiring_without_pooling_equals_window_recursion() {
        // Distinct functions per level make the wiring order observable.
        let g = GFunction::custom(|u| (0.1 * u[0] + 0.2 * u[1] + 0.3 * u[2] + 0.4 * u[3]).sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for level in 1..=3 {
            let s = HmpSpec::tree(level, g.clone()).unwrap();
            let d = (1 << level) + 2;
            for _ in 0..50 {
                let x = random_image(d, &mut rng);
                let mut best = f64::NEG_INFINITY;
                for a in 0..=d - (1 << level) {
                    for b in 0..=d - (1 << level) {
                        best = best.max(tree_window(&x, &g, level, a, b));
                    }
                }
                let got = eval_model(&x, &s, Mode::Exact).unwrap();
                assert!((got - best).abs() < 1e-14, "level {level}: {got} vs {best}");
            }
        }
    }

    #[test]
    fn validate_examples() {
        let s = chain(3, vec![2, 2], GFunction::Builtin(BuiltinG::First));
        let r = validate_spec(&s, 31, 31);
        assert!(r.ok());
        assert_eq!(r.power_form, Some((4, 4)));
        let s = chain(3, vec![4, 2], GFunction::Builtin(BuiltinG::First));
        let r = validate_spec(&s, 31, 31);
        assert_eq!(r.first_failure().unwrap().name, "pooling_product_bound");
        assert!(r.first_failure().unwrap().detail.contains("n_1"));
        let s = chain(2, vec![1], GFunction::Builtin(BuiltinG::First));
        let r = validate_spec(&s, 3, 3);
        assert_eq!(r.first_failure().unwrap().name, "minimum_image_size");
    }

    #[test]
    fn relaxed_mode_applies_relu() {
        let s = chain(1, vec![], GFunction::custom(|u| u[0] - 2.0));
        let x = ImageGrid::constant(3, 3, 0.5).unwrap();
        assert_eq!(eval_model(&x, &s, Mode::Exact).unwrap(), -1.5);
        assert_eq!(eval_model(&x, &s, Mode::Relaxed).unwrap(), 0.0);
    }

    #[test]
    fn argmax_is_first_in_row_major_order() {
        let s = chain(1, vec![], GFunction::Builtin(BuiltinG::First));
        let x = ImageGrid::new(3, 3, vec![0.0, 0.9, 0.0, 0.9, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(eval_model_argmax(&x, &s, Mode::Exact).unwrap(), (0.9, (1, 2)));
    }

    #[test]
    fn admissible_pooling_enumeration() {
        assert_eq!(admissible_pooling(1), vec![Vec::<usize>::new()]);
        assert_eq!(admissible_pooling(3), vec![vec![1, 1], vec![1, 2], vec![1, 4], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn image_rejects_out_of_range_values() {
        assert!(ImageGrid::new(1, 2, vec![0.0, 1.5]).is_err());
        assert!(ImageGrid::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn builtin_range_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [BuiltinG::First, BuiltinG::Max, BuiltinG::Average, BuiltinG::Product, BuiltinG::Threshold(2.0)] {
            assert!(GFunction::Builtin(g).check_unit_range(200, &mut rng));
        }
        assert!(!GFunction::custom(|u| u[0] + 1.0).check_unit_range(10, &mut rng));
    }
}
