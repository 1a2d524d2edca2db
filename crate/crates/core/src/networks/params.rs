//! Parameter derivation, weight counting and constant-free bound shapes.

use super::{ArchSpec, Variant};
use crate::error::{HmpError, Result};

/// Total weight count
/// `W = sum_j sum_i (M_j^2 k'_{j,i} k_j + k_j) + k_L` with `k'_{j,1} = k_{j-1}`,
/// `k'_{j,i>1} = k_j` and `k_0 = 1`.
pub fn param_count(arch: &ArchSpec) -> usize {
    let mut w = 0;
    for r in 1..=arch.blocks() {
        let k = arch.channels[r - 1];
        let m = arch.filters[r - 1];
        for i in 1..=arch.depth {
            let kin = if i == 1 { arch.block_input_channels(r) } else { k };
            w += m * m * kin * k + k;
        }
    }
    w + arch.channels[arch.blocks() - 1]
}

/// The three architectures of the main theorem.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Params {
    pub theta1: ArchSpec,
    pub theta2: ArchSpec,
    pub theta3: ArchSpec,
}

fn check_pooling(l: usize, n: &[usize]) -> Result<()> {
    if n.len() + 1 != l {
        return Err(HmpError::spec(format!("need {} pooling sizes for level {l}", l - 1)));
    }
    let mut prod = 1;
    for (r, &v) in n.iter().enumerate() {
        if !v.is_power_of_two() {
            return Err(HmpError::spec(format!("pooling size {v} is not a power of two")));
        }
        prod *= v;
        if prod > 1 << (r + 1) {
            return Err(HmpError::spec(format!("prod n_1..n_{} = {prod} exceeds 2^{}", r + 1, r + 1)));
        }
    }
    Ok(())
}

/// `2^{r-1} / prod_{i=0}^{r-1} n_i + 1` for `r = 1..l`.
fn pooled_filters(l: usize, n: &[usize]) -> Vec<usize> {
    let mut prod = 1;
    (1..=l)
        .map(|r| {
            if r >= 2 {
                prod *= n[r - 2];
            }
            (1 << (r - 1)) / prod + 1
        })
        .collect()
}

fn dilated_filters(l: usize) -> Vec<usize> {
    (1..=l).map(|r| (1 << (r - 1)) + 1).collect()
}

/// Architectures `theta_1`, `theta_2`, `theta_3` for a model of level `l` with
/// feature constraint `b`, pooling `n`, approximating-net depth `ln` and
/// channel constant `c2`, on `d1 x d2` images.
pub fn theorem1_params(
    l: usize,
    b: &[usize],
    n: &[usize],
    ln: usize,
    c2: usize,
    d1: usize,
    d2: usize,
) -> Result<Theorem1Params> {
    if l == 0 {
        return Err(HmpError::spec("level must be at least 1"));
    }
    if b.len() + 1 != l {
        return Err(HmpError::spec(format!("need {} feature counts for level {l}", l - 1)));
    }
    check_pooling(l, n)?;
    let prod: usize = n.iter().product();
    let p = 1usize << l;
    let window = |d: usize| -> Result<usize> {
        if d + 1 < p + prod || !(d + 1 - p).is_multiple_of(prod) {
            return Err(HmpError::spec(format!("({d} - 2^{l} + 1) / {prod} is not a positive integer")));
        }
        Ok((d + 1 - p) / prod)
    };
    let window = (window(d1)?, window(d2)?);
    let b_max = b.iter().copied().max().unwrap_or(1).max(1);
    let z = b_max * (ln + 1);
    let k = 2 * b_max + c2;
    let max_log = n.iter().map(|v| v.trailing_zeros() as usize).max().unwrap_or(0);
    let z_bar = z + 3 * k * max_log;
    let theta1 = ArchSpec {
        variant: Variant::F1,
        image: (d1, d2),
        channels: vec![k; l],
        filters: pooled_filters(l, n),
        depth: z,
        pool: n.to_vec(),
        window,
    };
    let theta2 = ArchSpec { variant: Variant::F2, channels: vec![2 * k + 4; l], depth: z_bar, ..theta1.clone() };
    let theta3 = ArchSpec { variant: Variant::F3, filters: dilated_filters(l), pool: vec![prod], ..theta2.clone() };
    for t in [&theta1, &theta2, &theta3] {
        t.validate()?;
    }
    Ok(Theorem1Params { theta1, theta2, theta3 })
}

/// Architecture of classifier `j` for the adaptive values `l`, `n`, `k`, `z`.
pub fn table1_params(j: usize, l: usize, n: &[usize], k: usize, z: usize, d1: usize, d2: usize) -> Result<ArchSpec> {
    let variant =
        Variant::from_index(j).ok_or_else(|| HmpError::config(format!("classifier index {j} not in 1..4")))?;
    if l == 0 || k == 0 || z == 0 {
        return Err(HmpError::config("l, k and z must be positive"));
    }
    check_pooling(l, n).map_err(|e| HmpError::config(e.to_string()))?;
    let p = 1usize << l;
    if d1.min(d2) < p {
        return Err(HmpError::config(format!("image {d1}x{d2} too small for level {l}")));
    }
    let prod: usize = n.iter().product();
    let (e1, e2) = (d1 + 1 - p, d2 + 1 - p);
    let (filters, pool, window) = match variant {
        Variant::F1 | Variant::F2 => (pooled_filters(l, n), n.to_vec(), (e1.div_ceil(prod), e2.div_ceil(prod))),
        Variant::F3 => (dilated_filters(l), vec![prod], (e1.div_ceil(prod), e2.div_ceil(prod))),
        Variant::F4 => (dilated_filters(l), vec![1], (e1, e2)),
    };
    let arch = ArchSpec { variant, image: (d1, d2), channels: vec![k; l], filters, depth: z, pool, window };
    arch.validate()?;
    Ok(arch)
}

/// `z^2 log2(z d1 d2)`: the VC-dimension bound up to its constant factor.
pub fn vc_bound_shape(z: usize, d1: usize, d2: usize) -> f64 {
    let z = z as f64;
    z * z * (z * d1 as f64 * d2 as f64).log2()
}

/// `n^{-p / (2p + 4)}`: the rate of the main theorem without constants or log factors.
pub fn rate_curve(n: f64, p: f64) -> f64 {
    n.powf(-p / (2.0 * p + 4.0))
}
