//! Constructive rewrites between network classes.
//!
//! * [`build_gmax`]: a two-hidden-layer ReLU net computing the maximum of four
//!   nonnegative numbers.
//! * [`embed_feedforward`]: a conv block whose output channel evaluates a
//!   feedforward net on four strided taps.
//! * [`maxpool_to_conv_sub`]: a conv block that, followed by subsampling,
//!   replaces local max-pooling.
//! * [`commute_subsample`]: filter dilation moving a subsampling layer past a block.
//! * [`convert_f1_to_f2`], [`convert_f2_to_f3`]: exact class conversions.
//! * [`represent_hmp`]: an F1 network computing the relaxed model exactly.
//!
//! Channel layout follows the constructions: originals `1..k`, copies
//! `k+1..2k`, workspace `2k+1..`.

use rand::Rng;

use crate::error::{HmpError, Result};
use crate::layers::{ConvBlock, ConvLayer};
use crate::model::{delta, dims, validate_spec, GFunction, HmpSpec};
use crate::networks::{ArchSpec, Network, Variant};

/// Feedforward ReLU net `R^4 -> R` with `L_net` hidden layers of equal width
/// `r_net` and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNet {
    /// Per hidden layer: row-major weights `w^{(r)}_{i,j}` (`r_net x fan_in`) and biases `w^{(r)}_{i,0}`.
    hidden: Vec<(Vec<f64>, Vec<f64>)>,
    out_w: Vec<f64>,
    out_b: f64,
}

impl FeedforwardNet {
    /// Builds a net from hidden layers `(weights, biases)` and output weights.
    pub fn new(hidden: Vec<(Vec<f64>, Vec<f64>)>, out_w: Vec<f64>, out_b: f64) -> Result<Self> {
        let r = out_w.len();
        if hidden.is_empty() || r == 0 {
            return Err(HmpError::shape("feedforward net needs a hidden layer of positive width"));
        }
        for (idx, (w, b)) in hidden.iter().enumerate() {
            let fan_in = if idx == 0 { 4 } else { r };
            if b.len() != r || w.len() != r * fan_in {
                return Err(HmpError::shape(format!("hidden layer {} has the wrong shape", idx + 1)));
            }
        }
        Ok(FeedforwardNet { hidden, out_w, out_b })
    }

    /// Net with weights uniform in `[-scale, scale]`.
    pub fn random(depth: usize, width: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut u = |n: usize| (0..n).map(|_| rng.random_range(-scale..scale)).collect::<Vec<f64>>();
        let hidden = (0..depth)
            .map(|r| {
                let fan_in = if r == 0 { 4 } else { width };
                (u(width * fan_in), u(width))
            })
            .collect();
        let out_w = u(width);
        let out_b = u(1)[0];
        FeedforwardNet { hidden, out_w, out_b }
    }

    /// Number of hidden layers `L_net`.
    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    /// Hidden width `r_net`.
    pub fn width(&self) -> usize {
        self.out_w.len()
    }

    /// Weight `w^{(r)}_{i,j}` of hidden layer `r` (1-based), neuron `i`, input `j`; `j = 0` is the bias.
    pub fn hidden_weight(&self, r: usize, i: usize, j: usize) -> f64 {
        let (w, b) = &self.hidden[r - 1];
        if j == 0 {
            b[i - 1]
        } else {
            let fan_in = w.len() / self.width();
            w[(i - 1) * fan_in + (j - 1)]
        }
    }

    /// Output weight `w_{1,j}`; `j = 0` is the bias.
    pub fn output_weight(&self, j: usize) -> f64 {
        if j == 0 {
            self.out_b
        } else {
            self.out_w[j - 1]
        }
    }

    /// Evaluates the net.
    pub fn eval(&self, u: [f64; 4]) -> f64 {
        let mut cur: Vec<f64> = u.to_vec();
        for (w, b) in &self.hidden {
            let fan_in = cur.len();
            cur = b
                .iter()
                .enumerate()
                .map(|(i, bi)| {
                    let mut s = 0.0;
                    for (wv, x) in w[i * fan_in..(i + 1) * fan_in].iter().zip(&cur) {
                        s += wv * x;
                    }
                    (s + bi).max(0.0)
                })
                .collect();
        }
        let mut s = 0.0;
        for (w, x) in self.out_w.iter().zip(&cur) {
            s += w * x;
        }
        s + self.out_b
    }
}

/// `g_max(x) = s(s(x2-x1) + s(x1) - (s(x4-x3) + s(x3))) + s(s(x4-x3) + s(x3))`
/// with `s` the ReLU; equals `max(x)` for nonnegative `x`.
pub fn build_gmax() -> FeedforwardNet {
    #[rustfmt::skip]
    let w1 = vec![
        -1.0, 1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, -1.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
    ];
    #[rustfmt::skip]
    let w2 = vec![
        1.0, 1.0, -1.0, -1.0,
        0.0, 0.0, 1.0, 1.0,
        0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    ];
    FeedforwardNet::new(vec![(w1, vec![0.0; 4]), (w2, vec![0.0; 4])], vec![1.0, 1.0, 0.0, 0.0], 0.0)
        .expect("fixed shape")
}

/// Writes phase `p` (`0..=L_net`) of the embedding of `g` into `layer`.
///
/// Phase 0 fills workspace channels `t+1..t+r_net` from taps `(1,1)`,
/// `(delta+1,1)`, `(1,delta+1)`, `(delta+1,delta+1)` of channels `ch[0..4]`;
/// middle phases apply hidden layers at tap `(1,1)`; the last phase writes
/// channel `ch[4]` and zeroes the workspace. All channel indices are 1-based.
fn write_phase(layer: &mut ConvLayer, g: &FeedforwardNet, p: usize, t: usize, ch: [usize; 5], delta: usize) {
    let r = g.width();
    let taps = [(1, 1), (delta + 1, 1), (1, delta + 1), (delta + 1, delta + 1)];
    if p == 0 {
        for i in 1..=r {
            layer.clear_output(t + i);
            for (m, &(t1, t2)) in taps.iter().enumerate() {
                layer.set_weight(t1, t2, ch[m], t + i, g.hidden_weight(1, i, m + 1));
            }
            layer.set_bias(t + i, g.hidden_weight(1, i, 0));
        }
    } else if p < g.depth() {
        for i in 1..=r {
            layer.clear_output(t + i);
            for j in 1..=r {
                layer.set_weight(1, 1, t + j, t + i, g.hidden_weight(p + 1, i, j));
            }
            layer.set_bias(t + i, g.hidden_weight(p + 1, i, 0));
        }
    } else {
        layer.clear_output(ch[4]);
        for j in 1..=r {
            layer.set_weight(1, 1, t + j, ch[4], g.output_weight(j));
        }
        layer.set_bias(ch[4], g.output_weight(0));
        for i in 1..=r {
            layer.clear_output(t + i);
        }
    }
}

/// Layer mapping `kin` channels to `kout` with unit taps `(1,1)` from channel `c` to `c`
/// for `c <= min(kin, kout)`.
fn partial_propagation(kin: usize, kout: usize, filter: usize) -> ConvLayer {
    let mut l = ConvLayer::zeros(kin, kout, filter);
    for c in 1..=kin.min(kout) {
        l.set_weight(1, 1, c, c, 1.0);
    }
    l
}

/// Conv block of depth `L_net + 1` on `t + r_net` channels whose channel `s5`
/// becomes `relu(g(f_{(i,j),s1}, f_{(i+delta,j),s2}, f_{(i,j+delta),s3}, f_{(i+delta,j+delta),s4}))`;
/// taps outside the grid read zero. Channels `1..t` other than `s5` are
/// propagated unchanged. `filter` must be at least `delta + 1`.
pub fn embed_feedforward(
    g: &FeedforwardNet,
    t: usize,
    ch: [usize; 5],
    delta: usize,
    filter: usize,
) -> Result<ConvBlock> {
    if delta == 0 || filter < delta + 1 {
        return Err(HmpError::config(format!("filter size {filter} cannot reach offset {delta}")));
    }
    if ch.iter().any(|&c| c == 0 || c > t) {
        return Err(HmpError::config(format!("channels {ch:?} outside 1..{t}")));
    }
    let total = t + g.width();
    let layers = (0..=g.depth())
        .map(|p| {
            let mut l = ConvLayer::propagation(total, filter);
            write_phase(&mut l, g, p, t, ch, delta);
            l
        })
        .collect();
    ConvBlock::new(layers)
}

/// Conv block on `2k + 4` channels with `3 n k` layers such that subsampling
/// its output by `2^n` equals max-pooling the input by `2^n` on channels
/// `1..k`, for nonnegative inputs. Requires `filter >= 2^{n-1} + 1`. For
/// `n = 0` the block is the identity. Channels above `k` end in an
/// unspecified state.
pub fn maxpool_to_conv_sub(k: usize, n: u32, filter: usize) -> Result<ConvBlock> {
    let c = 2 * k + 4;
    if k == 0 {
        return Err(HmpError::config("k must be positive"));
    }
    if n == 0 {
        return Ok(ConvBlock::identity(c, filter));
    }
    if filter < (1 << (n - 1)) + 1 {
        return Err(HmpError::config(format!("filter size {filter} below 2^{} + 1", n - 1)));
    }
    let gmax = build_gmax();
    let mut layers = Vec::with_capacity(3 * n as usize * k);
    for r in 0..n {
        let d = 1usize << r;
        for s in 1..=k {
            let src = if s == 1 { s } else { k + s };
            for p in 0..3 {
                let mut l = ConvLayer::propagation(c, filter);
                if s == 1 && p == 0 {
                    for q in 1..=k {
                        l.clear_output(k + q);
                        l.set_weight(1, 1, q, k + q, 1.0);
                    }
                }
                write_phase(&mut l, &gmax, p, 2 * k, [src, src, src, src, s], d);
                layers.push(l);
            }
        }
    }
    ConvBlock::new(layers)
}

/// Dilates every filter of `block` by `n`: tap `(t1, t2)` moves to
/// `((t1-1) n + 1, (t2-1) n + 1)` in a filter of size `(M-1) n + 1`.
pub fn commute_subsample(block: &ConvBlock, n: usize) -> ConvBlock {
    assert!(n >= 1);
    let m = block.filter_size();
    let mm = (m - 1) * n + 1;
    if block.depth() == 0 {
        return ConvBlock::identity(block.in_channels(), mm);
    }
    let layers = block
        .layers()
        .iter()
        .map(|l| {
            let mut d = ConvLayer::zeros(l.in_channels(), l.out_channels(), mm);
            for t1 in 1..=m {
                for t2 in 1..=m {
                    for s1 in 1..=l.in_channels() {
                        for s2 in 1..=l.out_channels() {
                            d.set_weight((t1 - 1) * n + 1, (t2 - 1) * n + 1, s1, s2, l.weight(t1, t2, s1, s2));
                        }
                    }
                }
            }
            d.bias_mut().copy_from_slice(l.bias());
            d
        })
        .collect();
    ConvBlock::new(layers).expect("shapes unchanged")
}

/// Copies `l` into a zero layer with `kin x kout` channels.
fn widen(l: &ConvLayer, kin: usize, kout: usize) -> ConvLayer {
    let mut w = ConvLayer::zeros(kin, kout, l.filter_size());
    for t1 in 1..=l.filter_size() {
        for t2 in 1..=l.filter_size() {
            for s1 in 1..=l.in_channels() {
                for s2 in 1..=l.out_channels() {
                    w.set_weight(t1, t2, s1, s2, l.weight(t1, t2, s1, s2));
                }
            }
        }
    }
    w.bias_mut()[..l.out_channels()].copy_from_slice(l.bias());
    w
}

/// Rewrites an F1 network as an F2 network with `2k + 4` channels per block
/// and depth `z + 3 k_max log2(s_max)`, computing the same function.
pub fn convert_f1_to_f2(net: &Network) -> Result<Network> {
    let a = net.arch();
    if a.variant != Variant::F1 {
        return Err(HmpError::config("convert_f1_to_f2 needs an F1 network"));
    }
    let l = a.blocks();
    for (r, &s) in a.pool.iter().enumerate() {
        if !s.is_power_of_two() {
            return Err(HmpError::config(format!("pool size {s} is not a power of two")));
        }
        if s > 1 && a.filters[r] < s / 2 + 1 {
            return Err(HmpError::config(format!(
                "filter size {} of block {} cannot absorb pooling by {s}",
                a.filters[r],
                r + 1
            )));
        }
    }
    let k_max = *a.channels.iter().max().expect("L >= 1");
    let log_max = a.pool.iter().map(|s| s.trailing_zeros() as usize).max().unwrap_or(0);
    let z_bar = a.depth + 3 * k_max * log_max;
    let wide: Vec<usize> = a.channels.iter().map(|k| 2 * k + 4).collect();
    let mut blocks = Vec::with_capacity(l);
    for (r, block) in net.blocks().iter().enumerate() {
        let kin = if r == 0 { 1 } else { wide[r - 1] };
        let (k, m) = (a.channels[r], a.filters[r]);
        let mut layers: Vec<ConvLayer> = block
            .layers()
            .iter()
            .enumerate()
            .map(|(i, lw)| widen(lw, if i == 0 { kin } else { wide[r] }, wide[r]))
            .collect();
        if r + 1 < l {
            let n = a.pool[r].trailing_zeros();
            layers.extend(maxpool_to_conv_sub(k, n, m)?.layers().iter().cloned());
        }
        while layers.len() < z_bar {
            layers.push(ConvLayer::propagation(wide[r], m));
        }
        blocks.push(ConvBlock::new(layers)?);
    }
    let mut out = vec![0.0; wide[l - 1]];
    out[..a.channels[l - 1]].copy_from_slice(net.out_weights());
    let arch = ArchSpec { variant: Variant::F2, channels: wide, depth: z_bar, ..a.clone() };
    Network::new(arch, blocks, out)
}

/// Rewrites an F2 network as an F3 network by moving every subsampling layer
/// to the end: block `r` is dilated by `s_1 ... s_{r-1}` and one subsampling
/// layer of size `s_1 ... s_{L-1}` follows the last block.
pub fn convert_f2_to_f3(net: &Network) -> Result<Network> {
    let a = net.arch();
    if a.variant != Variant::F2 {
        return Err(HmpError::config("convert_f2_to_f3 needs an F2 network"));
    }
    let mut prod = 1;
    let mut blocks = Vec::with_capacity(a.blocks());
    for (r, b) in net.blocks().iter().enumerate() {
        if r > 0 {
            prod *= a.pool[r - 1];
        }
        blocks.push(commute_subsample(b, prod));
    }
    let filters = blocks.iter().map(ConvBlock::filter_size).collect();
    let arch = ArchSpec { variant: Variant::F3, filters, pool: vec![prod], ..a.clone() };
    Network::new(arch, blocks, net.out_weights().to_vec())
}

/// F1 network computing the relaxed model `m-bar` of `spec` exactly on
/// `d1 x d2` images. Every function of `spec` must be a feedforward net and
/// all share depth and width.
pub fn represent_hmp(spec: &HmpSpec, d1: usize, d2: usize) -> Result<Network> {
    let report = validate_spec(spec, d1, d2);
    if let Some(c) = report.first_failure() {
        return Err(HmpError::spec(format!("{} failed: {}", c.name, c.detail)));
    }
    if report.power_form.is_none() {
        return Err(HmpError::spec(format!("image {d1}x{d2} is not of the form 2^l m - 1 with m >= 2")));
    }
    let l = spec.level;
    let nets: Vec<Vec<&FeedforwardNet>> = spec
        .g
        .iter()
        .map(|row| {
            row.iter()
                .map(|g| match g {
                    GFunction::Net(n) => Ok(n),
                    _ => Err(HmpError::spec("every function must be a feedforward net")),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let (l_net, r_net) = (nets[0][0].depth(), nets[0][0].width());
    if nets.iter().flatten().any(|n| n.depth() != l_net || n.width() != r_net) {
        return Err(HmpError::spec("all feedforward nets must share depth and width"));
    }
    let b_max = spec.b_max();
    let k = 2 * b_max + r_net;
    let z = b_max * (l_net + 1);
    let mut filters = Vec::with_capacity(l);
    let mut blocks = Vec::with_capacity(l);
    for r in 1..=l {
        let dl = delta(r - 1, spec)?;
        let m = dl + 1;
        filters.push(m);
        let kin = if r == 1 { 1 } else { k };
        let mut layers = Vec::with_capacity(z);
        for t in 0..z {
            let mut layer = if t == 0 { partial_propagation(kin, k, m) } else { ConvLayer::propagation(k, m) };
            if t == 0 {
                for q in 1..=spec.b(r - 1) {
                    layer.clear_output(b_max + q);
                    layer.set_weight(1, 1, q, b_max + q, 1.0);
                }
            }
            let (s, p) = (t / (l_net + 1) + 1, t % (l_net + 1));
            if s <= spec.b(r) {
                let w = spec.wiring[r - 1][s - 1];
                let src = |i: usize| if s == 1 { w[i] } else { b_max + w[i] };
                let ch = [src(0), src(1), src(2), src(3), s];
                write_phase(&mut layer, nets[r - 1][s - 1], p, 2 * b_max, ch, dl);
            }
            layers.push(layer);
        }
        blocks.push(ConvBlock::new(layers)?);
    }
    let window = dims(l, d1, d2, spec)?;
    let arch = ArchSpec {
        variant: Variant::F1,
        image: (d1, d2),
        channels: vec![k; l],
        filters,
        depth: z,
        pool: spec.pooling.clone(),
        window,
    };
    let mut out = vec![0.0; k];
    out[0] = 1.0;
    Network::new(arch, blocks, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{conv_block_forward, local_max_pool, subsample, FeatureStack};
    use crate::model::{eval_model, ImageGrid, Mode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_stack(r: usize, c: usize, k: usize, rng: &mut ChaCha8Rng) -> FeatureStack {
        FeatureStack::new(r, c, k, (0..r * c * k).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn gmax_examples() {
        let g = build_gmax();
        assert_eq!((g.depth(), g.width()), (2, 4));
        assert!((g.eval([0.2, 0.7, 0.1, 0.5]) - 0.7).abs() < 1e-15);
        assert_eq!(g.eval([0.0; 4]), 0.0);
        assert_eq!(g.eval([0.3; 4]), 0.3);
    }

    #[test]
    fn gmax_is_max_on_nonnegative_inputs() {
        let g = build_gmax();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let u = [rng.random::<f64>() * 5.0, rng.random(), rng.random::<f64>() * 3.0, rng.random()];
            let m = u.iter().copied().fold(0.0, f64::max);
            assert!((g.eval(u) - m).abs() < 1e-14);
        }
    }

    fn first_arg_net() -> FeedforwardNet {
        let w = vec![1.0, 0.0, 0.0, 0.0];
        FeedforwardNet::new(vec![(w, vec![0.0])], vec![1.0], 0.0).unwrap()
    }

    #[test]
    fn embed_identity_net_copies_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_stack(5, 6, 2, &mut rng).padded(3);
        let b = embed_feedforward(&first_arg_net(), 2, [1, 1, 1, 1, 2], 1, 2).unwrap();
        let y = conv_block_forward(&f, &b).unwrap();
        assert_eq!(y.channel(2), f.channel(1));
        assert_eq!(y.channel(1), f.channel(1));
    }

    #[test]
    fn embed_gmax_on_constant_stack() {
        let c = 0.4;
        let f = FeatureStack::new(6, 6, 1, vec![c; 36]).unwrap().padded(5);
        let b = embed_feedforward(&build_gmax(), 1, [1, 1, 1, 1, 1], 2, 3).unwrap();
        let y = conv_block_forward(&f, &b).unwrap();
        for i in 1..=6 {
            for j in 1..=6 {
                // Zero-filled taps never exceed c, so the max stays c everywhere.
                assert_eq!(y.get(i, j, 1), c);
            }
        }
    }

    #[test]
    fn embed_random_nets_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t = rng.random_range(1..4);
            let g = FeedforwardNet::random(rng.random_range(1..4), rng.random_range(1..4), 1.0, &mut rng);
            let d = rng.random_range(1..4);
            let ch = [
                rng.random_range(1..=t),
                rng.random_range(1..=t),
                rng.random_range(1..=t),
                rng.random_range(1..=t),
                rng.random_range(1..=t),
            ];
            let (r, c) = (rng.random_range(1..8), rng.random_range(1..8));
            let f = random_stack(r, c, t, &mut rng).padded(t + g.width());
            let b = embed_feedforward(&g, t, ch, d, d + 1).unwrap();
            let y = conv_block_forward(&f, &b).unwrap();
            let at = |i: usize, j: usize, s: usize| if i <= r && j <= c { f.get(i, j, s) } else { 0.0 };
            for i in 1..=r {
                for j in 1..=c {
                    let want = g
                        .eval([at(i, j, ch[0]), at(i + d, j, ch[1]), at(i, j + d, ch[2]), at(i + d, j + d, ch[3])])
                        .max(0.0);
                    assert!((y.get(i, j, ch[4]) - want).abs() <= 1e-9);
                    for s in (1..=t).filter(|&s| s != ch[4]) {
                        assert_eq!(y.get(i, j, s), f.get(i, j, s));
                    }
                }
            }
        }
    }

    #[test]
    fn maxpool_rewrite_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (k, n, size) in [(1, 1, 6), (2, 2, 8), (1, 3, 9)] {
            let b = maxpool_to_conv_sub(k, n, (1 << (n - 1)) + 1).unwrap();
            assert_eq!(b.depth(), 3 * n as usize * k);
            for _ in 0..10 {
                let f = random_stack(size, size, k, &mut rng).padded(2 * k + 4);
                let got = subsample(&conv_block_forward(&f, &b).unwrap(), 1 << n);
                let want = local_max_pool(&f, 1 << n);
                assert!(got.max_abs_diff(&want, k) <= 1e-12);
            }
        }
        assert_eq!(maxpool_to_conv_sub(2, 0, 1).unwrap().depth(), 0);
        assert!(maxpool_to_conv_sub(1, 2, 2).is_err());
    }

    #[test]
    fn dilation_layout() {
        let l = ConvLayer::new(1, 1, 2, vec![1.0, 2.0, 3.0, 4.0], vec![0.5]).unwrap();
        let b = ConvBlock::new(vec![l]).unwrap();
        assert_eq!(commute_subsample(&b, 1), b);
        let d = commute_subsample(&b, 2);
        assert_eq!(d.filter_size(), 3);
        let dl = &d.layers()[0];
        for t1 in 1..=3 {
            for t2 in 1..=3 {
                let v = dl.weight(t1, t2, 1, 1);
                if t1 % 2 == 1 && t2 % 2 == 1 {
                    assert_eq!(v, b.layers()[0].weight(t1.div_ceil(2), t2.div_ceil(2), 1, 1));
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert_eq!(dl.bias(), &[0.5]);
    }

    #[test]
    fn level_one_gmax_model_is_window_max() {
        let spec = HmpSpec::uniform(1, vec![], vec![], vec![vec![[1, 1, 1, 1]]], GFunction::Net(build_gmax())).unwrap();
        let net = represent_hmp(&spec, 5, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = ImageGrid::new(5, 5, (0..25).map(|_| rng.random()).collect()).unwrap();
            // Every pixel lies in some 2x2 window, so the result is the global max.
            let want = x.values().iter().copied().fold(0.0, f64::max);
            assert!((net.forward(&x).unwrap() - want).abs() < 1e-12);
            assert!((eval_model(&x, &spec, Mode::Relaxed).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn represent_rejects_non_net_functions_and_bad_sizes() {
        let spec = HmpSpec::uniform(
            1,
            vec![],
            vec![],
            vec![vec![[1, 1, 1, 1]]],
            GFunction::Builtin(crate::model::BuiltinG::Max),
        )
        .unwrap();
        assert!(represent_hmp(&spec, 5, 5).is_err());
        let spec = HmpSpec::uniform(1, vec![], vec![], vec![vec![[1, 1, 1, 1]]], GFunction::Net(build_gmax())).unwrap();
        assert!(represent_hmp(&spec, 4, 4).is_err());
    }
}
