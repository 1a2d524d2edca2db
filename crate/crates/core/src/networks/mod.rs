//! The network classes F1 to F4 assembled from layer primitives.
//!
//! * F1: conv blocks interleaved with local max-pooling.
//! * F2: conv blocks interleaved with subsampling.
//! * F3: all conv blocks, then one subsampling layer of size `s`.
//! * F4: F3 with `s = 1`.
//!
//! Every class ends in the global-max output layer over a `d~1 x d~2` window.

pub mod backprop;
pub mod params;

pub use backprop::{loss_and_gradients, Gradients, Trace};
pub use params::{param_count, rate_curve, table1_params, theorem1_params, vc_bound_shape, Theorem1Params};

use rand::Rng;

use crate::error::{HmpError, Result};
use crate::layers::{conv_forward_raw, local_max_pool, output_layer, subsample, ConvBlock, ConvLayer, FeatureStack};
use crate::model::ImageGrid;

/// Network class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    F1,
    F2,
    F3,
    F4,
}

impl Variant {
    /// Classifier index `j` in `1..=4`.
    pub fn index(self) -> usize {
        match self {
            Variant::F1 => 1,
            Variant::F2 => 2,
            Variant::F3 => 3,
            Variant::F4 => 4,
        }
    }

    /// Inverse of [`Variant::index`].
    pub fn from_index(j: usize) -> Option<Self> {
        match j {
            1 => Some(Variant::F1),
            2 => Some(Variant::F2),
            3 => Some(Variant::F3),
            4 => Some(Variant::F4),
            _ => None,
        }
    }

    /// True for classes with one pooling layer between consecutive blocks.
    pub fn interleaved(self) -> bool {
        matches!(self, Variant::F1 | Variant::F2)
    }
}

/// Architecture descriptor `theta`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArchSpec {
    pub variant: Variant,
    /// Input image size `(d1, d2)`.
    pub image: (usize, usize),
    /// Channels `(k_1..k_L)`; `L` is the length.
    pub channels: Vec<usize>,
    /// Filter sizes `(M_1..M_L)`.
    pub filters: Vec<usize>,
    /// Layers per block `z`.
    pub depth: usize,
    /// Pool sizes `(s_1..s_{L-1})` for F1/F2, or the single final `s` for F3/F4.
    pub pool: Vec<usize>,
    /// Output window `(d~1, d~2)`.
    pub window: (usize, usize),
}

impl ArchSpec {
    /// Number of blocks `L`.
    pub fn blocks(&self) -> usize {
        self.channels.len()
    }

    /// Grid size after all pooling and subsampling layers.
    pub fn final_grid(&self) -> (usize, usize) {
        let (mut a, mut b) = self.image;
        for &s in &self.pool {
            a = a.div_ceil(s);
            b = b.div_ceil(s);
        }
        (a, b)
    }

    /// Checks all structural constraints.
    pub fn validate(&self) -> Result<()> {
        let l = self.blocks();
        if l == 0 {
            return Err(HmpError::config("at least one block is required"));
        }
        if self.filters.len() != l {
            return Err(HmpError::config(format!("{} filter sizes for {l} blocks", self.filters.len())));
        }
        if self.image.0 == 0 || self.image.1 == 0 || self.depth == 0 {
            return Err(HmpError::config("image size and depth must be positive"));
        }
        if self.channels.contains(&0) || self.filters.contains(&0) || self.pool.contains(&0) {
            return Err(HmpError::config("channels, filters and pool sizes must be positive"));
        }
        let want = if self.variant.interleaved() { l - 1 } else { 1 };
        if self.pool.len() != want {
            return Err(HmpError::config(format!(
                "{:?} needs {want} pool sizes, got {}",
                self.variant,
                self.pool.len()
            )));
        }
        if self.variant == Variant::F4 && self.pool[0] != 1 {
            return Err(HmpError::config("F4 fixes the subsampling size to 1"));
        }
        let g = self.final_grid();
        if self.window.0 == 0 || self.window.1 == 0 || self.window.0 > g.0 || self.window.1 > g.1 {
            return Err(HmpError::config(format!(
                "output window {}x{} exceeds final grid {}x{}",
                self.window.0, self.window.1, g.0, g.1
            )));
        }
        Ok(())
    }

    /// Input channels of block `r` (1-based): `k_{r-1}` with `k_0 = 1`.
    pub fn block_input_channels(&self, r: usize) -> usize {
        if r == 1 {
            1
        } else {
            self.channels[r - 2]
        }
    }

    /// Compact one-line description.
    pub fn describe(&self) -> String {
        format!(
            "{:?} image={}x{} k={} M={} z={} s={} window={}x{}",
            self.variant,
            self.image.0,
            self.image.1,
            join(&self.channels),
            join(&self.filters),
            self.depth,
            join(&self.pool),
            self.window.0,
            self.window.1
        )
    }
}

pub(crate) fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// An architecture with all its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: ArchSpec,
    blocks: Vec<ConvBlock>,
    out_weights: Vec<f64>,
}

impl Network {
    /// Assembles a network and checks it against the architecture.
    pub fn new(arch: ArchSpec, blocks: Vec<ConvBlock>, out_weights: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if blocks.len() != arch.blocks() {
            return Err(HmpError::config(format!("{} blocks for L = {}", blocks.len(), arch.blocks())));
        }
        for (r, b) in blocks.iter().enumerate() {
            let ok = b.in_channels() == arch.block_input_channels(r + 1)
                && b.out_channels() == arch.channels[r]
                && b.filter_size() == arch.filters[r]
                && b.depth() == arch.depth;
            if !ok {
                return Err(HmpError::config(format!("block {} does not match the architecture", r + 1)));
            }
        }
        if out_weights.len() != arch.channels[arch.blocks() - 1] {
            return Err(HmpError::config("output weight count must equal k_L"));
        }
        Ok(Network { arch, blocks, out_weights })
    }

    /// Network with all weights zero.
    pub fn zeros(arch: ArchSpec) -> Result<Self> {
        arch.validate()?;
        let blocks = (1..=arch.blocks())
            .map(|r| {
                let k = arch.channels[r - 1];
                let m = arch.filters[r - 1];
                let mut layers = vec![ConvLayer::zeros(arch.block_input_channels(r), k, m)];
                layers.extend((1..arch.depth).map(|_| ConvLayer::zeros(k, k, m)));
                ConvBlock::new(layers).expect("chained by construction")
            })
            .collect();
        let kl = arch.channels[arch.blocks() - 1];
        Network::new(arch, blocks, vec![0.0; kl])
    }

    /// Random initialization: filters uniform in `+-sqrt(6 / fan_in)` with
    /// `fan_in = M^2 k'`, biases zero, output weights uniform in `+-1/sqrt(k_L)`.
    pub fn init(arch: ArchSpec, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Network::zeros(arch)?;
        for b in &mut net.blocks {
            for l in b.layers_mut() {
                let fan_in = (l.filter_size() * l.filter_size() * l.in_channels()) as f64;
                let a = (6.0 / fan_in).sqrt();
                for w in l.weights_mut() {
                    *w = rng.random_range(-a..a);
                }
            }
        }
        let a = 1.0 / (net.out_weights.len() as f64).sqrt();
        for w in &mut net.out_weights {
            *w = rng.random_range(-a..a);
        }
        Ok(net)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn blocks(&self) -> &[ConvBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ConvBlock] {
        &mut self.blocks
    }

    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    pub fn out_weights_mut(&mut self) -> &mut [f64] {
        &mut self.out_weights
    }

    /// Number of stored weights including biases and output weights.
    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(ConvBlock::param_count).sum::<usize>() + self.out_weights.len()
    }

    /// All weights in construction order: per block, per layer, filter then
    /// bias; then the output weights.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for b in &self.blocks {
            for l in b.layers() {
                v.extend_from_slice(l.weights());
                v.extend_from_slice(l.bias());
            }
        }
        v.extend_from_slice(&self.out_weights);
        v
    }

    /// Inverse of [`Network::flat_params`].
    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(HmpError::shape(format!("{} values for {} weights", p.len(), self.param_count())));
        }
        let mut o = 0;
        for b in &mut self.blocks {
            for l in b.layers_mut() {
                let n = l.weights().len();
                l.weights_mut().copy_from_slice(&p[o..o + n]);
                o += n;
                let n = l.bias().len();
                l.bias_mut().copy_from_slice(&p[o..o + n]);
                o += n;
            }
        }
        self.out_weights.copy_from_slice(&p[o..]);
        Ok(())
    }

    /// Checks that an image matches the architecture's input size.
    pub fn check_input(&self, x: &ImageGrid) -> Result<()> {
        if (x.d1(), x.d2()) != self.arch.image {
            return Err(HmpError::shape(format!(
                "image {}x{} does not match network input {}x{}",
                x.d1(),
                x.d2(),
                self.arch.image.0,
                self.arch.image.1
            )));
        }
        Ok(())
    }

    /// Network output `f(x)`.
    pub fn forward(&self, x: &ImageGrid) -> Result<f64> {
        self.check_input(x)?;
        self.forward_stack(&FeatureStack::from_image(x))
    }

    /// Network output on a one-channel input stack of the architecture's size.
    pub fn forward_stack(&self, x: &FeatureStack) -> Result<f64> {
        if (x.rows(), x.cols(), x.channels()) != (self.arch.image.0, self.arch.image.1, 1) {
            return Err(HmpError::shape("input stack does not match the architecture"));
        }
        let needs = self.needed_regions();
        let mut cur = x.clone();
        let l = self.arch.blocks();
        for (r, block) in self.blocks.iter().enumerate() {
            for (t, layer) in block.layers().iter().enumerate() {
                let (nr, nc) = needs[r][t];
                let mut out = FeatureStack::zeros(cur.rows(), cur.cols(), layer.out_channels());
                conv_forward_raw(&cur, layer, nr, nc, out.data_mut());
                cur = out;
            }
            if self.arch.variant.interleaved() && r + 1 < l {
                let s = self.arch.pool[r];
                cur = match self.arch.variant {
                    Variant::F1 => local_max_pool(&cur, s),
                    _ => subsample(&cur, s),
                };
            }
        }
        if !self.arch.variant.interleaved() {
            cur = subsample(&cur, self.arch.pool[0]);
        }
        output_layer(&cur, &self.out_weights, self.arch.window)
    }

    /// For every block and layer, the leading rows and columns of the layer's
    /// output that can influence the network output. Values outside this region
    /// are never read, so the forward pass skips them.
    pub(crate) fn needed_regions(&self) -> Vec<Vec<(usize, usize)>> {
        let a = &self.arch;
        let l = a.blocks();
        // Grid size at the input of each block.
        let mut grids = vec![a.image];
        for r in 0..l - 1 {
            let (g1, g2) = grids[r];
            grids.push(if a.variant.interleaved() {
                (g1.div_ceil(a.pool[r]), g2.div_ceil(a.pool[r]))
            } else {
                (g1, g2)
            });
        }
        let mut need = if a.variant.interleaved() {
            a.window
        } else {
            let s = a.pool[0];
            ((a.window.0 - 1) * s + 1, (a.window.1 - 1) * s + 1)
        };
        let mut out = vec![Vec::new(); l];
        for r in (0..l).rev() {
            let (g1, g2) = grids[r];
            let m = a.filters[r];
            let depth = self.blocks[r].depth();
            let mut per = vec![(0, 0); depth];
            for t in (0..depth).rev() {
                per[t] = (need.0.min(g1), need.1.min(g2));
                need = ((per[t].0 + m - 1).min(g1), (per[t].1 + m - 1).min(g2));
            }
            out[r] = per;
            if r > 0 && a.variant.interleaved() {
                let s = a.pool[r - 1];
                let (p1, p2) = grids[r - 1];
                need = match a.variant {
                    Variant::F1 => ((need.0 * s).min(p1), (need.1 * s).min(p2)),
                    _ => (((need.0 - 1) * s + 1).min(p1), ((need.1 - 1) * s + 1).min(p2)),
                };
            }
        }
        out
    }
}
