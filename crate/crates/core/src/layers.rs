//! Layer primitives: zero-padded convolution, convolutional blocks, local
//! max-pooling, subsampling and the global-max output layer, each with a
//! reverse-mode gradient.
//!
//! Feature stacks are stored position-major (`[(i * cols + j) * channels + c]`)
//! with 0-based storage; the public accessors [`FeatureStack::get`] and
//! [`ConvLayer::weight`] take 1-based indices.

use crate::error::{HmpError, Result};
use crate::model::ImageGrid;

/// Real tensor indexed `{1..rows} x {1..cols} x {1..channels}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureStack {
    /// Builds a stack from position-major data.
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(HmpError::shape("feature stack dimensions must be positive"));
        }
        if data.len() != rows * cols * channels {
            return Err(HmpError::shape(format!(
                "expected {} values for {rows}x{cols}x{channels}, got {}",
                rows * cols * channels,
                data.len()
            )));
        }
        Ok(FeatureStack { rows, cols, channels, data })
    }

    /// All-zero stack.
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        FeatureStack { rows, cols, channels, data: vec![0.0; rows * cols * channels] }
    }

    /// Single-channel stack holding the image.
    pub fn from_image(x: &ImageGrid) -> Self {
        FeatureStack { rows: x.d1(), cols: x.d2(), channels: 1, data: x.values().to_vec() }
    }

    /// Copies the given channels of `self` into channels `1..` of a stack with
    /// `channels` channels; the remaining channels are zero.
    pub fn padded(&self, channels: usize) -> Self {
        assert!(channels >= self.channels);
        let mut out = FeatureStack::zeros(self.rows, self.cols, channels);
        for p in 0..self.rows * self.cols {
            out.data[p * channels..p * channels + self.channels]
                .copy_from_slice(&self.data[p * self.channels..(p + 1) * self.channels]);
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Position-major values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.cols + j) * self.channels + c
    }

    /// Value at 1-based `(i, j, c)`.
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        assert!(
            (1..=self.rows).contains(&i) && (1..=self.cols).contains(&j) && (1..=self.channels).contains(&c),
            "index ({i},{j},{c}) out of range"
        );
        self.data[self.idx(i - 1, j - 1, c - 1)]
    }

    /// Sets the value at 1-based `(i, j, c)`.
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        assert!(
            (1..=self.rows).contains(&i) && (1..=self.cols).contains(&j) && (1..=self.channels).contains(&c),
            "index ({i},{j},{c}) out of range"
        );
        let k = self.idx(i - 1, j - 1, c - 1);
        self.data[k] = v;
    }

    /// Channel `c` (1-based) as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        assert!((1..=self.channels).contains(&c));
        self.data.iter().skip(c - 1).step_by(self.channels).copied().collect()
    }

    /// Largest absolute difference over channels `1..=channels` of two stacks
    /// with equal index sets.
    pub fn max_abs_diff(&self, other: &FeatureStack, channels: usize) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m: f64 = 0.0;
        for p in 0..self.rows * self.cols {
            for c in 0..channels {
                m = m.max((self.data[p * self.channels + c] - other.data[p * other.channels + c]).abs());
            }
        }
        m
    }
}

/// Weights `w_{t1,t2,s1,s2}` and biases `w_{s2}` of one convolutional layer.
///
/// The filter is stored as `[((t1 * M + t2) * in + s1) * out + s2]` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    in_ch: usize,
    out_ch: usize,
    filter: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(in_ch: usize, out_ch: usize, filter: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || filter == 0 {
            return Err(HmpError::shape("channels and filter size must be positive"));
        }
        if weights.len() != filter * filter * in_ch * out_ch || bias.len() != out_ch {
            return Err(HmpError::shape("weight or bias length does not match layer shape"));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(HmpError::shape("non-finite weight"));
        }
        Ok(ConvLayer { in_ch, out_ch, filter, weights, bias })
    }

    /// Layer with all weights and biases zero.
    pub fn zeros(in_ch: usize, out_ch: usize, filter: usize) -> Self {
        ConvLayer {
            in_ch,
            out_ch,
            filter,
            weights: vec![0.0; filter * filter * in_ch * out_ch],
            bias: vec![0.0; out_ch],
        }
    }

    /// Propagation layer: unit tap at `(1, 1)` from each channel to itself.
    pub fn propagation(channels: usize, filter: usize) -> Self {
        let mut l = Self::zeros(channels, channels, filter);
        for c in 1..=channels {
            l.set_weight(1, 1, c, c, 1.0);
        }
        l
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn filter_size(&self) -> usize {
        self.filter
    }

    /// Flat filter tensor.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Number of weights including biases.
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    fn widx(&self, t1: usize, t2: usize, s1: usize, s2: usize) -> usize {
        ((t1 * self.filter + t2) * self.in_ch + s1) * self.out_ch + s2
    }

    /// `w_{t1,t2,s1,s2}` with 1-based indices.
    pub fn weight(&self, t1: usize, t2: usize, s1: usize, s2: usize) -> f64 {
        self.check(t1, t2, s1, s2);
        self.weights[self.widx(t1 - 1, t2 - 1, s1 - 1, s2 - 1)]
    }

    /// Sets `w_{t1,t2,s1,s2}` with 1-based indices.
    pub fn set_weight(&mut self, t1: usize, t2: usize, s1: usize, s2: usize, v: f64) {
        self.check(t1, t2, s1, s2);
        let k = self.widx(t1 - 1, t2 - 1, s1 - 1, s2 - 1);
        self.weights[k] = v;
    }

    /// Sets the bias of output channel `s2` (1-based).
    pub fn set_bias(&mut self, s2: usize, v: f64) {
        self.bias[s2 - 1] = v;
    }

    /// Clears all weights into output channel `s2` (1-based) and its bias.
    pub fn clear_output(&mut self, s2: usize) {
        for t1 in 0..self.filter {
            for t2 in 0..self.filter {
                for s1 in 0..self.in_ch {
                    let k = self.widx(t1, t2, s1, s2 - 1);
                    self.weights[k] = 0.0;
                }
            }
        }
        self.bias[s2 - 1] = 0.0;
    }

    fn check(&self, t1: usize, t2: usize, s1: usize, s2: usize) {
        assert!(
            (1..=self.filter).contains(&t1)
                && (1..=self.filter).contains(&t2)
                && (1..=self.in_ch).contains(&s1)
                && (1..=self.out_ch).contains(&s2),
            "weight index ({t1},{t2},{s1},{s2}) out of range"
        );
    }
}

/// Ordered convolutional layers sharing filter size and output width; the
/// first maps `k'` channels to `k`, the rest `k` to `k`.
///
/// A block with no layers is the identity and requires `k' = k`; it only
/// arises as the empty rewrite of a size-1 pooling layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    in_ch: usize,
    out_ch: usize,
    filter: usize,
    layers: Vec<ConvLayer>,
}

impl ConvBlock {
    /// Builds a block and checks that the layer shapes chain.
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| HmpError::shape("block needs at least one layer"))?;
        let (in_ch, out_ch, filter) = (first.in_ch, first.out_ch, first.filter);
        for (r, l) in layers.iter().enumerate().skip(1) {
            if l.in_ch != out_ch || l.out_ch != out_ch || l.filter != filter {
                return Err(HmpError::shape(format!("layer {} does not chain in block", r + 1)));
            }
        }
        Ok(ConvBlock { in_ch, out_ch, filter, layers })
    }

    /// Identity block on `channels` channels.
    pub fn identity(channels: usize, filter: usize) -> Self {
        ConvBlock { in_ch: channels, out_ch: channels, filter, layers: Vec::new() }
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn filter_size(&self) -> usize {
        self.filter
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    /// Appends a `k -> k` layer with the block's filter size.
    pub fn push(&mut self, layer: ConvLayer) -> Result<()> {
        if layer.in_ch != self.out_ch || layer.out_ch != self.out_ch || layer.filter != self.filter {
            return Err(HmpError::shape("appended layer does not chain"));
        }
        self.layers.push(layer);
        Ok(())
    }

    /// Number of weights including biases.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::param_count).sum()
    }
}

/// `o_{(k',k),M,w}`: zero-padded convolution followed by the ReLU.
pub fn conv_layer_forward(input: &FeatureStack, layer: &ConvLayer) -> Result<FeatureStack> {
    if input.channels != layer.in_ch {
        return Err(HmpError::shape(format!(
            "layer expects {} input channels, stack has {}",
            layer.in_ch, input.channels
        )));
    }
    let mut out = FeatureStack::zeros(input.rows, input.cols, layer.out_ch);
    conv_forward_raw(input, layer, input.rows, input.cols, &mut out.data);
    Ok(out)
}

/// Computes outputs at 0-based positions `i < rows_needed`, `j < cols_needed`;
/// other positions of `out` are left untouched. Per output the summation runs
/// over `t1`, then `t2`, then `s1`, and the bias is added last.
pub(crate) fn conv_forward_raw(
    input: &FeatureStack,
    layer: &ConvLayer,
    rows_needed: usize,
    cols_needed: usize,
    out: &mut [f64],
) {
    let (rows, cols, kin, kout, m) = (input.rows, input.cols, layer.in_ch, layer.out_ch, layer.filter);
    let x = &input.data;
    let w = &layer.weights;
    let mut acc = vec![0.0f64; kout];
    for i in 0..rows_needed.min(rows) {
        let tmax1 = m.min(rows - i);
        for j in 0..cols_needed.min(cols) {
            let tmax2 = m.min(cols - j);
            acc.iter_mut().for_each(|a| *a = 0.0);
            for t1 in 0..tmax1 {
                let xrow = ((i + t1) * cols + j) * kin;
                for t2 in 0..tmax2 {
                    let xs = &x[xrow + t2 * kin..xrow + (t2 + 1) * kin];
                    let wbase = (t1 * m + t2) * kin * kout;
                    let ws = &w[wbase..wbase + kin * kout];
                    for (s1, &xv) in xs.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let wr = &ws[s1 * kout..(s1 + 1) * kout];
                        for (a, &wv) in acc.iter_mut().zip(wr) {
                            *a += wv * xv;
                        }
                    }
                }
            }
            let o = &mut out[(i * cols + j) * kout..(i * cols + j + 1) * kout];
            for ((dst, a), b) in o.iter_mut().zip(&acc).zip(&layer.bias) {
                let v = a + b;
                *dst = if v > 0.0 { v } else { 0.0 };
            }
        }
    }
}

/// Reverse pass of one convolutional layer.
///
/// `output` is the forward result and `grad_out` the loss gradient with
/// respect to it. Weight and bias gradients are accumulated into `grad_w` and
/// `grad_b`; if `grad_in` is given the input gradient is accumulated into it.
/// The ReLU derivative is taken as 0 at the kink.
pub fn conv_layer_backward(
    input: &FeatureStack,
    layer: &ConvLayer,
    output: &FeatureStack,
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    let (rows, cols, kin, kout, m) = (input.rows, input.cols, layer.in_ch, layer.out_ch, layer.filter);
    let x = &input.data;
    let w = &layer.weights;
    let mut gp = vec![0.0f64; kout];
    for i in 0..rows {
        let tmax1 = m.min(rows - i);
        for j in 0..cols {
            let p = (i * cols + j) * kout;
            let mut any = false;
            for s2 in 0..kout {
                let g = if output.data[p + s2] > 0.0 { grad_out[p + s2] } else { 0.0 };
                gp[s2] = g;
                any |= g != 0.0;
            }
            if !any {
                continue;
            }
            for (gb, g) in grad_b.iter_mut().zip(&gp) {
                *gb += g;
            }
            let tmax2 = m.min(cols - j);
            for t1 in 0..tmax1 {
                let xrow = ((i + t1) * cols + j) * kin;
                for t2 in 0..tmax2 {
                    let xoff = xrow + t2 * kin;
                    let wbase = (t1 * m + t2) * kin * kout;
                    for s1 in 0..kin {
                        let xv = x[xoff + s1];
                        let wr = wbase + s1 * kout;
                        if xv != 0.0 {
                            for (gw, g) in grad_w[wr..wr + kout].iter_mut().zip(&gp) {
                                *gw += g * xv;
                            }
                        }
                        if let Some(gi) = grad_in.as_deref_mut() {
                            let mut s = 0.0;
                            for (wv, g) in w[wr..wr + kout].iter().zip(&gp) {
                                s += wv * g;
                            }
                            gi[xoff + s1] += s;
                        }
                    }
                }
            }
        }
    }
}

/// Composition of the block's layers from first to last.
pub fn conv_block_forward(input: &FeatureStack, block: &ConvBlock) -> Result<FeatureStack> {
    if input.channels != block.in_ch {
        return Err(HmpError::shape(format!(
            "block expects {} input channels, stack has {}",
            block.in_ch, input.channels
        )));
    }
    let mut cur = input.clone();
    for l in &block.layers {
        cur = conv_layer_forward(&cur, l)?;
    }
    Ok(cur)
}

/// `f_max^{(s)}`: maximum over clipped `s x s` windows, output `ceil(i1/s) x ceil(i2/s)`.
pub fn local_max_pool(input: &FeatureStack, s: usize) -> FeatureStack {
    local_max_pool_with_argmax(input, s).0
}

/// Max-pooling that also returns, per output value, the flat input index of the
/// first row-major maximizer in its window.
pub fn local_max_pool_with_argmax(input: &FeatureStack, s: usize) -> (FeatureStack, Vec<usize>) {
    assert!(s >= 1);
    let (rows, cols, k) = (input.rows, input.cols, input.channels);
    let (p1, p2) = (rows.div_ceil(s), cols.div_ceil(s));
    let mut out = FeatureStack::zeros(p1, p2, k);
    let mut arg = vec![0usize; p1 * p2 * k];
    for i in 0..p1 {
        for j in 0..p2 {
            for c in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut bi = 0;
                for a in i * s..((i + 1) * s).min(rows) {
                    for b in j * s..((j + 1) * s).min(cols) {
                        let q = (a * cols + b) * k + c;
                        if input.data[q] > best {
                            best = input.data[q];
                            bi = q;
                        }
                    }
                }
                let o = (i * p2 + j) * k + c;
                out.data[o] = best;
                arg[o] = bi;
            }
        }
    }
    (out, arg)
}

/// Reverse pass of max-pooling: routes each output gradient to its recorded maximizer.
pub fn local_max_pool_backward(argmax: &[usize], grad_out: &[f64], grad_in: &mut [f64]) {
    for (&a, &g) in argmax.iter().zip(grad_out) {
        grad_in[a] += g;
    }
}

/// `f_sub^{(s)}`: the top-left value of each `s x s` window.
pub fn subsample(input: &FeatureStack, s: usize) -> FeatureStack {
    assert!(s >= 1);
    let (rows, cols, k) = (input.rows, input.cols, input.channels);
    let (p1, p2) = (rows.div_ceil(s), cols.div_ceil(s));
    let mut out = FeatureStack::zeros(p1, p2, k);
    for i in 0..p1 {
        for j in 0..p2 {
            let src = (i * s * cols + j * s) * k;
            let dst = (i * p2 + j) * k;
            out.data[dst..dst + k].copy_from_slice(&input.data[src..src + k]);
        }
    }
    out
}

/// Reverse pass of subsampling for an input of `rows x cols x k`.
pub fn subsample_backward(rows: usize, cols: usize, k: usize, s: usize, grad_out: &[f64], grad_in: &mut [f64]) {
    let (p1, p2) = (rows.div_ceil(s), cols.div_ceil(s));
    for i in 0..p1 {
        for j in 0..p2 {
            let src = (i * s * cols + j * s) * k;
            let dst = (i * p2 + j) * k;
            for c in 0..k {
                grad_in[src + c] += grad_out[dst + c];
            }
        }
    }
}

/// `f_out`: maximum over `{1..d1} x {1..d2}` of `sum_s w_s x_{(i,j),s}`.
pub fn output_layer(input: &FeatureStack, w_out: &[f64], window: (usize, usize)) -> Result<f64> {
    output_layer_with_argmax(input, w_out, window).map(|(v, _)| v)
}

/// Output layer that also returns the 0-based position of the first row-major maximizer.
pub fn output_layer_with_argmax(
    input: &FeatureStack,
    w_out: &[f64],
    window: (usize, usize),
) -> Result<(f64, (usize, usize))> {
    if w_out.len() != input.channels {
        return Err(HmpError::shape(format!("{} output weights for {} channels", w_out.len(), input.channels)));
    }
    if window.0 == 0 || window.1 == 0 || window.0 > input.rows || window.1 > input.cols {
        return Err(HmpError::config(format!(
            "output window {}x{} outside {}x{} grid",
            window.0, window.1, input.rows, input.cols
        )));
    }
    let k = input.channels;
    let mut best = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for i in 0..window.0 {
        for j in 0..window.1 {
            let p = (i * input.cols + j) * k;
            let mut v = 0.0;
            for (w, x) in w_out.iter().zip(&input.data[p..p + k]) {
                v += w * x;
            }
            if v > best {
                best = v;
                arg = (i, j);
            }
        }
    }
    Ok((best, arg))
}

/// Reverse pass of the output layer at recorded maximizer `arg` with upstream
/// gradient `g`: accumulates into `grad_w` and `grad_in`.
pub fn output_layer_backward(
    input: &FeatureStack,
    w_out: &[f64],
    arg: (usize, usize),
    g: f64,
    grad_w: &mut [f64],
    grad_in: &mut [f64],
) {
    let k = input.channels;
    let p = (arg.0 * input.cols + arg.1) * k;
    for c in 0..k {
        grad_w[c] += g * input.data[p + c];
        grad_in[p + c] += g * w_out[c];
    }
}
