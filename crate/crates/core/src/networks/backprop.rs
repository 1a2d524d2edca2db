//! Reverse-mode gradients of the squared loss.

use super::{Network, Variant};
use crate::error::{HmpError, Result};
use crate::layers::{
    conv_forward_raw, conv_layer_backward, local_max_pool_backward, local_max_pool_with_argmax, output_layer_backward,
    output_layer_with_argmax, subsample, subsample_backward, FeatureStack,
};
use crate::model::ImageGrid;

/// Gradients mirroring a network's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `(filter, bias)` per conv layer, blocks in order.
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
    /// Output weights.
    pub out: Vec<f64>,
}

impl Gradients {
    /// Zero gradients shaped like `net`.
    pub fn zeros(net: &Network) -> Self {
        let layers = net
            .blocks()
            .iter()
            .flat_map(|b| b.layers())
            .map(|l| (vec![0.0; l.weights().len()], vec![0.0; l.bias().len()]))
            .collect();
        Gradients { layers, out: vec![0.0; net.out_weights().len()] }
    }

    /// Flattened in the order of [`Network::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in &self.layers {
            v.extend_from_slice(w);
            v.extend_from_slice(b);
        }
        v.extend_from_slice(&self.out);
        v
    }

    fn scale(&mut self, c: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= c);
        }
        self.out.iter_mut().for_each(|v| *v *= c);
    }
}

enum Stage {
    Conv { block: usize, layer: usize },
    Pool { argmax: Vec<usize> },
    Sub { s: usize },
}

/// Forward pass record: every intermediate stack and every max decision.
pub struct Trace {
    stages: Vec<Stage>,
    /// `acts[i]` is the input of stage `i`; the last entry feeds the output layer.
    acts: Vec<FeatureStack>,
    out_arg: (usize, usize),
    value: f64,
}

impl Trace {
    /// Runs the forward pass of `net` on `x` and records it.
    pub fn record(net: &Network, x: &ImageGrid) -> Result<Trace> {
        net.check_input(x)?;
        let arch = net.arch();
        let needs = net.needed_regions();
        let l = arch.blocks();
        let mut stages = Vec::new();
        let mut acts = vec![FeatureStack::from_image(x)];
        for (r, block) in net.blocks().iter().enumerate() {
            for (t, layer) in block.layers().iter().enumerate() {
                let cur = acts.last().expect("nonempty");
                let (nr, nc) = needs[r][t];
                let mut out = FeatureStack::zeros(cur.rows(), cur.cols(), layer.out_channels());
                conv_forward_raw(cur, layer, nr, nc, out.data_mut());
                stages.push(Stage::Conv { block: r, layer: t });
                acts.push(out);
            }
            if arch.variant.interleaved() && r + 1 < l {
                let s = arch.pool[r];
                let cur = acts.last().expect("nonempty");
                if arch.variant == Variant::F1 {
                    let (p, argmax) = local_max_pool_with_argmax(cur, s);
                    stages.push(Stage::Pool { argmax });
                    acts.push(p);
                } else {
                    let p = subsample(cur, s);
                    stages.push(Stage::Sub { s });
                    acts.push(p);
                }
            }
        }
        if !arch.variant.interleaved() {
            let s = arch.pool[0];
            let p = subsample(acts.last().expect("nonempty"), s);
            stages.push(Stage::Sub { s });
            acts.push(p);
        }
        let (value, out_arg) =
            output_layer_with_argmax(acts.last().expect("nonempty"), net.out_weights(), arch.window)?;
        Ok(Trace { stages, acts, out_arg, value })
    }

    /// Network output.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Discrete state of the pass: ReLU on/off per conv output, the chosen
    /// maximizer per pooled value and the output position. Two weight vectors
    /// with equal patterns lie on the same smooth piece of the network.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut p = vec![self.out_arg.0, self.out_arg.1];
        for (i, st) in self.stages.iter().enumerate() {
            match st {
                Stage::Conv { .. } => p.extend(self.acts[i + 1].data().iter().map(|&v| (v > 0.0) as usize)),
                Stage::Pool { argmax } => p.extend_from_slice(argmax),
                Stage::Sub { .. } => {}
            }
        }
        p
    }

    /// Accumulates `g * df/dw` into `grads`.
    pub fn backward(&self, net: &Network, g: f64, grads: &mut Gradients) {
        let mut offsets = Vec::new();
        let mut o = 0;
        for b in net.blocks() {
            offsets.push(o);
            o += b.depth();
        }
        let last = self.acts.last().expect("nonempty");
        let mut grad = vec![0.0; last.data().len()];
        output_layer_backward(last, net.out_weights(), self.out_arg, g, &mut grads.out, &mut grad);
        for (i, st) in self.stages.iter().enumerate().rev() {
            let input = &self.acts[i];
            match st {
                Stage::Conv { block, layer } => {
                    let lw = &net.blocks()[*block].layers()[*layer];
                    let (gw, gb) = &mut grads.layers[offsets[*block] + layer];
                    if i == 0 {
                        conv_layer_backward(input, lw, &self.acts[i + 1], &grad, gw, gb, None);
                    } else {
                        let mut gi = vec![0.0; input.data().len()];
                        conv_layer_backward(input, lw, &self.acts[i + 1], &grad, gw, gb, Some(&mut gi));
                        grad = gi;
                    }
                }
                Stage::Pool { argmax } => {
                    let mut gi = vec![0.0; input.data().len()];
                    local_max_pool_backward(argmax, &grad, &mut gi);
                    grad = gi;
                }
                Stage::Sub { s } => {
                    let mut gi = vec![0.0; input.data().len()];
                    subsample_backward(input.rows(), input.cols(), input.channels(), *s, &grad, &mut gi);
                    grad = gi;
                }
            }
        }
    }
}

/// Mean squared loss `(1/B) sum (y_i - f(x_i))^2` over the batch and its gradient.
pub fn loss_and_gradients(net: &Network, batch: &[(&ImageGrid, u8)]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(HmpError::config("empty batch"));
    }
    let mut grads = Gradients::zeros(net);
    let mut loss = 0.0;
    for (x, y) in batch {
        if *y > 1 {
            return Err(HmpError::config(format!("label {y} is not 0 or 1")));
        }
        let t = Trace::record(net, x)?;
        let r = t.value() - f64::from(*y);
        loss += r * r;
        t.backward(net, 2.0 * r, &mut grads);
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((loss * inv, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{ConvBlock, ConvLayer};
    use crate::networks::ArchSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_probe_gradient_matches_hand_formula() {
        // One 1x1 layer, one channel, window 1x1: f = w_out * relu(w x + b).
        let arch = ArchSpec {
            variant: Variant::F4,
            image: (1, 1),
            channels: vec![1],
            filters: vec![1],
            depth: 1,
            pool: vec![1],
            window: (1, 1),
        };
        let layer = ConvLayer::new(1, 1, 1, vec![0.8], vec![0.1]).unwrap();
        let net = Network::new(arch, vec![ConvBlock::new(vec![layer]).unwrap()], vec![1.5]).unwrap();
        let x = ImageGrid::new(1, 1, vec![0.6]).unwrap();
        let (loss, g) = loss_and_gradients(&net, &[(&x, 1)]).unwrap();
        let h = 0.8 * 0.6 + 0.1;
        let f = 1.5 * h;
        assert!((loss - (f - 1.0f64).powi(2)).abs() < 1e-15);
        assert!((g.out[0] - 2.0 * (f - 1.0) * h).abs() < 1e-15);
        assert!((g.layers[0].0[0] - 2.0 * (f - 1.0) * 1.5 * 0.6).abs() < 1e-15);
        assert!((g.layers[0].1[0] - 2.0 * (f - 1.0) * 1.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let arch = ArchSpec {
            variant: Variant::F1,
            image: (3, 3),
            channels: vec![1],
            filters: vec![1],
            depth: 1,
            pool: vec![],
            window: (3, 3),
        };
        let layer = ConvLayer::new(1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        let net = Network::new(arch, vec![ConvBlock::new(vec![layer]).unwrap()], vec![1.0]).unwrap();
        let mut v = vec![0.2; 9];
        v[4] = 1.0;
        let x = ImageGrid::new(3, 3, v).unwrap();
        let (loss, g) = loss_and_gradients(&net, &[(&x, 1)]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = ArchSpec {
            variant: Variant::F4,
            image: (4, 4),
            channels: vec![2],
            filters: vec![2],
            depth: 1,
            pool: vec![1],
            window: (2, 2),
        };
        let net = Network::init(arch, &mut rng).unwrap();
        assert!(loss_and_gradients(&net, &[]).is_err());
        let x = ImageGrid::constant(4, 4, rng.random()).unwrap();
        assert!(loss_and_gradients(&net, &[(&x, 2)]).is_err());
    }
}
