//! Dense multilayer perceptron with explicit forward and backward passes.
//!
//! All parameters live in a single flat [`ParamVector`] whose block layout is
//! derived from an [`MlpSpec`]: for each layer, a row-major weight block of
//! shape `(out, in)` followed by a bias block of shape `(out, 1)`. Hidden
//! layers use ReLU (subgradient 0 at 0); the output head is either linear or
//! softmax. Everything is `f64` and every function here is pure: identical
//! inputs give bit-identical outputs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Output head of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Linear,
    Softmax,
}

/// Architecture of a fixed feed-forward network: input width, ReLU hidden
/// widths, and an output layer with its head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub head: Head,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize, head: Head) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::shape("input and output widths must be >= 1"));
        }
        if hidden.is_empty() {
            return Err(Error::shape("hidden layer list must be non-empty"));
        }
        if hidden.contains(&0) {
            return Err(Error::shape("hidden widths must be >= 1"));
        }
        Ok(MlpSpec {
            input_dim,
            hidden,
            output_dim,
            head,
        })
    }

    /// `(in, out)` dimensions of every layer, hidden layers first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &w in &self.hidden {
            dims.push((prev, w));
            prev = w;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    /// Block layout of the parameter vector: per layer a `(out, in)` weight
    /// block followed by an `(out, 1)` bias block.
    pub fn layout(&self) -> Vec<(usize, usize)> {
        let mut blocks = Vec::with_capacity(2 * (self.hidden.len() + 1));
        for (input, output) in self.layer_dims() {
            blocks.push((output, input));
            blocks.push((output, 1));
        }
        blocks
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(|(r, c)| r * c).sum()
    }

    /// All-zero parameters in this spec's layout.
    pub fn zero_params(&self) -> ParamVector {
        ParamVector {
            blocks: self.layout(),
            values: vec![0.0; self.param_count()],
        }
    }

    /// Fresh parameters: weights uniform in +-sqrt(6 / (fan_in + fan_out))
    /// per layer, biases zero.
    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for (input, output) in self.layer_dims() {
            let limit = (6.0 / (input + output) as f64).sqrt();
            for _ in 0..input * output {
                values.push(rng.gen_range(-limit..limit));
            }
            values.extend(std::iter::repeat_n(0.0, output));
        }
        ParamVector {
            blocks: self.layout(),
            values,
        }
    }
}

/// Flat parameter store for one network. The block layout records how the
/// values map onto per-layer weight and bias matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    blocks: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl ParamVector {
    /// Builds a parameter vector from raw values, validating length and
    /// finiteness against the layout.
    pub fn from_values(blocks: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        let expect: usize = blocks.iter().map(|(r, c)| r * c).sum();
        if values.len() != expect {
            return Err(Error::shape(format!(
                "parameter vector has {} values, layout requires {expect}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::contract("parameter values must be finite"));
        }
        Ok(ParamVector { blocks, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// FNV-1a over the value bit patterns. Used to tag trajectories with the
    /// exact parameters that produced them.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.values {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Gradient with the same block layout as the [`ParamVector`] it
/// differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    blocks: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(params: &ParamVector) -> Gradient {
        Gradient {
            blocks: params.blocks.clone(),
            values: vec![0.0; params.values.len()],
        }
    }

    pub fn from_values(blocks: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Gradient> {
        let expect: usize = blocks.iter().map(|(r, c)| r * c).sum();
        if values.len() != expect {
            return Err(Error::shape(format!(
                "gradient has {} values, layout requires {expect}",
                values.len()
            )));
        }
        Ok(Gradient { blocks, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Euclidean norm over all coordinates.
    pub fn global_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales in place so the global norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for v in &mut self.values {
                *v *= scale;
            }
        }
    }

    /// Adds `other / count` into this gradient. Used to average per-task
    /// gradients in a fixed order.
    pub fn accumulate_scaled(&mut self, other: &Gradient, scale: f64) -> Result<()> {
        if self.blocks != other.blocks {
            return Err(Error::shape("gradient layouts differ"));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * scale;
        }
        Ok(())
    }
}

fn check_layouts(params: &ParamVector, grad: &Gradient) -> Result<()> {
    if params.blocks != grad.blocks {
        return Err(Error::shape(format!(
            "parameter layout {:?} does not match gradient layout {:?}",
            params.blocks, grad.blocks
        )));
    }
    Ok(())
}

/// One gradient-descent step: `params - lr * grad`, elementwise.
pub fn sgd_step(params: &ParamVector, grad: &Gradient, lr: f64) -> Result<ParamVector> {
    check_layouts(params, grad)?;
    if lr < 0.0 {
        return Err(Error::contract("learning rate must be >= 0"));
    }
    let values: Vec<f64> = params
        .values
        .iter()
        .zip(&grad.values)
        .map(|(p, g)| p - lr * g)
        .collect();
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::contract(
            "parameter update produced a non-finite value",
        ));
    }
    Ok(ParamVector {
        blocks: params.blocks.clone(),
        values,
    })
}

/// Numerically stable softmax (max-subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_forward_args(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<()> {
    if input.len() != spec.input_dim {
        return Err(Error::shape(format!(
            "input has length {}, spec expects {}",
            input.len(),
            spec.input_dim
        )));
    }
    if params.blocks != spec.layout() {
        return Err(Error::shape(
            "parameter layout does not match network spec",
        ));
    }
    Ok(())
}

/// Runs the network, returning post-activation values of every layer:
/// `acts[0]` is the input, `acts[k]` the output of layer `k - 1`, and the
/// last entry the head output.
fn forward_trace(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Vec<Vec<f64>> {
    let dims = spec.layer_dims();
    let n_layers = dims.len();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
    acts.push(input.to_vec());
    let mut offset = 0;
    for (k, &(d_in, d_out)) in dims.iter().enumerate() {
        let w = &params.values[offset..offset + d_out * d_in];
        let b = &params.values[offset + d_out * d_in..offset + d_out * d_in + d_out];
        offset += d_out * d_in + d_out;
        let x = &acts[k];
        let mut z = vec![0.0; d_out];
        for o in 0..d_out {
            let row = &w[o * d_in..(o + 1) * d_in];
            let mut sum = b[o];
            for (wi, xi) in row.iter().zip(x.iter()) {
                sum += wi * xi;
            }
            z[o] = sum;
        }
        let is_output = k == n_layers - 1;
        let out = if is_output {
            match spec.head {
                Head::Linear => z,
                Head::Softmax => softmax(&z),
            }
        } else {
            z.into_iter().map(|v| v.max(0.0)).collect()
        };
        acts.push(out);
    }
    acts
}

/// Evaluates the network on one input.
pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    check_forward_args(spec, params, input)?;
    Ok(forward_trace(spec, params, input).pop().expect("non-empty trace"))
}

/// Accumulates the reverse-mode gradient of `<output, upstream>` with respect
/// to `params` into `grad_values` (same flat layout as `params`).
///
/// For a softmax head the upstream gradient is taken with respect to the
/// probabilities, so the softmax Jacobian is applied here.
pub(crate) fn accumulate_backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    upstream: &[f64],
    grad_values: &mut [f64],
) -> Result<()> {
    check_forward_args(spec, params, input)?;
    if upstream.len() != spec.output_dim {
        return Err(Error::shape(format!(
            "upstream gradient has length {}, spec expects {}",
            upstream.len(),
            spec.output_dim
        )));
    }
    if grad_values.len() != params.values.len() {
        return Err(Error::shape("gradient buffer length mismatch"));
    }

    let acts = forward_trace(spec, params, input);
    let dims = spec.layer_dims();
    let n_layers = dims.len();

    // Pre-activation gradient at the output layer.
    let mut dz: Vec<f64> = match spec.head {
        Head::Linear => upstream.to_vec(),
        Head::Softmax => {
            let p = &acts[n_layers];
            let dot: f64 = p.iter().zip(upstream).map(|(pi, ui)| pi * ui).sum();
            p.iter().zip(upstream).map(|(pi, ui)| pi * (ui - dot)).collect()
        }
    };

    // Offsets of each layer's weight block.
    let mut offsets = Vec::with_capacity(n_layers);
    let mut off = 0;
    for &(d_in, d_out) in &dims {
        offsets.push(off);
        off += d_out * d_in + d_out;
    }

    for k in (0..n_layers).rev() {
        let (d_in, d_out) = dims[k];
        let w_off = offsets[k];
        let b_off = w_off + d_out * d_in;
        let x = &acts[k];

        for o in 0..d_out {
            let g = dz[o];
            grad_values[b_off + o] += g;
            let row = w_off + o * d_in;
            for i in 0..d_in {
                grad_values[row + i] += g * x[i];
            }
        }

        if k > 0 {
            let w = &params.values[w_off..b_off];
            let mut dx = vec![0.0; d_in];
            for o in 0..d_out {
                let g = dz[o];
                let row = &w[o * d_in..(o + 1) * d_in];
                for i in 0..d_in {
                    dx[i] += row[i] * g;
                }
            }
            // ReLU mask from the post-activation values; subgradient at 0 is 0.
            dz = dx
                .into_iter()
                .zip(acts[k].iter())
                .map(|(d, &a)| if a > 0.0 { d } else { 0.0 })
                .collect();
        }
    }
    Ok(())
}

/// Exact reverse-mode gradient of the scalar `<output, upstream>` with
/// respect to `params`.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    upstream: &[f64],
) -> Result<Gradient> {
    let mut grad = Gradient::zeros_like(params);
    accumulate_backward(spec, params, input, upstream, &mut grad.values)?;
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn params_from(spec: &MlpSpec, values: Vec<f64>) -> ParamVector {
        ParamVector::from_values(spec.layout(), values).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::new(3, vec![1], 2, Head::Linear).unwrap();
        let out = forward(&spec, &spec.zero_params(), &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let spec = MlpSpec::new(2, vec![2], 2, Head::Softmax).unwrap();
        let out = forward(&spec, &spec.zero_params(), &[0.3, 0.7]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn hand_computed_2_2_1_network() {
        // W1 = [[1, -1], [0.5, 0.5]], b1 = [0.1, -0.2], W2 = [[2, -3]], b2 = [0.5]
        // x = (1, 2): z1 = (-0.9, 1.3) -> relu (0, 1.3) -> 2*0 - 3*1.3 + 0.5 = -3.4
        let spec = MlpSpec::new(2, vec![2], 1, Head::Linear).unwrap();
        let params = params_from(
            &spec,
            vec![1.0, -1.0, 0.5, 0.5, 0.1, -0.2, 2.0, -3.0, 0.5],
        );
        let out = forward(&spec, &params, &[1.0, 2.0]).unwrap();
        assert!((out[0] - (-3.4)).abs() < 1e-12, "got {}", out[0]);
    }

    #[test]
    fn forward_rejects_bad_input_length() {
        let spec = MlpSpec::new(3, vec![2], 1, Head::Linear).unwrap();
        let err = forward(&spec, &spec.zero_params(), &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn softmax_head_sums_to_one_and_is_shift_invariant() {
        let mut r = rng(7);
        let spec = MlpSpec::new(4, vec![8, 6], 5, Head::Softmax).unwrap();
        for _ in 0..50 {
            let params = spec.init_params(&mut r);
            let input: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
            let out = forward(&spec, &params, &input).unwrap();
            let sum: f64 = out.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(out.iter().all(|&p| p > 0.0 && p < 1.0));
        }
        // Shifting all logits by a constant leaves the softmax unchanged.
        for _ in 0..20 {
            let logits: Vec<f64> = (0..5).map(|_| r.gen_range(-3.0..3.0)).collect();
            let shifted: Vec<f64> = logits.iter().map(|z| z + 17.25).collect();
            let a = softmax(&logits);
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut r = rng(3);
        let spec = MlpSpec::new(3, vec![4], 2, Head::Linear).unwrap();
        let params = spec.init_params(&mut r);
        let grad = backward(&spec, &params, &[0.4, -1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!(grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_input() {
        // Single hidden unit passing x through (weight 1, relu active), linear
        // head w: output = w * x, so d(output)/dw = x.
        let spec = MlpSpec::new(1, vec![1], 1, Head::Linear).unwrap();
        let params = params_from(&spec, vec![1.0, 0.0, 3.0, 0.0]);
        let x = 2.5;
        let grad = backward(&spec, &params, &[x], &[1.0]).unwrap();
        // Layout: W1(1x1), b1(1), W2(1x1), b2(1). d/dW2 = hidden activation = x.
        assert!((grad.values()[2] - x).abs() < 1e-15);
        // d/dW1 = upstream through w2 = 3 * x' where x' = input.
        assert!((grad.values()[0] - 3.0 * x).abs() < 1e-15);
    }

    /// Central finite differences of `<output, upstream>` for every parameter.
    fn fd_gradient(spec: &MlpSpec, params: &ParamVector, input: &[f64], upstream: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        let mut g = vec![0.0; params.len()];
        for i in 0..params.len() {
            let mut plus = params.values.clone();
            plus[i] += h;
            let mut minus = params.values.clone();
            minus[i] -= h;
            let p_plus = params_from(spec, plus);
            let p_minus = params_from(spec, minus);
            let f = |p: &ParamVector| -> f64 {
                forward(spec, p, input)
                    .unwrap()
                    .iter()
                    .zip(upstream)
                    .map(|(o, u)| o * u)
                    .sum()
            };
            g[i] = (f(&p_plus) - f(&p_minus)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn backward_matches_finite_differences_on_random_networks() {
        let mut r = rng(42);
        for case in 0..100 {
            let head = if case % 2 == 0 { Head::Linear } else { Head::Softmax };
            let input_dim = r.gen_range(1..5);
            let hidden = vec![r.gen_range(1..6), r.gen_range(1..5)];
            let output_dim = r.gen_range(2..5);
            let spec = MlpSpec::new(input_dim, hidden, output_dim, head).unwrap();
            // Jitter every parameter (including the zero biases) so no ReLU
            // unit sits exactly on its kink, where central differences and
            // the subgradient convention legitimately disagree.
            let init = spec.init_params(&mut r);
            let jittered: Vec<f64> = init
                .values()
                .iter()
                .map(|v| v + r.gen_range(-0.1..0.1))
                .collect();
            let params = params_from(&spec, jittered);
            let input: Vec<f64> = (0..input_dim).map(|_| r.gen_range(-1.5..1.5)).collect();
            let upstream: Vec<f64> = (0..output_dim).map(|_| r.gen_range(-1.0..1.0)).collect();

            let analytic = backward(&spec, &params, &input, &upstream).unwrap();
            let numeric = fd_gradient(&spec, &params, &input, &upstream);
            for (idx, (&a, &n)) in analytic.values().iter().zip(&numeric).enumerate() {
                let err = (a - n).abs();
                let tol = 1e-7 + 1e-4 * a.abs().max(n.abs());
                assert!(
                    err <= tol,
                    "case {case} param {idx}: analytic={a} numeric={n} err={err}"
                );
            }
        }
    }

    #[test]
    fn forward_and_backward_are_pure() {
        let mut r = rng(9);
        let spec = MlpSpec::new(5, vec![8], 4, Head::Softmax).unwrap();
        let params = spec.init_params(&mut r);
        let input = [0.1, -0.4, 0.9, 2.0, -1.1];
        let upstream = [1.0, -0.5, 0.25, 0.0];
        let o1 = forward(&spec, &params, &input).unwrap();
        let o2 = forward(&spec, &params, &input).unwrap();
        assert_eq!(o1, o2);
        let g1 = backward(&spec, &params, &input, &upstream).unwrap();
        let g2 = backward(&spec, &params, &input, &upstream).unwrap();
        assert_eq!(g1.values(), g2.values());
    }

    #[test]
    fn sgd_step_examples() {
        let blocks = vec![(2, 1)];
        let params = ParamVector::from_values(blocks.clone(), vec![1.0, 2.0]).unwrap();
        let grad = Gradient {
            blocks,
            values: vec![1.0, 1.0],
        };
        let same = sgd_step(&params, &grad, 0.0).unwrap();
        assert_eq!(same.values(), params.values());
        let stepped = sgd_step(&params, &grad, 0.5).unwrap();
        assert_eq!(stepped.values(), &[0.5, 1.5]);
    }

    #[test]
    fn sgd_step_rejects_layout_mismatch() {
        let params = ParamVector::from_values(vec![(2, 1)], vec![1.0, 2.0]).unwrap();
        let grad = Gradient {
            blocks: vec![(1, 2)],
            values: vec![1.0, 1.0],
        };
        assert!(matches!(sgd_step(&params, &grad, 0.1), Err(Error::Shape(_))));
    }

    #[test]
    fn sgd_descends_a_convex_quadratic() {
        // f(p) = 0.5 * |p|^2 has gradient p; small steps must decrease f monotonically.
        let blocks = vec![(3, 1)];
        let mut p = ParamVector::from_values(blocks.clone(), vec![2.0, -1.5, 0.75]).unwrap();
        let loss = |p: &ParamVector| 0.5 * p.values().iter().map(|v| v * v).sum::<f64>();
        let mut prev = loss(&p);
        for _ in 0..50 {
            let grad = Gradient {
                blocks: blocks.clone(),
                values: p.values().to_vec(),
            };
            p = sgd_step(&p, &grad, 0.1).unwrap();
            let cur = loss(&p);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn init_params_respects_limits_and_zero_biases() {
        let mut r = rng(1);
        let spec = MlpSpec::new(4, vec![6], 3, Head::Linear).unwrap();
        let params = spec.init_params(&mut r);
        assert_eq!(params.len(), spec.param_count());
        let l1 = (6.0_f64 / 10.0).sqrt();
        let w1 = &params.values()[0..24];
        assert!(w1.iter().all(|w| w.abs() < l1));
        let b1 = &params.values()[24..30];
        assert!(b1.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn content_hash_distinguishes_parameter_changes() {
        let spec = MlpSpec::new(2, vec![2], 1, Head::Linear).unwrap();
        let a = spec.zero_params();
        let mut values = a.values().to_vec();
        values[0] = 1e-300;
        let b = ParamVector::from_values(a.layout().to_vec(), values).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), spec.zero_params().content_hash());
    }
}
