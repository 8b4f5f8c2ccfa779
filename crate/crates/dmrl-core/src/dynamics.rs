//! Learned transition function: residual next-state prediction, mean squared
//! error loss, task adaptation by gradient steps, and the first-order meta
//! update.
//!
//! The network maps the standardized concatenation of an observation and a
//! one-hot action to a state delta, so a zero-parameter model predicts
//! `s' = s`. Input statistics come from the data buffer and are frozen when
//! training moves off real data; they travel with the model.

use rand_chacha::ChaCha8Rng;

use crate::env::{Action, Obs, ACTION_COUNT, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{self, Gradient, Head, MlpSpec, ParamVector};
use crate::rollout::TransitionModel;
use crate::trajectory::Transition;

pub const MODEL_INPUT_DIM: usize = OBS_DIM + ACTION_COUNT;

/// Batch of `(s, a, s')` transitions.
pub type TransitionBatch = Vec<Transition>;

/// Per-dimension input standardization. `std` entries are floored away from
/// zero so constant dimensions pass through unscaled noise-free.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-6;

impl Normalizer {
    pub fn identity() -> Normalizer {
        Normalizer {
            mean: vec![0.0; MODEL_INPUT_DIM],
            std: vec![1.0; MODEL_INPUT_DIM],
        }
    }

    /// Two-pass mean/std over the model inputs of a transition set.
    pub fn from_transitions(transitions: &[Transition]) -> Normalizer {
        if transitions.is_empty() {
            return Normalizer::identity();
        }
        let count = transitions.len() as f64;
        let mut mean = vec![0.0; MODEL_INPUT_DIM];
        for tr in transitions {
            let x = model_input(&tr.obs, tr.action);
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        let mut var = vec![0.0; MODEL_INPUT_DIM];
        for tr in transitions {
            let x = model_input(&tr.obs, tr.action);
            for (s, (v, m)) in var.iter_mut().zip(x.iter().zip(&mean)) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / count).sqrt().max(STD_FLOOR))
            .collect();
        Normalizer { mean, std }
    }

    fn apply(&self, raw: &[f64; MODEL_INPUT_DIM]) -> [f64; MODEL_INPUT_DIM] {
        let mut out = [0.0; MODEL_INPUT_DIM];
        for i in 0..MODEL_INPUT_DIM {
            out[i] = (raw[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

fn model_input(obs: &Obs, action: Action) -> [f64; MODEL_INPUT_DIM] {
    let mut x = [0.0; MODEL_INPUT_DIM];
    x[..OBS_DIM].copy_from_slice(obs);
    x[OBS_DIM + action.code()] = 1.0;
    x
}

/// Residual dynamics model: `predict(s, a) = s + mlp(normalize(s ++ onehot(a)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    spec: MlpSpec,
    params: ParamVector,
    norm: Normalizer,
}

impl DynamicsModel {
    /// Model for the lander: ReLU hidden layers of 64 and 32, linear head.
    pub fn standard(rng: &mut ChaCha8Rng) -> DynamicsModel {
        Self::with_hidden(vec![64, 32], rng)
    }

    /// Same input/output contract with custom hidden widths; used by tests
    /// that need small networks.
    pub fn with_hidden(hidden: Vec<usize>, rng: &mut ChaCha8Rng) -> DynamicsModel {
        let spec = MlpSpec::new(MODEL_INPUT_DIM, hidden, OBS_DIM, Head::Linear)
            .expect("dynamics spec is valid");
        let params = spec.init_params(rng);
        DynamicsModel {
            spec,
            params,
            norm: Normalizer::identity(),
        }
    }

    /// All-zero parameters: the identity transition model.
    pub fn zeroed(hidden: Vec<usize>) -> DynamicsModel {
        let spec = MlpSpec::new(MODEL_INPUT_DIM, hidden, OBS_DIM, Head::Linear)
            .expect("dynamics spec is valid");
        let params = spec.zero_params();
        DynamicsModel {
            spec,
            params,
            norm: Normalizer::identity(),
        }
    }

    pub fn from_parts(spec: MlpSpec, params: ParamVector, norm: Normalizer) -> Result<DynamicsModel> {
        if spec.head != Head::Linear {
            return Err(Error::contract("dynamics models use a linear head"));
        }
        if spec.input_dim != MODEL_INPUT_DIM || spec.output_dim != OBS_DIM {
            return Err(Error::shape(format!(
                "dynamics model must map {MODEL_INPUT_DIM} -> {OBS_DIM}, got {} -> {}",
                spec.input_dim, spec.output_dim
            )));
        }
        if params.layout() != spec.layout() {
            return Err(Error::shape("parameter layout does not match model spec"));
        }
        if norm.mean.len() != MODEL_INPUT_DIM || norm.std.len() != MODEL_INPUT_DIM {
            return Err(Error::shape("normalizer length does not match model input"));
        }
        Ok(DynamicsModel { spec, params, norm })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    pub fn set_normalizer(&mut self, norm: Normalizer) {
        self.norm = norm;
    }

    fn with_params(&self, params: ParamVector) -> DynamicsModel {
        DynamicsModel {
            spec: self.spec.clone(),
            params,
            norm: self.norm.clone(),
        }
    }

    /// Predicted next observation.
    pub fn predict_next(&self, obs: &Obs, action: Action) -> Obs {
        let x = self.norm.apply(&model_input(obs, action));
        let delta = nn::forward(&self.spec, &self.params, &x)
            .expect("model input matches its spec by construction");
        let mut next = *obs;
        for (n, d) in next.iter_mut().zip(delta) {
            *n += d;
        }
        next
    }
}

impl TransitionModel for &DynamicsModel {
    fn predict(&mut self, obs: &Obs, action: Action) -> Obs {
        self.predict_next(obs, action)
    }
}

/// Mean squared prediction error over a batch:
/// `(1/|D|) sum ||s' - predict(s, a)||^2`.
pub fn model_loss(model: &DynamicsModel, batch: &[Transition]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("model loss needs a non-empty batch"));
    }
    let mut total = 0.0;
    for tr in batch {
        let pred = model.predict_next(&tr.obs, tr.action);
        total += pred
            .iter()
            .zip(&tr.next_obs)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of [`model_loss`] with respect to the model parameters.
pub fn model_loss_gradient(model: &DynamicsModel, batch: &[Transition]) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::contract("model loss gradient needs a non-empty batch"));
    }
    let mut grad = Gradient::zeros_like(&model.params);
    let scale = 2.0 / batch.len() as f64;
    for tr in batch {
        let x = model.norm.apply(&model_input(&tr.obs, tr.action));
        let delta = nn::forward(&model.spec, &model.params, &x)?;
        // d/d(delta) of ||s + delta - s'||^2 = 2 (s + delta - s').
        let upstream: Vec<f64> = delta
            .iter()
            .zip(tr.obs.iter().zip(&tr.next_obs))
            .map(|(d, (s, sn))| scale * (s + d - sn))
            .collect();
        nn::accumulate_backward(&model.spec, &model.params, &x, &upstream, grad.values_mut())?;
    }
    Ok(grad)
}

/// Full-batch gradient descent on the support set. Returns a new model; the
/// input is untouched.
pub fn adapt(
    model: &DynamicsModel,
    support: &[Transition],
    lr: f64,
    steps: usize,
) -> Result<DynamicsModel> {
    if steps == 0 {
        return Err(Error::contract("adaptation requires at least one step"));
    }
    let mut params = model.params.clone();
    for _ in 0..steps {
        let current = model.with_params(params);
        let grad = model_loss_gradient(&current, support)?;
        params = nn::sgd_step(&current.params, &grad, lr)?;
    }
    Ok(model.with_params(params))
}

/// Gradient steps until the support loss drops below `tol` or `max_steps` is
/// reached, whichever happens first. Returns the adapted model and the
/// number of steps taken.
pub fn adapt_until(
    model: &DynamicsModel,
    support: &[Transition],
    lr: f64,
    max_steps: usize,
    tol: f64,
) -> Result<(DynamicsModel, usize)> {
    let mut current = model.clone();
    for taken in 0..max_steps {
        if model_loss(&current, support)? < tol {
            return Ok((current, taken));
        }
        current = adapt(&current, support, lr, 1)?;
    }
    Ok((current, max_steps))
}

/// First-order meta update over a batch of tasks. Per task: one adaptation
/// step on the support set, then the query-set gradient at the adapted
/// parameters. The averaged gradient is applied to the original parameters
/// with `meta_lr`. Returns the updated model and the mean post-adaptation
/// query loss, which doubles as the convergence signal for phase switching.
pub fn meta_step(
    model: &DynamicsModel,
    tasks: &[(TransitionBatch, TransitionBatch)],
    inner_lr: f64,
    meta_lr: f64,
) -> Result<(DynamicsModel, f64)> {
    if tasks.is_empty() {
        return Err(Error::contract("meta step needs at least one task"));
    }
    let mut avg = Gradient::zeros_like(&model.params);
    let scale = 1.0 / tasks.len() as f64;
    let mut query_loss = 0.0;
    for (support, query) in tasks {
        let adapted = adapt(model, support, inner_lr, 1)?;
        query_loss += model_loss(&adapted, query)? * scale;
        let g = model_loss_gradient(&adapted, query)?;
        avg.accumulate_scaled(&g, scale)?;
    }
    let params = nn::sgd_step(&model.params, &avg, meta_lr)?;
    Ok((model.with_params(params), query_loss))
}
