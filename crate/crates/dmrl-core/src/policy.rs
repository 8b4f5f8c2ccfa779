//! Categorical policy with REINFORCE gradients and first-order MAML updates.
//!
//! The gradient estimator is REINFORCE with discounted reward-to-go and a
//! batch-mean return baseline. Adaptation takes one policy-gradient step on a
//! task's own trajectories; the meta update averages query-set gradients
//! taken at the adapted parameters and applies them to the shared
//! parameters. Updates clip the gradient at a global norm of 10 to survive
//! rare large-return batches; the raw estimator itself is never clipped.
//!
//! On-policy discipline: `adapt` and `meta_step` verify that every supplied
//! trajectory carries the parameter hash of the policy they update. The
//! query gradient inside `meta_step` is evaluated at the per-task adapted
//! parameters on trajectories sampled from the shared parameters; that is
//! the first-order approximation, and the only place the hash check is
//! intentionally relaxed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, Obs, ACTION_COUNT, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{self, Gradient, Head, MlpSpec, ParamVector};
use crate::rollout::Controller;
use crate::trajectory::Trajectory;

pub const GRAD_CLIP_NORM: f64 = 10.0;

/// Softmax policy over discrete actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    spec: MlpSpec,
    params: ParamVector,
}

/// Per-trajectory discounted returns with batch statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnStats {
    pub returns: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl ReturnStats {
    pub fn from_trajectories(trajectories: &[Trajectory], gamma: f64) -> Result<ReturnStats> {
        if trajectories.is_empty() {
            return Err(Error::contract("return statistics need trajectories"));
        }
        let returns: Vec<f64> = trajectories
            .iter()
            .map(|t| t.discounted_return(gamma))
            .collect();
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / returns.len() as f64;
        Ok(ReturnStats {
            returns,
            mean,
            std: var.sqrt(),
        })
    }
}

impl Policy {
    /// Policy for the lander observation space: two ReLU hidden layers of 64,
    /// softmax over the four thruster actions.
    pub fn standard(rng: &mut ChaCha8Rng) -> Policy {
        let spec = MlpSpec::new(OBS_DIM, vec![64, 64], ACTION_COUNT, Head::Softmax)
            .expect("standard policy spec is valid");
        let params = spec.init_params(rng);
        Policy { spec, params }
    }

    /// Freshly initialized policy with a custom architecture. The head must
    /// be softmax and the output width may not exceed the action count.
    pub fn init(spec: MlpSpec, rng: &mut ChaCha8Rng) -> Result<Policy> {
        let params = spec.init_params(rng);
        Policy::from_parts(spec, params)
    }

    pub fn from_parts(spec: MlpSpec, params: ParamVector) -> Result<Policy> {
        if spec.head != Head::Softmax {
            return Err(Error::contract("policies require a softmax head"));
        }
        if spec.output_dim > ACTION_COUNT {
            return Err(Error::shape(format!(
                "policy output width {} exceeds the action count",
                spec.output_dim
            )));
        }
        if params.layout() != spec.layout() {
            return Err(Error::shape("parameter layout does not match policy spec"));
        }
        Ok(Policy { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_hash(&self) -> u64 {
        self.params.content_hash()
    }

    /// Probability vector over actions in state `obs`.
    pub fn action_distribution(&self, obs: &[f64]) -> Result<Vec<f64>> {
        nn::forward(&self.spec, &self.params, obs)
    }

    /// Samples an action from the policy's distribution.
    pub fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<Action> {
        let probs = self.action_distribution(obs)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (code, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Action::from_code(code);
            }
        }
        Action::from_code(probs.len() - 1)
    }

    /// One policy-gradient step on trajectories sampled from this policy.
    pub fn adapt(&self, trajectories: &[Trajectory], lr: f64, gamma: f64) -> Result<Policy> {
        let mut grad = policy_gradient(self, trajectories, gamma)?;
        grad.clip_global_norm(GRAD_CLIP_NORM);
        let params = nn::sgd_step(&self.params, &grad, lr)?;
        Ok(Policy {
            spec: self.spec.clone(),
            params,
        })
    }

    /// First-order MAML update. Every task supplies trajectories sampled
    /// from this policy, split into an adaptation set and a query set. Per
    /// task the policy is adapted on the first split; the query gradient is
    /// taken at the adapted parameters, averaged over tasks, and applied to
    /// the shared parameters with `meta_lr`.
    pub fn meta_step(
        &self,
        tasks: &[(&[Trajectory], &[Trajectory])],
        inner_lr: f64,
        meta_lr: f64,
        gamma: f64,
    ) -> Result<Policy> {
        if tasks.is_empty() {
            return Err(Error::contract("meta step needs at least one task"));
        }
        let my_hash = self.params_hash();
        for (train, test) in tasks {
            check_on_policy(train, my_hash)?;
            check_on_policy(test, my_hash)?;
        }
        let mut avg = Gradient::zeros_like(&self.params);
        let scale = 1.0 / tasks.len() as f64;
        for (train, test) in tasks {
            let adapted = self.adapt(train, inner_lr, gamma)?;
            let g = gradient_unchecked(&adapted, test, gamma)?;
            avg.accumulate_scaled(&g, scale)?;
        }
        avg.clip_global_norm(GRAD_CLIP_NORM);
        let params = nn::sgd_step(&self.params, &avg, meta_lr)?;
        Ok(Policy {
            spec: self.spec.clone(),
            params,
        })
    }
}

impl Controller for &Policy {
    fn act(&mut self, obs: &Obs, rng: &mut ChaCha8Rng) -> Action {
        self.sample_action(obs, rng).expect("policy matches observation space")
    }

    fn params_hash(&self) -> u64 {
        Policy::params_hash(self)
    }
}

fn check_on_policy(trajectories: &[Trajectory], expected_hash: u64) -> Result<()> {
    if trajectories.is_empty() {
        return Err(Error::contract("trajectory batch is empty"));
    }
    for t in trajectories {
        if t.policy_hash != expected_hash {
            return Err(Error::contract(
                "trajectory was not sampled from the parameters being updated",
            ));
        }
    }
    Ok(())
}

/// Negative mean discounted return over a batch of trajectories.
pub fn rl_loss(trajectories: &[Trajectory], gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::contract("gamma must lie in [0, 1]"));
    }
    let stats = ReturnStats::from_trajectories(trajectories, gamma)?;
    Ok(-stats.mean)
}

/// REINFORCE estimator of the loss gradient:
/// `-(1/N) sum_traj sum_t grad log pi(a_t | s_t) * (G_t - b)`,
/// with `G_t` the discounted reward-to-go and `b` the batch-mean return.
///
/// Checks that the batch was sampled from `policy`.
pub fn policy_gradient(
    policy: &Policy,
    trajectories: &[Trajectory],
    gamma: f64,
) -> Result<Gradient> {
    check_on_policy(trajectories, policy.params_hash())?;
    gradient_unchecked(policy, trajectories, gamma)
}

fn gradient_unchecked(
    policy: &Policy,
    trajectories: &[Trajectory],
    gamma: f64,
) -> Result<Gradient> {
    if trajectories.is_empty() {
        return Err(Error::contract("policy gradient needs trajectories"));
    }
    let stats = ReturnStats::from_trajectories(trajectories, gamma)?;
    let baseline = stats.mean;
    let n = trajectories.len() as f64;

    let mut grad = Gradient::zeros_like(&policy.params);
    let mut upstream = vec![0.0; policy.spec.output_dim];
    for traj in trajectories {
        let togo = traj.rewards_to_go(gamma);
        for (step, g_t) in traj.steps.iter().zip(togo) {
            let advantage = g_t - baseline;
            if advantage == 0.0 {
                continue;
            }
            let probs = policy.action_distribution(&step.obs)?;
            let a = step.action.code();
            if a >= probs.len() {
                return Err(Error::shape("action code outside the policy's output"));
            }
            // d/dtheta of -(adv/N) * log pi(a|s), expressed through the
            // softmax output: upstream e_a / p_a composed with the softmax
            // Jacobian gives exactly e_a - p.
            upstream.iter_mut().for_each(|u| *u = 0.0);
            upstream[a] = -(advantage / n) / probs[a];
            nn::accumulate_backward(
                &policy.spec,
                &policy.params,
                &step.obs,
                &upstream,
                grad.values_mut(),
            )?;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::TerminalKind;
    use crate::trajectory::{Provenance, Step};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn small_policy(seed: u64) -> Policy {
        let spec = MlpSpec::new(OBS_DIM, vec![8], ACTION_COUNT, Head::Softmax).unwrap();
        Policy::init(spec, &mut rng(seed)).unwrap()
    }

    fn traj_for(policy: &Policy, obs_actions: &[(Obs, Action)], rewards: &[f64]) -> Trajectory {
        Trajectory {
            task_id: 0,
            steps: obs_actions
                .iter()
                .zip(rewards)
                .map(|(&(obs, action), &reward)| Step { obs, action, reward })
                .collect(),
            final_obs: [0.0; OBS_DIM],
            terminal: TerminalKind::Timeout,
            provenance: Provenance::Env,
            policy_hash: policy.params_hash(),
        }
    }

    #[test]
    fn zero_parameters_give_the_uniform_distribution() {
        let spec = MlpSpec::new(OBS_DIM, vec![8], ACTION_COUNT, Head::Softmax).unwrap();
        let policy = Policy::from_parts(spec.clone(), spec.zero_params()).unwrap();
        let probs = policy.action_distribution(&[0.3, 4.0, -1.0, 0.2, 1.0]).unwrap();
        assert_eq!(probs, vec![0.25; 4]);
    }

    #[test]
    fn distribution_sums_to_one_and_repeats_exactly() {
        let policy = small_policy(5);
        let obs = [0.1, 7.0, -0.3, -1.2, 0.8];
        let a = policy.action_distribution(&obs).unwrap();
        let b = policy.action_distribution(&obs).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn shifting_final_layer_biases_leaves_the_distribution_unchanged() {
        let policy = small_policy(11);
        let obs = [0.4, 2.0, 0.1, -0.8, 1.0];
        let before = policy.action_distribution(&obs).unwrap();

        let mut values = policy.params().values().to_vec();
        let n = values.len();
        // Final bias block is the last `output_dim` coordinates.
        for v in &mut values[n - ACTION_COUNT..] {
            *v += 3.75;
        }
        let shifted = Policy::from_parts(
            policy.spec().clone(),
            ParamVector::from_values(policy.params().layout().to_vec(), values).unwrap(),
        )
        .unwrap();
        let after = shifted.action_distribution(&obs).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() < 1e-12);
        }
        let argmax_before = before
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let argmax_after = after
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax_before, argmax_after);
    }

    #[test]
    fn rl_loss_examples() {
        let policy = small_policy(1);
        let obs = [0.0; OBS_DIM];
        let t = traj_for(&policy, &[(obs, Action::Noop); 3], &[1.0, 1.0, 1.0]);
        assert_eq!(rl_loss(std::slice::from_ref(&t), 0.5).unwrap(), -1.75);
        assert_eq!(rl_loss(std::slice::from_ref(&t), 0.0).unwrap(), -1.0);
        let zero = traj_for(&policy, &[(obs, Action::Noop); 2], &[0.0, 0.0]);
        assert_eq!(rl_loss(&[zero], 0.9).unwrap(), 0.0);
        assert!(rl_loss(&[], 0.9).is_err());
        assert!(rl_loss(&[t], 1.5).is_err());
    }

    #[test]
    fn rl_loss_is_negative_mean_of_return_stats() {
        let policy = small_policy(2);
        let obs = [0.2, 1.0, 0.0, -0.5, 1.0];
        let a = traj_for(&policy, &[(obs, Action::ThrustMain); 2], &[2.0, -1.0]);
        let b = traj_for(&policy, &[(obs, Action::Noop); 3], &[0.5, 0.5, 0.5]);
        let batch = vec![a, b];
        let stats = ReturnStats::from_trajectories(&batch, 0.99).unwrap();
        assert_eq!(rl_loss(&batch, 0.99).unwrap(), -stats.mean);
        assert!(stats.std >= 0.0);
    }

    #[test]
    fn equal_advantages_give_the_zero_gradient() {
        let policy = small_policy(3);
        let obs = [0.1, 3.0, 0.0, 0.0, 1.0];
        // Two identical one-step trajectories: every G_t equals the baseline.
        let t = traj_for(&policy, &[(obs, Action::ThrustLeft)], &[2.5]);
        let grad = policy_gradient(&policy, &[t.clone(), t], 0.99).unwrap();
        assert!(grad.values().iter().all(|&g| g.abs() < 1e-12));
    }

    #[test]
    fn gradient_rejects_off_policy_batches() {
        let policy = small_policy(4);
        let other = small_policy(5);
        let obs = [0.0; OBS_DIM];
        let t = traj_for(&other, &[(obs, Action::Noop)], &[1.0]);
        assert!(matches!(
            policy_gradient(&policy, &[t], 0.99),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn one_state_bandit_gradient_matches_the_hand_computed_softmax_gradient() {
        // Hidden layer forced inactive (zero parameters), so logits are the
        // output biases and only they receive gradient:
        // d/db of -log pi(a) * adv = adv * (p - e_a).
        let spec = MlpSpec::new(OBS_DIM, vec![4], ACTION_COUNT, Head::Softmax).unwrap();
        let policy = Policy::from_parts(spec.clone(), spec.zero_params()).unwrap();
        let obs = [0.0; OBS_DIM];
        let hi = traj_for(&policy, &[(obs, Action::ThrustMain)], &[2.0]);
        let lo = traj_for(&policy, &[(obs, Action::Noop)], &[0.0]);
        let grad = policy_gradient(&policy, &[hi, lo], 0.99).unwrap();

        // Baseline 1.0; advantages +1 (ThrustMain) and -1 (Noop); N = 2.
        // Hand gradient on biases: 0.5 * [(p - e_2) - (p - e_0)] = 0.5 * (e_0 - e_2).
        let n = grad.len();
        let bias_grad = &grad.values()[n - ACTION_COUNT..];
        let expected = [0.5, 0.0, -0.5, 0.0];
        for (g, e) in bias_grad.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "bias grad {bias_grad:?}");
        }
        // Everything upstream of the dead hidden layer stays zero.
        assert!(grad.values()[..n - ACTION_COUNT].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences_of_the_surrogate() {
        // Surrogate with frozen advantages:
        // L = -(1/N) sum_t log pi(a_t|s_t) * (G_t - b).
        let policy = small_policy(21);
        let mut r = rng(77);
        let gamma = 0.95;
        let mut trajectories = Vec::new();
        for _ in 0..3 {
            let steps: Vec<(Obs, Action)> = (0..4)
                .map(|_| {
                    let obs = [
                        r.gen_range(-1.0..1.0),
                        r.gen_range(0.0..10.0),
                        r.gen_range(-2.0..2.0),
                        r.gen_range(-2.0..2.0),
                        r.gen_range(0.0..1.0),
                    ];
                    (obs, Action::from_code(r.gen_range(0..ACTION_COUNT)).unwrap())
                })
                .collect();
            let rewards: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
            trajectories.push(traj_for(&policy, &steps, &rewards));
        }

        let stats = ReturnStats::from_trajectories(&trajectories, gamma).unwrap();
        let baseline = stats.mean;
        let n = trajectories.len() as f64;
        let surrogate = |params: &ParamVector| -> f64 {
            let p = Policy::from_parts(policy.spec().clone(), params.clone()).unwrap();
            let mut total = 0.0;
            for traj in &trajectories {
                for (step, g_t) in traj.steps.iter().zip(traj.rewards_to_go(gamma)) {
                    let probs = p.action_distribution(&step.obs).unwrap();
                    total += -(g_t - baseline) / n * probs[step.action.code()].ln();
                }
            }
            total
        };

        let analytic = policy_gradient(&policy, &trajectories, gamma).unwrap();
        let h = 1e-5;
        for i in (0..policy.params().len()).step_by(7) {
            let mut plus = policy.params().values().to_vec();
            plus[i] += h;
            let mut minus = policy.params().values().to_vec();
            minus[i] -= h;
            let layout = policy.params().layout().to_vec();
            let fp = surrogate(&ParamVector::from_values(layout.clone(), plus).unwrap());
            let fm = surrogate(&ParamVector::from_values(layout, minus).unwrap());
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.values()[i];
            let err = (a - numeric).abs();
            assert!(
                err <= 1e-7 + 1e-4 * a.abs().max(numeric.abs()),
                "param {i}: analytic {a} numeric {numeric}"
            );
        }
    }

    #[test]
    fn adapt_with_zero_rate_is_the_identity() {
        let policy = small_policy(6);
        let obs = [0.5, 2.0, 0.0, 0.0, 1.0];
        let a = traj_for(&policy, &[(obs, Action::ThrustMain)], &[1.0]);
        let b = traj_for(&policy, &[(obs, Action::Noop)], &[0.0]);
        let adapted = policy.adapt(&[a, b], 0.0, 0.99).unwrap();
        assert_eq!(adapted.params().values(), policy.params().values());
    }

    #[test]
    fn adapt_is_deterministic_and_leaves_the_input_unmodified() {
        let policy = small_policy(7);
        let before = policy.params().values().to_vec();
        let obs = [0.5, 2.0, 0.0, 0.0, 1.0];
        let batch = vec![
            traj_for(&policy, &[(obs, Action::ThrustMain)], &[1.0]),
            traj_for(&policy, &[(obs, Action::Noop)], &[-1.0]),
        ];
        let a = policy.adapt(&batch, 1e-2, 0.99).unwrap();
        let b = policy.adapt(&batch, 1e-2, 0.99).unwrap();
        assert_eq!(a.params().values(), b.params().values());
        assert_eq!(policy.params().values(), before.as_slice());
        assert_ne!(a.params().values(), before.as_slice());
    }

    #[test]
    fn adapt_moves_probability_toward_the_rewarded_arm() {
        // One-state bandit favoring ThrustMain.
        let policy = small_policy(8);
        let obs = [1.0, 0.0, 0.0, 0.0, 0.0];
        let mut r = rng(40);
        let mut batch = Vec::new();
        for _ in 0..12 {
            let action = policy.sample_action(&obs, &mut r).unwrap();
            let reward = if action == Action::ThrustMain { 1.0 } else { 0.0 };
            batch.push(traj_for(&policy, &[(obs, action)], &[reward]));
        }
        // Keep only batches that actually mix outcomes.
        if batch.iter().any(|t| t.steps[0].reward > 0.0)
            && batch.iter().any(|t| t.steps[0].reward == 0.0)
        {
            let before = policy.action_distribution(&obs).unwrap()[Action::ThrustMain.code()];
            let adapted = policy.adapt(&batch, 1e-2, 0.99).unwrap();
            let after = adapted.action_distribution(&obs).unwrap()[Action::ThrustMain.code()];
            assert!(after > before, "before {before} after {after}");
        } else {
            panic!("seed produced a degenerate bandit batch");
        }
    }

    #[test]
    fn meta_step_with_zero_meta_rate_is_the_identity() {
        let policy = small_policy(9);
        let obs = [0.0, 1.0, 0.0, 0.0, 1.0];
        let tr = vec![
            traj_for(&policy, &[(obs, Action::ThrustMain)], &[1.0]),
            traj_for(&policy, &[(obs, Action::Noop)], &[0.0]),
        ];
        let ts = tr.clone();
        let next = policy
            .meta_step(&[(tr.as_slice(), ts.as_slice())], 1e-2, 0.0, 0.99)
            .unwrap();
        assert_eq!(next.params().values(), policy.params().values());
    }

    #[test]
    fn degenerate_meta_step_reduces_to_one_policy_gradient_step() {
        let policy = small_policy(10);
        let obs = [0.3, 1.0, -0.1, 0.0, 1.0];
        let batch = vec![
            traj_for(&policy, &[(obs, Action::ThrustRight)], &[1.0]),
            traj_for(&policy, &[(obs, Action::Noop)], &[-0.5]),
        ];
        let via_meta = policy
            .meta_step(&[(batch.as_slice(), batch.as_slice())], 0.0, 1e-2, 0.99)
            .unwrap();
        let via_adapt = policy.adapt(&batch, 1e-2, 0.99).unwrap();
        assert_eq!(via_meta.params().values(), via_adapt.params().values());
    }

    #[test]
    fn meta_step_rejects_empty_task_lists() {
        let policy = small_policy(12);
        assert!(matches!(
            policy.meta_step(&[], 1e-2, 1e-2, 0.99),
            Err(Error::Contract(_))
        ));
    }
}
