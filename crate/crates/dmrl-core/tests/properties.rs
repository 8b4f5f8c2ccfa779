//! Property tests for the crate-wide invariants.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dmrl_core::env::{self, Action, LanderState, TaskSpec};
use dmrl_core::nn::{self, Gradient, ParamVector};
use dmrl_core::policy::Policy;
use dmrl_core::trajectory::{Provenance, Step, Trajectory};

proptest! {
    // Logit spreads beyond ~36 round the dominant probability to exactly
    // 1.0 in f64, so the strict open-interval claim is tested on the range
    // the networks actually produce.
    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        logits in prop::collection::vec(-15.0..15.0f64, 2..6),
        shift in -50.0..50.0f64,
    ) {
        let p = nn::softmax(&logits);
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        let q = nn::softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sgd_step_is_exactly_elementwise(
        values in prop::collection::vec(-10.0..10.0f64, 6),
        grads in prop::collection::vec(-10.0..10.0f64, 6),
        lr in 0.0..2.0f64,
    ) {
        let layout = vec![(2usize, 3usize)];
        let params = ParamVector::from_values(layout.clone(), values.clone()).unwrap();
        let grad = Gradient::from_values(layout, grads.clone()).unwrap();
        let stepped = nn::sgd_step(&params, &grad, lr).unwrap();
        for ((s, p), g) in stepped.values().iter().zip(&values).zip(&grads) {
            prop_assert_eq!(*s, p - lr * g);
        }
    }

    #[test]
    fn environment_step_is_a_pure_function(
        x in -5.0f64..5.0,
        y in 0.5f64..12.0,
        vx in -3.0f64..3.0,
        vy in -3.0f64..3.0,
        fuel in 0.0f64..100.0,
        wx in -2.0f64..2.0,
        wy in -2.0f64..2.0,
        code in 0usize..4,
        t in 0usize..100,
    ) {
        let task = TaskSpec::Constant { wx, wy };
        let state = LanderState { x, y, vx, vy, fuel: fuel.floor(), t };
        let action = Action::from_code(code).unwrap();
        let a = env::step(&task, &state, action, 150);
        let b = env::step(&task, &state, action, 150);
        match (a, b) {
            (Ok(oa), Ok(ob)) => {
                prop_assert_eq!(oa.clone(), ob);
                prop_assert!(oa.reward.is_finite());
                prop_assert_eq!(oa.terminal, oa.terminal_kind != env::TerminalKind::None);
                prop_assert!(oa.next_state.fuel >= 0.0);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "purity violated in the error path"),
        }
    }

    #[test]
    fn reward_to_go_head_equals_the_discounted_return(
        rewards in prop::collection::vec(-5.0..5.0f64, 1..40),
        gamma in 0.0..1.0f64,
    ) {
        let traj = Trajectory {
            task_id: 0,
            steps: rewards
                .iter()
                .map(|&r| Step { obs: [0.0; 5], action: Action::Noop, reward: r })
                .collect(),
            final_obs: [0.0; 5],
            terminal: env::TerminalKind::Timeout,
            provenance: Provenance::Env,
            policy_hash: 0,
        };
        let direct = traj.discounted_return(gamma);
        let togo = traj.rewards_to_go(gamma);
        prop_assert!((togo[0] - direct).abs() < 1e-9);
    }

    #[test]
    fn action_distributions_are_probability_vectors(
        seed in 0u64..500,
        obs0 in -2.0f64..2.0,
        obs1 in 0.0f64..12.0,
    ) {
        let policy = Policy::standard(&mut ChaCha8Rng::seed_from_u64(seed));
        let obs = [obs0, obs1, 0.1, -0.4, 0.7];
        let p = policy.action_distribution(&obs).unwrap();
        prop_assert_eq!(p.len(), 4);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0));
    }
}
