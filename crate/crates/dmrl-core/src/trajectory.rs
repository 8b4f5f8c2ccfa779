//! Trajectories: the unit of every data set in this crate.

use crate::env::{Action, Obs, TerminalKind};

/// Where a trajectory came from. Env trajectories were rolled in the true
/// simulator; sim trajectories were generated by a learned dynamics model.
/// All data-efficiency accounting rests on this tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Env,
    Sim,
}

/// One `(s, a, r)` triple along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub obs: Obs,
    pub action: Action,
    pub reward: f64,
}

/// A transition `(s, a, s')` extracted for dynamics-model fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: Obs,
    pub action: Action,
    pub next_obs: Obs,
}

/// A rollout: `(s, a, r)` triples plus the final observation. Provenance and
/// the hash of the sampling policy's parameters are set once at creation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task_id: u64,
    pub steps: Vec<Step>,
    pub final_obs: Obs,
    pub terminal: TerminalKind,
    pub provenance: Provenance,
    pub policy_hash: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Discounted return sum_t gamma^t r_t.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut total = 0.0;
        let mut disc = 1.0;
        for step in &self.steps {
            total += disc * step.reward;
            disc *= gamma;
        }
        total
    }

    /// Discounted reward-to-go from every step: `g[t] = sum_{u>=t} gamma^(u-t) r_u`.
    pub fn rewards_to_go(&self, gamma: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (slot, step) in g.iter_mut().zip(self.steps.iter()).rev() {
            acc = step.reward + gamma * acc;
            *slot = acc;
        }
        g
    }

    /// The `(s, a, s')` transitions along this trajectory.
    pub fn transitions(&self) -> Vec<Transition> {
        let mut out = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            let next_obs = if i + 1 < self.steps.len() {
                self.steps[i + 1].obs
            } else {
                self.final_obs
            };
            out.push(Transition {
                obs: step.obs,
                action: step.action,
                next_obs,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(rewards: &[f64]) -> Trajectory {
        Trajectory {
            task_id: 0,
            steps: rewards
                .iter()
                .map(|&r| Step {
                    obs: [0.0; 5],
                    action: Action::Noop,
                    reward: r,
                })
                .collect(),
            final_obs: [0.0; 5],
            terminal: TerminalKind::Timeout,
            provenance: Provenance::Env,
            policy_hash: 0,
        }
    }

    #[test]
    fn discounted_return_is_the_geometric_sum() {
        let t = traj(&[1.0, 1.0, 1.0]);
        assert_eq!(t.discounted_return(0.5), 1.75);
        assert_eq!(t.discounted_return(0.0), 1.0);
        assert_eq!(traj(&[0.0, 0.0]).discounted_return(0.9), 0.0);
    }

    #[test]
    fn rewards_to_go_match_direct_sums() {
        let t = traj(&[1.0, 2.0, 4.0]);
        let g = t.rewards_to_go(0.5);
        assert_eq!(g, vec![1.0 + 1.0 + 1.0, 2.0 + 2.0, 4.0]);
        assert_eq!(g[0], t.discounted_return(0.5));
    }

    #[test]
    fn transitions_chain_through_the_final_observation() {
        let mut t = traj(&[0.0, 0.0]);
        t.steps[0].obs = [1.0, 0.0, 0.0, 0.0, 0.0];
        t.steps[1].obs = [2.0, 0.0, 0.0, 0.0, 0.0];
        t.final_obs = [3.0, 0.0, 0.0, 0.0, 0.0];
        let trs = t.transitions();
        assert_eq!(trs.len(), 2);
        assert_eq!(trs[0].obs[0], 1.0);
        assert_eq!(trs[0].next_obs[0], 2.0);
        assert_eq!(trs[1].next_obs[0], 3.0);
    }
}
