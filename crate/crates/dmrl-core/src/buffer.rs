//! The buffer of real-environment trajectories collected during joint
//! training, and the train/test split rule.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::TaskSpec;
use crate::error::{Error, Result};
use crate::trajectory::{Provenance, Trajectory};

/// Fraction of a task's trajectories that form the adaptation split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    pub train_fraction: f64,
}

impl SplitRule {
    pub fn new(train_fraction: f64) -> Result<SplitRule> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::contract("train fraction must lie in (0, 1)"));
        }
        Ok(SplitRule { train_fraction })
    }

    /// Splits a batch by position. Both halves are non-empty for batches of
    /// two or more; smaller batches cannot be split.
    pub fn split<'a>(&self, batch: &'a [Trajectory]) -> Result<(&'a [Trajectory], &'a [Trajectory])> {
        if batch.len() < 2 {
            return Err(Error::contract("cannot split fewer than two trajectories"));
        }
        let k = ((batch.len() as f64 * self.train_fraction).round() as usize)
            .clamp(1, batch.len() - 1);
        Ok(batch.split_at(k))
    }
}

/// All trajectories collected for one task.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub task_id: u64,
    pub task: TaskSpec,
    pub trajectories: Vec<Trajectory>,
}

/// Per-task store of environment trajectories. Only env-provenance data may
/// enter; once sealed (at the switch to simulated training) it is read-only.
#[derive(Debug, Clone, Default)]
pub struct DataBuffer {
    tasks: Vec<TaskData>,
    total: usize,
    sealed: bool,
}

impl DataBuffer {
    pub fn new() -> DataBuffer {
        DataBuffer::default()
    }

    pub fn append(&mut self, task_id: u64, task: &TaskSpec, trajectories: Vec<Trajectory>) -> Result<()> {
        if self.sealed {
            return Err(Error::contract("buffer is sealed; no data may be added"));
        }
        if trajectories
            .iter()
            .any(|t| t.provenance != Provenance::Env || t.task_id != task_id)
        {
            return Err(Error::contract(
                "buffer accepts only env-provenance trajectories of the stated task",
            ));
        }
        self.total += trajectories.len();
        match self.tasks.iter_mut().find(|d| d.task_id == task_id) {
            Some(data) => data.trajectories.extend(trajectories),
            None => self.tasks.push(TaskData {
                task_id,
                task: *task,
                trajectories,
            }),
        }
        Ok(())
    }

    /// Marks the end of data collection.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn trajectory_count(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[TaskData] {
        &self.tasks
    }

    /// Uniform draw of task datasets, with replacement.
    pub fn sample_tasks(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<&TaskData>> {
        if self.tasks.is_empty() {
            return Err(Error::contract("cannot sample from an empty buffer"));
        }
        Ok((0..n)
            .map(|_| &self.tasks[rng.gen_range(0..self.tasks.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::TerminalKind;
    use crate::trajectory::Step;
    use rand::SeedableRng;

    fn traj(task_id: u64, provenance: Provenance) -> Trajectory {
        Trajectory {
            task_id,
            steps: vec![Step {
                obs: [0.0; 5],
                action: crate::env::Action::Noop,
                reward: 0.0,
            }],
            final_obs: [0.0; 5],
            terminal: TerminalKind::Timeout,
            provenance,
            policy_hash: 0,
        }
    }

    const TASK: TaskSpec = TaskSpec::Constant { wx: 0.0, wy: 0.0 };

    #[test]
    fn split_respects_the_fraction_and_rejects_tiny_batches() {
        let rule = SplitRule::new(0.5).unwrap();
        let batch = vec![traj(0, Provenance::Env); 4];
        let (tr, ts) = rule.split(&batch).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(ts.len(), 2);
        let two = vec![traj(0, Provenance::Env); 2];
        let (tr, ts) = rule.split(&two).unwrap();
        assert_eq!((tr.len(), ts.len()), (1, 1));
        assert!(rule.split(&two[..1]).is_err());
        assert!(SplitRule::new(1.0).is_err());
    }

    #[test]
    fn buffer_rejects_sim_trajectories() {
        let mut buf = DataBuffer::new();
        let err = buf.append(0, &TASK, vec![traj(0, Provenance::Sim)]);
        assert!(matches!(err, Err(Error::Contract(_))));
        assert!(buf.is_empty());
    }

    #[test]
    fn buffer_groups_by_task_and_counts_insertions() {
        let mut buf = DataBuffer::new();
        buf.append(0, &TASK, vec![traj(0, Provenance::Env); 2]).unwrap();
        buf.append(1, &TASK, vec![traj(1, Provenance::Env); 3]).unwrap();
        buf.append(0, &TASK, vec![traj(0, Provenance::Env)]).unwrap();
        assert_eq!(buf.task_count(), 2);
        assert_eq!(buf.trajectory_count(), 6);
        assert_eq!(buf.tasks()[0].trajectories.len(), 3);
    }

    #[test]
    fn sealed_buffer_is_read_only() {
        let mut buf = DataBuffer::new();
        buf.append(0, &TASK, vec![traj(0, Provenance::Env)]).unwrap();
        buf.seal();
        assert!(buf.append(1, &TASK, vec![traj(1, Provenance::Env)]).is_err());
        assert_eq!(buf.trajectory_count(), 1);
    }

    #[test]
    fn sampling_is_uniform_with_replacement_and_deterministic() {
        let mut buf = DataBuffer::new();
        for id in 0..3 {
            buf.append(id, &TASK, vec![traj(id, Provenance::Env)]).unwrap();
        }
        let mut r1 = ChaCha8Rng::seed_from_u64(11);
        let mut r2 = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<u64> = buf.sample_tasks(10, &mut r1).unwrap().iter().map(|t| t.task_id).collect();
        let b: Vec<u64> = buf.sample_tasks(10, &mut r2).unwrap().iter().map(|t| t.task_id).collect();
        assert_eq!(a, b);
        assert!(DataBuffer::new().sample_tasks(1, &mut r1).is_err());
    }
}
