//! Parallel replica driver. Replica i derives its environment and
//! walker seeds from (master seed, i) through distinct lanes, so runs
//! are deterministic regardless of thread count or execution order.

use crate::distributions::EdgeLaw;
use crate::environment::{mix64, Environment};
use crate::error::Result;
use crate::regeneration::{RegenBlock, RegenDetector, RegenOutput};
use crate::walk::{run_trajectory, HFunction, Params, StepObserver, StepRecord, WalkState};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

const LANE_ENV: u64 = 0x656e_76;
const LANE_WALK: u64 = 0x77616c6b;

/// Seed for the environment of replica `i`.
pub fn env_seed(master: u64, replica: u64) -> u64 {
    mix64(mix64(master ^ LANE_ENV).wrapping_add(replica))
}

/// Seed for the walker RNG of replica `i`.
pub fn walk_seed(master: u64, replica: u64) -> u64 {
    mix64(mix64(master ^ LANE_WALK).wrapping_add(replica))
}

/// One experiment's worth of replicas at a single beta.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub law: EdgeLaw,
    pub d: u32,
    pub h: HFunction,
    pub beta: f64,
    pub n_steps: u64,
    pub n_replicas: u32,
    pub master_seed: u64,
    pub buffer_w: u32,
}

impl RunSpec {
    pub fn params(&self) -> Params {
        Params::new(self.d, self.beta, self.h, self.law.clone())
    }

    pub fn environment(&self, replica: u32) -> Environment {
        Environment::new(
            env_seed(self.master_seed, replica as u64),
            self.law.clone(),
            self.d,
        )
    }

    pub fn walker_rng(&self, replica: u32) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(walk_seed(self.master_seed, replica as u64))
    }
}

/// Runs one replica with an observer built per replica; returns the
/// final state and the observer.
pub fn run_replica<O, F>(spec: &RunSpec, replica: u32, make_observer: F) -> (WalkState, O)
where
    O: StepObserver,
    F: FnOnce() -> O,
{
    let params = spec.params();
    let env = spec.environment(replica);
    let mut rng = spec.walker_rng(replica);
    let mut observer = make_observer();
    let state = run_trajectory(&env, &params, spec.n_steps, &mut rng, &mut observer);
    (state, observer)
}

/// Per-replica regeneration result.
pub struct ReplicaBlocks {
    pub replica: u32,
    pub final_state: WalkState,
    pub regen: Result<RegenOutput>,
}

/// Runs all replicas in parallel and cuts regeneration blocks. Output
/// is ordered by replica index; replicas with too few regenerations
/// carry the error instead of blocks.
pub fn collect_block_runs(spec: &RunSpec) -> Vec<ReplicaBlocks> {
    (0..spec.n_replicas)
        .into_par_iter()
        .map(|replica| {
            let (final_state, detector) = run_replica(spec, replica, RegenDetector::new);
            ReplicaBlocks {
                replica,
                final_state,
                regen: detector.finalize(spec.buffer_w),
            }
        })
        .collect()
}

/// Flattens the successful replicas of `collect_block_runs` into one
/// block list (ordered by replica index).
pub fn merged_blocks(runs: &[ReplicaBlocks]) -> Vec<RegenBlock> {
    runs.iter()
        .filter_map(|r| r.regen.as_ref().ok())
        .flat_map(|o| o.blocks.iter().copied())
        .collect()
}

/// Final walk states of all replicas, ordered by replica index.
pub fn final_states(spec: &RunSpec) -> Vec<WalkState> {
    (0..spec.n_replicas)
        .into_par_iter()
        .map(|replica| run_replica(spec, replica, || ()).0)
        .collect()
}

/// S_n at selected checkpoints, per replica.
pub fn s_checkpoints(spec: &RunSpec, checkpoints: &[u64]) -> Vec<Vec<f64>> {
    (0..spec.n_replicas)
        .into_par_iter()
        .map(|replica| {
            let mut values = vec![0.0; checkpoints.len()];
            let cps = checkpoints.to_vec();
            let observer = CheckpointObserver {
                checkpoints: cps,
                values: &mut values,
            };
            let params = spec.params();
            let env = spec.environment(replica);
            let mut rng = spec.walker_rng(replica);
            let mut obs = observer;
            run_trajectory(&env, &params, spec.n_steps, &mut rng, &mut obs);
            values
        })
        .collect()
}

struct CheckpointObserver<'a> {
    checkpoints: Vec<u64>,
    values: &'a mut Vec<f64>,
}

impl StepObserver for CheckpointObserver<'_> {
    fn observe(&mut self, record: &StepRecord) {
        for (i, &cp) in self.checkpoints.iter().enumerate() {
            if record.n == cp {
                self.values[i] = record.s;
            }
        }
    }
}
