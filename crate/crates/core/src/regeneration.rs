//! Online detection of level regeneration times: moments at which the
//! walk hits a record level for the first time, immediately steps down
//! one more level, and never comes back. Blocks between consecutive
//! regenerations are the i.i.d. units behind every estimator.

use crate::error::{Error, Result};
use crate::walk::{StepObserver, StepRecord};
use serde::Serialize;

/// A live regeneration candidate: first visit to level `level` at
/// `hit_time`, immediate move to `level + 1` at `jump_time`.
#[derive(Debug, Clone, Copy)]
pub struct RegenCandidate {
    pub level: u32,
    pub hit_time: u64,
    pub jump_time: u64,
    pub s_at_jump: f64,
}

/// One regeneration block: elapsed steps and S-displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegenBlock {
    pub dtau: u64,
    pub ds: f64,
}

/// Output of detector finalization: the first regeneration separately
/// (its law differs from the later blocks) and the i.i.d. blocks.
#[derive(Debug, Clone)]
pub struct RegenOutput {
    pub tau1: u64,
    pub s_tau1: f64,
    pub blocks: Vec<RegenBlock>,
    pub max_level: u32,
}

/// Streaming regeneration detector. Feed it the step records of one
/// trajectory in order, then call `finalize`.
#[derive(Debug)]
pub struct RegenDetector {
    // live candidates, strictly increasing in level
    candidates: Vec<RegenCandidate>,
    max_level: u32,
    // set when the previous record was the first visit to a new record
    // level: (level, time of that visit)
    pending: Option<(u32, u64)>,
    prev_level: u32,
    next_n: u64,
}

impl Default for RegenDetector {
    fn default() -> Self {
        Self::new()
    }
}

impl RegenDetector {
    pub fn new() -> Self {
        RegenDetector {
            candidates: Vec::new(),
            // level 0 is the starting level, never a new record, so the
            // root itself is not a candidate
            max_level: 0,
            pending: None,
            prev_level: 0,
            next_n: 1,
        }
    }

    /// Consumes one step record; records must arrive in step order.
    pub fn observe_step(&mut self, record: &StepRecord) -> Result<()> {
        if record.n != self.next_n {
            return Err(Error::OutOfOrderRecord {
                expected: self.next_n,
                got: record.n,
            });
        }
        self.next_n += 1;
        let level = record.level;

        if level < self.prev_level {
            // level drop to `level`: every candidate at or above it can
            // still be revisited and is void
            while matches!(self.candidates.last(), Some(c) if c.level >= level) {
                self.candidates.pop();
            }
            self.pending = None;
        } else if level > self.prev_level {
            // an upward move; did it certify a pending first visit?
            if let Some((pl, pt)) = self.pending.take() {
                debug_assert_eq!(pl + 1, level);
                self.candidates.push(RegenCandidate {
                    level: pl,
                    hit_time: pt,
                    jump_time: record.n,
                    s_at_jump: record.s,
                });
            }
            if level > self.max_level {
                self.max_level = level;
                self.pending = Some((level, record.n));
            }
        } else {
            // hold: a literal reading of "immediately jumps" voids the
            // pending first visit
            self.pending = None;
        }
        self.prev_level = level;
        Ok(())
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Accepts surviving candidates buffered at least `buffer_w` levels
    /// below the deepest level reached and cuts blocks between them.
    pub fn finalize(&self, buffer_w: u32) -> Result<RegenOutput> {
        let cutoff = self.max_level.saturating_sub(buffer_w);
        let accepted: Vec<&RegenCandidate> = self
            .candidates
            .iter()
            .filter(|c| c.level <= cutoff)
            .collect();
        if accepted.len() < 2 {
            return Err(Error::InsufficientRegenerations {
                found: accepted.len(),
                need: 2,
            });
        }
        let blocks = accepted
            .windows(2)
            .map(|w| RegenBlock {
                dtau: w[1].jump_time - w[0].jump_time,
                ds: w[1].s_at_jump - w[0].s_at_jump,
            })
            .collect();
        Ok(RegenOutput {
            tau1: accepted[0].jump_time,
            s_tau1: accepted[0].s_at_jump,
            blocks,
            max_level: self.max_level,
        })
    }
}

impl StepObserver for RegenDetector {
    fn observe(&mut self, record: &StepRecord) {
        self.observe_step(record)
            .expect("trajectory records out of order");
    }
}

/// Sample moments of a block list plus the empirical survival function
/// of the block length.
#[derive(Debug, Clone, Serialize)]
pub struct BlockStats {
    pub count: usize,
    pub mean_dtau: f64,
    pub mean_ds: f64,
    pub mean_ds2: f64,
    pub dtau_moment4: f64,
    /// (t, P(dtau > t)) on the observed support.
    pub dtau_tail: Vec<(u64, f64)>,
}

pub fn block_stats(blocks: &[RegenBlock]) -> Result<BlockStats> {
    if blocks.is_empty() {
        return Err(Error::TooFewBlocks { found: 0, need: 1 });
    }
    let n = blocks.len() as f64;
    let mean_dtau = blocks.iter().map(|b| b.dtau as f64).sum::<f64>() / n;
    let mean_ds = blocks.iter().map(|b| b.ds).sum::<f64>() / n;
    let mean_ds2 = blocks.iter().map(|b| b.ds * b.ds).sum::<f64>() / n;
    let dtau_moment4 = blocks
        .iter()
        .map(|b| (b.dtau as f64).powi(4))
        .sum::<f64>()
        / n;
    let mut lengths: Vec<u64> = blocks.iter().map(|b| b.dtau).collect();
    lengths.sort_unstable();
    let mut dtau_tail = Vec::new();
    let mut i = 0;
    while i < lengths.len() {
        let t = lengths[i];
        while i < lengths.len() && lengths[i] == t {
            i += 1;
        }
        // after the inner loop, i blocks have dtau <= t
        dtau_tail.push((t, (lengths.len() - i) as f64 / n));
    }
    Ok(BlockStats {
        count: blocks.len(),
        mean_dtau,
        mean_ds,
        mean_ds2,
        dtau_moment4,
        dtau_tail,
    })
}
