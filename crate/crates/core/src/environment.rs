//! Lazy, deterministic representation of the infinite marked d-ary tree.
//!
//! The mark on the parent edge of any vertex is a pure function of
//! (seed, path): a keyed mixing chain is absorbed one child index at a
//! time, and the final state drives inverse-CDF sampling from the edge
//! law. Nothing is stored; the tree exists only through this map.

use crate::distributions::EdgeLaw;
use crate::error::{Error, Result};

/// SplitMix64 finalizer; full-avalanche 64-bit mixer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform double in [0, 1) from the top 53 bits.
#[inline]
fn to_unit(z: u64) -> f64 {
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A vertex identified by its path of child indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vertex {
    path: Vec<u8>,
}

impl Vertex {
    pub fn root() -> Self {
        Vertex { path: Vec::new() }
    }

    pub fn from_path(path: Vec<u8>) -> Self {
        Vertex { path }
    }

    pub fn path(&self) -> &[u8] {
        &self.path
    }

    pub fn level(&self) -> u32 {
        self.path.len() as u32
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }

    pub fn child(&self, index: u8) -> Vertex {
        let mut path = self.path.clone();
        path.push(index);
        Vertex { path }
    }

    /// Parent vertex; the root is its own parent.
    pub fn parent(&self) -> Vertex {
        let mut path = self.path.clone();
        path.pop();
        Vertex { path }
    }
}

/// The random environment: a seed, an edge law and the branching
/// number d. Immutable and freely shareable across threads.
#[derive(Debug, Clone)]
pub struct Environment {
    seed: u64,
    law: EdgeLaw,
    d: u32,
    cdf: Vec<f64>,
    values: Vec<f64>,
}

impl Environment {
    pub fn new(seed: u64, law: EdgeLaw, d: u32) -> Self {
        let cdf = law.cdf();
        let values = law.atoms().iter().map(|a| a.value).collect();
        Environment {
            seed,
            law,
            d,
            cdf,
            values,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn law(&self) -> &EdgeLaw {
        &self.law
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Number of children per vertex (every vertex has d - 1 children;
    /// the d-th neighbor is the parent).
    pub fn children_per_vertex(&self) -> u8 {
        (self.d - 1) as u8
    }

    #[inline]
    fn root_state(&self) -> u64 {
        mix64(self.seed ^ 0x6d61_726b_7472_6565)
    }

    /// Advances the mixing chain from a vertex's state to one child.
    #[inline]
    fn child_state(&self, state: u64, index: u8) -> u64 {
        mix64(state ^ mix64(index as u64 + 1))
    }

    #[inline]
    fn sample_from_state(&self, state: u64) -> f64 {
        let u = to_unit(mix64(state ^ 0x7361_6d70_6c65));
        // Inverse CDF over the (small) atom list.
        for (i, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return self.values[i];
            }
        }
        *self.values.last().unwrap()
    }

    fn state_of(&self, v: &Vertex) -> u64 {
        let mut state = self.root_state();
        for &idx in v.path() {
            state = self.child_state(state, idx);
        }
        state
    }

    /// Mark on the edge from the parent of `v` to `v`.
    pub fn edge_mark(&self, v: &Vertex) -> Result<f64> {
        if v.is_root() {
            return Err(Error::RootHasNoParentEdge);
        }
        Ok(self.sample_from_state(self.state_of(v)))
    }

    /// `S(v)`: sum of edge marks on the root-to-v path; `S(root) = 0`.
    pub fn s_value(&self, v: &Vertex) -> f64 {
        let mut state = self.root_state();
        let mut s = 0.0;
        for &idx in v.path() {
            state = self.child_state(state, idx);
            s += self.sample_from_state(state);
        }
        s
    }

    /// All vertices at level `level` with their S-values.
    pub fn enumerate_level(&self, level: u32) -> Result<Vec<(Vertex, f64)>> {
        const LIMIT: u64 = 100_000_000;
        let width = self.d as u64 - 1;
        let count = width.checked_pow(level).filter(|&c| c <= LIMIT);
        if count.is_none() {
            return Err(Error::LevelTooLarge { level, limit: LIMIT });
        }
        let mut out = Vec::new();
        let mut cursor = EnvCursor::new(self);
        self.enumerate_rec(&mut cursor, level, &mut Vec::new(), &mut out);
        Ok(out)
    }

    fn enumerate_rec(
        &self,
        cursor: &mut EnvCursor,
        level: u32,
        path: &mut Vec<u8>,
        out: &mut Vec<(Vertex, f64)>,
    ) {
        if path.len() as u32 == level {
            out.push((Vertex::from_path(path.clone()), cursor.s()));
            return;
        }
        for idx in 0..self.children_per_vertex() {
            cursor.descend(idx);
            path.push(idx);
            self.enumerate_rec(cursor, level, path, out);
            path.pop();
            cursor.ascend();
        }
    }

    /// Extreme S-value over a level, without materializing the level.
    pub fn level_extreme(&self, level: u32, max: bool) -> f64 {
        let mut cursor = EnvCursor::new(self);
        let mut best = if max { f64::NEG_INFINITY } else { f64::INFINITY };
        self.extreme_rec(&mut cursor, level, max, &mut best);
        best
    }

    fn extreme_rec(&self, cursor: &mut EnvCursor, level: u32, max: bool, best: &mut f64) {
        if cursor.level() == level {
            if max {
                *best = best.max(cursor.s());
            } else {
                *best = best.min(cursor.s());
            }
            return;
        }
        for idx in 0..self.children_per_vertex() {
            cursor.descend(idx);
            self.extreme_rec(cursor, level, max, best);
            cursor.ascend();
        }
    }
}

/// Incremental position in the environment: keeps the mixing-chain
/// states along the current root path so that child marks cost one mix
/// step instead of a walk from the root.
#[derive(Debug, Clone)]
pub struct EnvCursor<'a> {
    env: &'a Environment,
    // (state, mark of the parent edge) per ancestor; root has mark 0.
    states: Vec<(u64, f64)>,
    s: f64,
    path: Vec<u8>,
}

impl<'a> EnvCursor<'a> {
    pub fn new(env: &'a Environment) -> Self {
        EnvCursor {
            env,
            states: vec![(env.root_state(), 0.0)],
            s: 0.0,
            path: Vec::new(),
        }
    }

    pub fn level(&self) -> u32 {
        self.path.len() as u32
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn path(&self) -> &[u8] {
        &self.path
    }

    pub fn vertex(&self) -> Vertex {
        Vertex::from_path(self.path.clone())
    }

    pub fn at_root(&self) -> bool {
        self.path.is_empty()
    }

    /// Mark on the edge to the given child of the current vertex.
    #[inline]
    pub fn child_mark(&self, index: u8) -> f64 {
        let (state, _) = *self.states.last().unwrap();
        self.env
            .sample_from_state(self.env.child_state(state, index))
    }

    /// Mark on the edge to the parent, seen from the current vertex:
    /// `X(v, parent v) = -X(parent v, v)`; 0 at the root (phantom
    /// self-edge).
    #[inline]
    pub fn parent_mark(&self) -> f64 {
        -self.states.last().unwrap().1
    }

    pub fn descend(&mut self, index: u8) {
        let (state, _) = *self.states.last().unwrap();
        let child = self.env.child_state(state, index);
        let mark = self.env.sample_from_state(child);
        self.states.push((child, mark));
        self.s += mark;
        self.path.push(index);
    }

    pub fn ascend(&mut self) {
        if self.path.is_empty() {
            return; // root self-loop
        }
        let (_, mark) = self.states.pop().unwrap();
        self.s -= mark;
        self.path.pop();
    }

    /// Recomputes S from scratch along the stored path, discarding
    /// accumulated floating drift.
    pub fn reanchor(&mut self) {
        self.s = self.states.iter().map(|&(_, m)| m).sum();
    }
}
