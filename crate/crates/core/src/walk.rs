//! The Metropolis Markov chain on the environment: acceptance
//! functions, the transition kernel and trajectory production.

use crate::distributions::EdgeLaw;
use crate::environment::{EnvCursor, Environment, Vertex};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Acceptance function satisfying h(0) = 0, h nondecreasing into [0,1]
/// and the balance identity h(x) = x h(1/x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HFunction {
    Metropolis,
    Barker,
}

impl HFunction {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            HFunction::Metropolis => x.min(1.0),
            HFunction::Barker => x / (1.0 + x),
        }
    }
}

/// Chain parameters: branching number, perturbation strength, the
/// acceptance function and the edge law (which carries beta0).
#[derive(Debug, Clone)]
pub struct Params {
    pub d: u32,
    pub beta: f64,
    pub h: HFunction,
    pub law: EdgeLaw,
}

impl Params {
    pub fn new(d: u32, beta: f64, h: HFunction, law: EdgeLaw) -> Self {
        assert!(d >= 3, "branching number d must be at least 3");
        Params { d, beta, h, law }
    }

    /// Move probability along an edge of mark `x`:
    /// `p_beta(x) = (1/d) h(exp((beta0 + beta) x))`.
    #[inline]
    pub fn p_beta(&self, x: f64) -> f64 {
        self.h.eval(((self.law.beta0() + self.beta) * x).exp()) / self.d as f64
    }

    /// Smallest possible move probability given the bounded support:
    /// `(1/d) h(exp(-(beta0 + |beta|) g))`.
    pub fn ellipticity_floor(&self) -> f64 {
        let g = self.law.ess_sup();
        self.h.eval((-(self.law.beta0() + self.beta.abs()) * g).exp()) / self.d as f64
    }
}

/// Where a step went, relative to the current vertex. The phantom
/// parent edge at the root is a self-loop and is reported as `Hold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Child(u8),
    Parent,
    Hold,
}

/// One trajectory step as seen by observers.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub n: u64,
    pub level: u32,
    pub s: f64,
    pub moved: Move,
}

/// Current chain position.
#[derive(Debug, Clone)]
pub struct WalkState {
    pub vertex: Vertex,
    pub s: f64,
    pub n: u64,
}

impl WalkState {
    pub fn initial() -> Self {
        WalkState {
            vertex: Vertex::root(),
            s: 0.0,
            n: 0,
        }
    }
}

/// Full one-step distribution at a vertex: (neighbor move, mark,
/// probability) for the d neighbors, plus the holding probability.
pub fn transition_distribution(
    env: &Environment,
    params: &Params,
    v: &Vertex,
) -> (Vec<(Move, f64, f64)>, f64) {
    let mut cursor = EnvCursor::new(env);
    for &idx in v.path() {
        cursor.descend(idx);
    }
    transition_distribution_at(params, &cursor)
}

fn transition_distribution_at(
    params: &Params,
    cursor: &EnvCursor,
) -> (Vec<(Move, f64, f64)>, f64) {
    let children = params.d as u8 - 1;
    let mut moves = Vec::with_capacity(params.d as usize);
    let mut total = 0.0;
    for idx in 0..children {
        let mark = cursor.child_mark(idx);
        let p = params.p_beta(mark);
        total += p;
        moves.push((Move::Child(idx), mark, p));
    }
    let parent_mark = cursor.parent_mark();
    let p = params.p_beta(parent_mark);
    total += p;
    let parent_move = if cursor.at_root() { Move::Hold } else { Move::Parent };
    moves.push((parent_move, parent_mark, p));
    (moves, (1.0 - total).max(0.0))
}

/// Anything that consumes the step stream of a trajectory.
pub trait StepObserver {
    fn observe(&mut self, record: &StepRecord);
}

impl StepObserver for () {
    fn observe(&mut self, _: &StepRecord) {}
}

/// Adapter turning a closure into an observer.
pub struct FnObserver<F>(pub F);

impl<F: FnMut(&StepRecord)> StepObserver for FnObserver<F> {
    fn observe(&mut self, record: &StepRecord) {
        (self.0)(record)
    }
}

/// A walker bound to an environment; owns the incremental cursor.
pub struct Walker<'a> {
    cursor: EnvCursor<'a>,
    params: &'a Params,
    n: u64,
}

const REANCHOR_INTERVAL: u64 = 1 << 20;

impl<'a> Walker<'a> {
    pub fn new(env: &'a Environment, params: &'a Params) -> Self {
        Walker {
            cursor: EnvCursor::new(env),
            params,
            n: 0,
        }
    }

    /// Starts the walker at the vertex with the given path.
    pub fn new_at(env: &'a Environment, params: &'a Params, path: &[u8]) -> Self {
        let mut cursor = EnvCursor::new(env);
        for &idx in path {
            cursor.descend(idx);
        }
        Walker { cursor, params, n: 0 }
    }

    pub fn state(&self) -> WalkState {
        WalkState {
            vertex: self.cursor.vertex(),
            s: self.cursor.s(),
            n: self.n,
        }
    }

    pub fn level(&self) -> u32 {
        self.cursor.level()
    }

    pub fn s(&self) -> f64 {
        self.cursor.s()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Samples one transition. Child probabilities occupy
    /// [0, sum_children), the parent edge the next band, and the
    /// remainder holds.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> StepRecord {
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        let children = self.params.d as u8 - 1;
        let mut moved = Move::Hold;
        for idx in 0..children {
            acc += self.params.p_beta(self.cursor.child_mark(idx));
            if u < acc {
                self.cursor.descend(idx);
                moved = Move::Child(idx);
                break;
            }
        }
        if moved == Move::Hold {
            acc += self.params.p_beta(self.cursor.parent_mark());
            if u < acc {
                if self.cursor.at_root() {
                    moved = Move::Hold; // phantom self-loop
                } else {
                    self.cursor.ascend();
                    moved = Move::Parent;
                }
            }
        }
        self.n += 1;
        if self.n % REANCHOR_INTERVAL == 0 {
            self.cursor.reanchor();
        }
        StepRecord {
            n: self.n,
            level: self.cursor.level(),
            s: self.cursor.s(),
            moved,
        }
    }
}

/// Advances the chain `n_steps` from the root, feeding every step to
/// the observer; returns the final state.
pub fn run_trajectory<R: Rng, O: StepObserver>(
    env: &Environment,
    params: &Params,
    n_steps: u64,
    rng: &mut R,
    observer: &mut O,
) -> WalkState {
    let mut walker = Walker::new(env, params);
    for _ in 0..n_steps {
        let record = walker.step(rng);
        observer.observe(&record);
    }
    walker.state()
}
