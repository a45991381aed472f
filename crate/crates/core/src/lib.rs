//! Monte Carlo laboratory for the Metropolis algorithm on disordered
//! d-ary trees: lazy infinite environments, level regeneration times,
//! speed/variance estimation and the Einstein-relation experiment.

pub mod config;
pub mod diagnostics;
pub mod distributions;
pub mod environment;
pub mod error;
pub mod estimators;
pub mod regeneration;
pub mod runner;
pub mod walk;

pub use config::ExperimentConfig;
pub use distributions::{EdgeLaw, LambdaReport};
pub use environment::{Environment, Vertex};
pub use error::Error;
pub use estimators::{ERReport, Estimate};
pub use regeneration::{RegenBlock, RegenDetector};
pub use walk::{HFunction, Params, WalkState};
