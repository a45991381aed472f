//! Statistical layer: speed and variance from regeneration blocks,
//! replica-based baselines, the weak Einstein-relation experiment and
//! the Einstein slope fit.

use crate::error::{Error, Result};
use crate::regeneration::RegenBlock;
use crate::runner::{final_states, merged_blocks, collect_block_runs, RunSpec};
use serde::Serialize;

/// Point value with a standard error; the universal statistical
/// return type.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_units: usize,
    pub method: String,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64, n_units: usize, method: &str) -> Self {
        assert!(stderr >= 0.0);
        assert!(n_units >= 1);
        Estimate {
            value,
            stderr,
            n_units,
            method: method.to_string(),
        }
    }

    /// Mean and standard error of a replica sample.
    pub fn from_sample(values: &[f64], method: &str) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
        } else {
            0.0
        };
        Estimate::new(mean, (var / n as f64).sqrt(), n, method)
    }
}

/// Outcome of the Einstein-relation experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ERReport {
    pub sigma2_hat: Estimate,
    pub slope_hat: Estimate,
    /// `2 * slope / sigma2`; equals 1 when the Einstein relation holds.
    pub ratio: f64,
    pub beta_grid: Vec<(f64, Estimate)>,
    /// Grid points whose runs produced too few blocks.
    pub failures: Vec<(f64, String)>,
}

pub const BLOCK_FLOOR: usize = 30;

/// Delta-method standard error for the ratio of block means
/// `sum(y) / sum(x)`.
fn ratio_estimate(xs: &[f64], ys: &[f64], method: &str) -> Estimate {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let r = my / mx;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let denom = (n - 1.0).max(1.0);
    let var = (syy - 2.0 * r * sxy + r * r * sxx) / denom;
    let stderr = (var / n).sqrt() / mx;
    Estimate::new(r, stderr, xs.len(), method)
}

/// Speed estimator `sum(ds) / sum(dtau)` over i.i.d. blocks.
pub fn speed_from_blocks(blocks: &[RegenBlock]) -> Result<Estimate> {
    speed_from_blocks_with_floor(blocks, BLOCK_FLOOR)
}

pub fn speed_from_blocks_with_floor(blocks: &[RegenBlock], floor: usize) -> Result<Estimate> {
    if blocks.len() < floor {
        return Err(Error::TooFewBlocks {
            found: blocks.len(),
            need: floor,
        });
    }
    let xs: Vec<f64> = blocks.iter().map(|b| b.dtau as f64).collect();
    let ys: Vec<f64> = blocks.iter().map(|b| b.ds).collect();
    Ok(ratio_estimate(&xs, &ys, "speed_from_blocks"))
}

/// Asymptotic variance `sum(ds^2) / sum(dtau)` from blocks generated at
/// beta = 0.
pub fn sigma2_from_blocks(blocks: &[RegenBlock]) -> Result<Estimate> {
    sigma2_from_blocks_with_floor(blocks, BLOCK_FLOOR)
}

pub fn sigma2_from_blocks_with_floor(blocks: &[RegenBlock], floor: usize) -> Result<Estimate> {
    if blocks.len() < floor {
        return Err(Error::TooFewBlocks {
            found: blocks.len(),
            need: floor,
        });
    }
    let xs: Vec<f64> = blocks.iter().map(|b| b.dtau as f64).collect();
    let ys: Vec<f64> = blocks.iter().map(|b| b.ds * b.ds).collect();
    Ok(ratio_estimate(&xs, &ys, "sigma2_from_blocks"))
}

/// Replica-mean of `S_n^2 / n` at beta = 0.
pub fn sigma2_naive(spec: &RunSpec) -> Result<Estimate> {
    if spec.beta != 0.0 {
        return Err(Error::RequiresBetaZero(spec.beta));
    }
    let values: Vec<f64> = final_states(spec)
        .iter()
        .map(|s| s.s * s.s / spec.n_steps as f64)
        .collect();
    Ok(Estimate::from_sample(&values, "sigma2_naive"))
}

/// Replica-mean of `beta * S_{floor(beta^-2)}` under the perturbed law.
pub fn weak_er_estimate(spec: &RunSpec, step_budget: u64) -> Result<Estimate> {
    if spec.beta == 0.0 {
        return Err(Error::RequiresNonzeroBeta);
    }
    let n_steps = (spec.beta.powi(-2)).floor().max(1.0) as u64;
    let needed = n_steps.saturating_mul(spec.n_replicas as u64);
    if needed > step_budget {
        return Err(Error::BudgetExceeded {
            needed,
            budget: step_budget,
        });
    }
    let mut spec = spec.clone();
    spec.n_steps = n_steps;
    let values: Vec<f64> = final_states(&spec)
        .iter()
        .map(|s| spec.beta * s.s)
        .collect();
    Ok(Estimate::from_sample(&values, "weak_er"))
}

/// Weighted through-origin least squares of `v_beta` on `beta`
/// (weights 1/stderr^2), plus the Einstein ratio `2*slope/sigma2`.
pub fn einstein_fit(
    sigma2_hat: Estimate,
    points: Vec<(f64, Estimate)>,
    failures: Vec<(f64, String)>,
) -> ERReport {
    let (mut swxx, mut swxy) = (0.0, 0.0);
    for (beta, est) in &points {
        let w = 1.0 / (est.stderr * est.stderr).max(1e-300);
        swxx += w * beta * beta;
        swxy += w * beta * est.value;
    }
    let slope = swxy / swxx;
    let slope_se = (1.0 / swxx).sqrt();
    let n = points.len();
    let ratio = 2.0 * slope / sigma2_hat.value;
    ERReport {
        sigma2_hat,
        slope_hat: Estimate::new(slope, slope_se, n.max(1), "wls_through_origin"),
        ratio,
        beta_grid: points,
        failures,
    }
}

/// Runs the full Einstein-relation experiment: blocks at beta = 0 for
/// sigma2 and at each nonzero grid beta for the speed.
pub fn einstein_report(
    base: &RunSpec,
    beta_grid: &[f64],
    min_blocks: usize,
) -> Result<ERReport> {
    if !beta_grid.iter().any(|&b| b == 0.0) {
        return Err(Error::MissingSigma2Baseline);
    }
    let mut zero_spec = base.clone();
    zero_spec.beta = 0.0;
    let zero_blocks = merged_blocks(&collect_block_runs(&zero_spec));
    let sigma2_hat = sigma2_from_blocks_with_floor(&zero_blocks, min_blocks)?;

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for &beta in beta_grid.iter().filter(|&&b| b != 0.0) {
        let mut spec = base.clone();
        spec.beta = beta;
        // derive a distinct master seed per grid point so environments
        // are independent across betas
        spec.master_seed = crate::environment::mix64(
            base.master_seed ^ (beta.to_bits().rotate_left(17)),
        );
        let blocks = merged_blocks(&collect_block_runs(&spec));
        match speed_from_blocks_with_floor(&blocks, min_blocks) {
            Ok(est) => points.push((beta, est)),
            Err(e) => failures.push((beta, e.to_string())),
        }
    }
    Ok(einstein_fit(sigma2_hat, points, failures))
}
