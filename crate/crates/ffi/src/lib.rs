//! C ABI over the simulation library: opaque law handles, error codes
//! and flat result structs. The header is generated at build time into
//! `include/metrotree.h`.

use metrotree::distributions::{
    brw_speed, check_xm, make_shifted_binomial, make_two_point, EdgeLaw, SpeedDirection,
};
use metrotree::estimators;
use metrotree::runner::{collect_block_runs, merged_blocks, RunSpec};
use metrotree::walk::HFunction;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidLaw = 2,
    InvalidArgument = 3,
    GrowthConditionFailed = 4,
    InsufficientData = 5,
}

/// Opaque edge-mark law handle.
pub struct MtLaw {
    law: EdgeLaw,
}

/// Point estimate with a standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MtEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_units: u64,
}

/// Growth-condition report: the minimum of the log-Laplace functional
/// and its location.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MtLambdaReport {
    pub beta_star: f64,
    pub lambda_min: f64,
    /// 1 if the minimum is strictly positive.
    pub satisfies_growth: i32,
}

fn estimate_out(est: &estimators::Estimate) -> MtEstimate {
    MtEstimate {
        value: est.value,
        stderr: est.stderr,
        n_units: est.n_units as u64,
    }
}

fn h_of(h: u32) -> Option<HFunction> {
    match h {
        0 => Some(HFunction::Metropolis),
        1 => Some(HFunction::Barker),
        _ => None,
    }
}

/// Creates a two-point law on {+1, -1} with P(X = 1) = p. Returns a
/// handle through `out`; free it with `mt_law_free`.
#[no_mangle]
pub extern "C" fn mt_law_two_point(p: f64, out: *mut *mut MtLaw) -> MtStatus {
    if out.is_null() {
        return MtStatus::NullArgument;
    }
    match make_two_point(p) {
        Ok(law) => {
            unsafe { *out = Box::into_raw(Box::new(MtLaw { law })) };
            MtStatus::Ok
        }
        Err(_) => MtStatus::InvalidLaw,
    }
}

/// Creates a centered shifted-binomial law on {-n, -n+2, ..., n}.
#[no_mangle]
pub extern "C" fn mt_law_shifted_binomial(n: u32, p: f64, out: *mut *mut MtLaw) -> MtStatus {
    if out.is_null() {
        return MtStatus::NullArgument;
    }
    match make_shifted_binomial(n, p) {
        Ok(law) => {
            unsafe { *out = Box::into_raw(Box::new(MtLaw { law })) };
            MtStatus::Ok
        }
        Err(_) => MtStatus::InvalidLaw,
    }
}

/// Frees a law handle. Passing NULL is a no-op.
#[no_mangle]
pub extern "C" fn mt_law_free(law: *mut MtLaw) {
    if !law.is_null() {
        drop(unsafe { Box::from_raw(law) });
    }
}

/// The tilt parameter beta0 of the law.
#[no_mangle]
pub extern "C" fn mt_law_beta0(law: *const MtLaw, out: *mut f64) -> MtStatus {
    if law.is_null() || out.is_null() {
        return MtStatus::NullArgument;
    }
    unsafe { *out = (*law).law.beta0() };
    MtStatus::Ok
}

/// Minimizes the log-Laplace functional over beta >= 0 and reports
/// whether the growth condition holds.
#[no_mangle]
pub extern "C" fn mt_check_growth(
    law: *const MtLaw,
    d: u32,
    out: *mut MtLambdaReport,
) -> MtStatus {
    if law.is_null() || out.is_null() {
        return MtStatus::NullArgument;
    }
    if d < 3 {
        return MtStatus::InvalidArgument;
    }
    let report = check_xm(unsafe { &(*law).law }, d);
    unsafe {
        *out = MtLambdaReport {
            beta_star: report.beta_star,
            lambda_min: report.lambda_min,
            satisfies_growth: report.satisfies_xm as i32,
        }
    };
    MtStatus::Ok
}

/// Predicted branching random walk extreme speed; `direction` is 0 for
/// the maximum, 1 for the minimum.
#[no_mangle]
pub extern "C" fn mt_brw_speed(
    law: *const MtLaw,
    d: u32,
    direction: u32,
    out: *mut f64,
) -> MtStatus {
    if law.is_null() || out.is_null() {
        return MtStatus::NullArgument;
    }
    let dir = match direction {
        0 => SpeedDirection::Max,
        1 => SpeedDirection::Min,
        _ => return MtStatus::InvalidArgument,
    };
    if d < 3 {
        return MtStatus::InvalidArgument;
    }
    match brw_speed(unsafe { &(*law).law }, d, dir) {
        Ok(v) => {
            unsafe { *out = v };
            MtStatus::Ok
        }
        Err(_) => MtStatus::GrowthConditionFailed,
    }
}

fn build_spec(
    law: &EdgeLaw,
    d: u32,
    h: u32,
    beta: f64,
    n_steps: u64,
    n_replicas: u32,
    seed: u64,
    buffer_w: u32,
) -> Option<RunSpec> {
    if d < 3 || n_steps == 0 || n_replicas == 0 {
        return None;
    }
    Some(RunSpec {
        law: law.clone(),
        d,
        h: h_of(h)?,
        beta,
        n_steps,
        n_replicas,
        master_seed: seed,
        buffer_w,
    })
}

/// Runs replicas, cuts regeneration blocks and estimates the speed
/// `sum(dS) / sum(dtau)`. `h` is 0 for metropolis, 1 for barker.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn mt_simulate_speed(
    law: *const MtLaw,
    d: u32,
    h: u32,
    beta: f64,
    n_steps: u64,
    n_replicas: u32,
    seed: u64,
    buffer_w: u32,
    min_blocks: u64,
    out: *mut MtEstimate,
) -> MtStatus {
    if law.is_null() || out.is_null() {
        return MtStatus::NullArgument;
    }
    let Some(spec) = build_spec(
        unsafe { &(*law).law },
        d,
        h,
        beta,
        n_steps,
        n_replicas,
        seed,
        buffer_w,
    ) else {
        return MtStatus::InvalidArgument;
    };
    let blocks = merged_blocks(&collect_block_runs(&spec));
    match estimators::speed_from_blocks_with_floor(&blocks, min_blocks as usize) {
        Ok(est) => {
            unsafe { *out = estimate_out(&est) };
            MtStatus::Ok
        }
        Err(_) => MtStatus::InsufficientData,
    }
}

/// Same as `mt_simulate_speed` but estimates the asymptotic variance
/// `sum(dS^2) / sum(dtau)` at beta = 0.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn mt_simulate_sigma2(
    law: *const MtLaw,
    d: u32,
    h: u32,
    n_steps: u64,
    n_replicas: u32,
    seed: u64,
    buffer_w: u32,
    min_blocks: u64,
    out: *mut MtEstimate,
) -> MtStatus {
    if law.is_null() || out.is_null() {
        return MtStatus::NullArgument;
    }
    let Some(spec) = build_spec(
        unsafe { &(*law).law },
        d,
        h,
        0.0,
        n_steps,
        n_replicas,
        seed,
        buffer_w,
    ) else {
        return MtStatus::InvalidArgument;
    };
    let blocks = merged_blocks(&collect_block_runs(&spec));
    match estimators::sigma2_from_blocks_with_floor(&blocks, min_blocks as usize) {
        Ok(est) => {
            unsafe { *out = estimate_out(&est) };
            MtStatus::Ok
        }
        Err(_) => MtStatus::InsufficientData,
    }
}
