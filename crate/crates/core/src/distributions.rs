//! Finite atomic edge-mark laws and their analytic quantities: the tilt
//! parameter `beta0`, the log-Laplace transform `Lambda`, the growth
//! condition check and the branching random walk speed.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const PROB_TOL: f64 = 1e-12;
const BETA0_TOL: f64 = 1e-9;

/// One support point of an edge-mark law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Finite discrete law of the edge mark X.
///
/// Invariants established at construction: probabilities sum to one,
/// support is mirror-symmetric, and `exp(beta0 * x) * p(x) = p(-x)`
/// holds atomwise for a unique `beta0 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLaw {
    atoms: Vec<Atom>,
    beta0: f64,
    ess_sup: f64,
}

/// Result of minimizing `Lambda` over nonnegative tilts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaReport {
    pub beta_star: f64,
    pub lambda_min: f64,
    pub satisfies_xm: bool,
}

/// Direction of the branching random walk speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedDirection {
    Max,
    Min,
}

impl EdgeLaw {
    /// Builds a law from raw atoms, detecting `beta0` from the atomwise
    /// detailed-balance relation. Rejects laws whose support is not
    /// mirror-symmetric or where the detected tilt is not constant
    /// across atoms or not strictly positive.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        let mut atoms: Vec<Atom> = atoms
            .iter()
            .map(|&(value, prob)| Atom { value, prob })
            .collect();
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        for a in &atoms {
            if !a.value.is_finite() {
                return Err(Error::InvalidLaw(format!("non-finite value {}", a.value)));
            }
            if !(a.prob > 0.0 && a.prob <= 1.0) {
                return Err(Error::InvalidLaw(format!(
                    "probability {} outside (0, 1]",
                    a.prob
                )));
            }
        }
        for w in atoms.windows(2) {
            if w[0].value == w[1].value {
                return Err(Error::InvalidLaw(format!(
                    "duplicate atom value {}",
                    w[0].value
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidLaw(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        if atoms.len() == 1 {
            return Err(Error::InvalidLaw(
                "point mass: beta0 is not unique".into(),
            ));
        }

        // Mirror symmetry of the support and constancy of
        // log(p(-x)/p(x)) / x across positive atoms.
        let mut beta0 = f64::NAN;
        for a in &atoms {
            if a.value <= 0.0 {
                continue;
            }
            let mirror = atoms
                .iter()
                .find(|b| (b.value + a.value).abs() <= BETA0_TOL * a.value.abs().max(1.0))
                .ok_or_else(|| {
                    Error::InvalidLaw(format!("atom {} has no mirror atom", a.value))
                })?;
            let b0 = (mirror.prob / a.prob).ln() / a.value;
            if beta0.is_nan() {
                beta0 = b0;
            } else if (b0 - beta0).abs() > BETA0_TOL {
                return Err(Error::InvalidLaw(format!(
                    "tilt not constant across atoms: {beta0} vs {b0}"
                )));
            }
        }
        if beta0.is_nan() {
            return Err(Error::InvalidLaw(
                "no positive atom; beta0 undetectable".into(),
            ));
        }
        if beta0 <= 0.0 {
            return Err(Error::InvalidLaw(format!(
                "detected beta0 = {beta0} is not strictly positive"
            )));
        }
        let ess_sup = atoms.iter().map(|a| a.value.abs()).fold(0.0, f64::max);
        Ok(EdgeLaw {
            atoms,
            beta0,
            ess_sup,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// The tilt parameter at which the environment chain is reversible.
    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// `g = esssup |X|`.
    pub fn ess_sup(&self) -> f64 {
        self.ess_sup
    }

    /// Cumulative probabilities in atom order, for inverse-CDF sampling.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            acc += a.prob;
            out.push(acc);
        }
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// `E[exp(beta * X)]`, exact atom summation.
    pub fn mgf(&self, beta: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob * (beta * a.value).exp())
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value).sum()
    }
}

/// Two-point law on {+1, -1} with `P(X = 1) = p`; `beta0 = log((1-p)/p)`.
pub fn make_two_point(p: f64) -> Result<EdgeLaw> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidLaw(format!(
            "two-point p = {p} outside (0, 1/2); beta0 would not be positive"
        )));
    }
    EdgeLaw::from_atoms(&[(1.0, p), (-1.0, 1.0 - p)])
}

/// Law of `2Y - n` with `Y ~ Binomial(n, p)`; `beta0 = log((1-p)/p)`.
pub fn make_shifted_binomial(n: u32, p: f64) -> Result<EdgeLaw> {
    if n == 0 {
        return Err(Error::InvalidLaw("binomial needs n >= 1".into()));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidLaw(format!(
            "shifted binomial p = {p} outside (0, 1/2)"
        )));
    }
    let mut atoms = Vec::with_capacity(n as usize + 1);
    // P(Y = k) = C(n, k) p^k (1-p)^(n-k), value 2k - n.
    let mut coeff = 1.0f64;
    for k in 0..=n {
        let prob = coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        atoms.push(((2.0 * k as f64) - n as f64, prob));
        if k < n {
            coeff = coeff * (n - k) as f64 / (k + 1) as f64;
        }
    }
    // Exact renormalization against floating drift in the coefficients.
    let total: f64 = atoms.iter().map(|&(_, p)| p).sum();
    for a in &mut atoms {
        a.1 /= total;
    }
    EdgeLaw::from_atoms(&atoms)
}

/// The threshold `p0` below which the shifted binomial violates the
/// growth condition: `p0 = (1 - sqrt(1 - (d-1)^(-2/n))) / 2`.
pub fn shifted_binomial_p0(d: u32, n: u32) -> f64 {
    let q = (d as f64 - 1.0).powf(-2.0 / n as f64);
    (1.0 - (1.0 - q).sqrt()) / 2.0
}

/// Tilts a symmetric base law by a density proportional to
/// `exp(-beta0 * x / 2)`; the result satisfies atomwise detailed
/// balance with the given `beta0`.
pub fn make_tilted_symmetric(base_atoms: &[(f64, f64)], beta0: f64) -> Result<EdgeLaw> {
    if beta0 <= 0.0 {
        return Err(Error::InvalidLaw(format!("beta0 = {beta0} must be positive")));
    }
    if base_atoms.len() < 2 {
        return Err(Error::InvalidLaw(
            "base law is a point mass: beta0 is not unique".into(),
        ));
    }
    for &(x, p) in base_atoms {
        let mirror = base_atoms
            .iter()
            .find(|&&(y, _)| (y + x).abs() <= BETA0_TOL * x.abs().max(1.0));
        match mirror {
            Some(&(_, q)) if (q - p).abs() <= PROB_TOL.max(1e-12 * p) => {}
            _ => {
                return Err(Error::InvalidLaw(format!(
                    "base law not symmetric at atom {x}"
                )))
            }
        }
    }
    let mut atoms: Vec<(f64, f64)> = base_atoms
        .iter()
        .map(|&(x, p)| (x, (-beta0 * x / 2.0).exp() * p))
        .collect();
    let total: f64 = atoms.iter().map(|&(_, p)| p).sum();
    for a in &mut atoms {
        a.1 /= total;
    }
    EdgeLaw::from_atoms(&atoms)
}

/// `Lambda(beta) = log E[exp(beta X)] + log(d - 1)`.
pub fn log_laplace(law: &EdgeLaw, beta: f64, d: u32) -> f64 {
    // log-sum-exp over atoms, stable for large |beta|.
    let terms: Vec<f64> = law
        .atoms
        .iter()
        .map(|a| beta * a.value + a.prob.ln())
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    m + sum.ln() + ((d as f64) - 1.0).ln()
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Minimizes `Lambda` over `beta >= 0` and reports whether the minimum
/// is strictly positive.
pub fn check_xm(law: &EdgeLaw, d: u32) -> LambdaReport {
    // Lambda is convex with Lambda(beta) -> +infinity as beta -> +infinity
    // whenever a positive atom exists; [0, 50] brackets the minimizer for
    // any law passing construction.
    let beta_star = golden_section(|b| log_laplace(law, b, d), 0.0, 50.0, 1e-10);
    let beta_star = beta_star.max(0.0);
    let lambda_min = log_laplace(law, beta_star, d);
    LambdaReport {
        beta_star,
        lambda_min,
        satisfies_xm: lambda_min > 1e-9,
    }
}

/// Speed of the extremal particle of the branching random walk:
/// `inf_{beta>0} Lambda(beta)/beta` for the maximum, and the sign-flipped
/// analogue for the minimum.
pub fn brw_speed(law: &EdgeLaw, d: u32, direction: SpeedDirection) -> Result<f64> {
    let report = check_xm(law, d);
    if !report.satisfies_xm {
        return Err(Error::GrowthConditionFailed {
            lambda_min: report.lambda_min,
            beta_star: report.beta_star,
        });
    }
    match direction {
        SpeedDirection::Max => Ok(max_speed(law, d)),
        SpeedDirection::Min => {
            // sup_{beta<0} Lambda(beta)/beta equals minus the max speed of
            // the sign-flipped law.
            let flipped: Vec<(f64, f64)> =
                law.atoms.iter().map(|a| (-a.value, a.prob)).collect();
            // The flipped law has beta0 < 0, so bypass construction and
            // minimize directly.
            let f = |beta: f64| {
                let terms: Vec<f64> = flipped
                    .iter()
                    .map(|&(x, p)| beta * x + p.ln())
                    .collect();
                let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lam = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
                    + ((d as f64) - 1.0).ln();
                lam / beta
            };
            let beta_star = golden_section(f, 1e-6, 100.0, 1e-9);
            Ok(-f(beta_star))
        }
    }
}

fn max_speed(law: &EdgeLaw, d: u32) -> f64 {
    let f = |beta: f64| log_laplace(law, beta, d) / beta;
    let beta_star = golden_section(f, 1e-6, 100.0, 1e-9);
    f(beta_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_beta0_closed_form() {
        let law = make_two_point(0.25).unwrap();
        assert!((law.beta0() - 3f64.ln()).abs() < 1e-12);
        assert!((law.ess_sup() - 1.0).abs() < 1e-15);
        let law = make_two_point(0.1).unwrap();
        assert!((law.beta0() - 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_point_rejects_symmetric_and_out_of_range() {
        assert!(make_two_point(0.5).is_err());
        assert!(make_two_point(0.0).is_err());
        assert!(make_two_point(0.75).is_err());
    }

    #[test]
    fn atomic_detailed_balance() {
        for law in [
            make_two_point(0.25).unwrap(),
            make_shifted_binomial(2, 0.3).unwrap(),
            make_shifted_binomial(4, 0.2).unwrap(),
        ] {
            let b0 = law.beta0();
            for a in law.atoms() {
                let mirror = law
                    .atoms()
                    .iter()
                    .find(|b| (b.value + a.value).abs() < 1e-12)
                    .unwrap();
                assert!(
                    ((b0 * a.value).exp() * a.prob - mirror.prob).abs() < 1e-12,
                    "detailed balance broken at atom {}",
                    a.value
                );
            }
        }
    }

    #[test]
    fn shifted_binomial_n1_equals_two_point() {
        let a = make_shifted_binomial(1, 0.25).unwrap();
        let b = make_two_point(0.25).unwrap();
        assert_eq!(a.atoms().len(), 2);
        for (x, y) in a.atoms().iter().zip(b.atoms()) {
            assert!((x.value - y.value).abs() < 1e-15);
            assert!((x.prob - y.prob).abs() < 1e-15);
        }
    }

    #[test]
    fn shifted_binomial_n2_atoms() {
        let law = make_shifted_binomial(2, 0.3).unwrap();
        let expect = [(-2.0, 0.49), (0.0, 0.42), (2.0, 0.09)];
        for (a, (v, p)) in law.atoms().iter().zip(expect) {
            assert!((a.value - v).abs() < 1e-12);
            assert!((a.prob - p).abs() < 1e-12);
        }
        assert!((law.beta0() - (7f64 / 3.0).ln()).abs() < 1e-9);
        // atomic detailed balance at x = 2
        assert!(((2.0 * law.beta0()).exp() * 0.09 - 0.49).abs() < 1e-9);
    }

    #[test]
    fn p0_threshold_value() {
        // d = 3, n = 1
        let p0 = shifted_binomial_p0(3, 1);
        assert!((p0 - (1.0 - 3f64.sqrt() / 2.0) / 2.0).abs() < 1e-15);
        assert!((p0 - 0.0669873).abs() < 1e-6);
    }

    #[test]
    fn tilted_symmetric_reduces_to_two_point() {
        let law = make_tilted_symmetric(&[(-1.0, 0.5), (1.0, 0.5)], 3f64.ln()).unwrap();
        let tp = make_two_point(0.25).unwrap();
        for (a, b) in law.atoms().iter().zip(tp.atoms()) {
            assert!((a.value - b.value).abs() < 1e-15);
            assert!((a.prob - b.prob).abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_symmetric_rejects_point_mass_and_asymmetry() {
        assert!(make_tilted_symmetric(&[(0.0, 1.0)], 1.0).is_err());
        assert!(make_tilted_symmetric(&[(-1.0, 0.4), (1.0, 0.6)], 1.0).is_err());
    }

    #[test]
    fn tilted_three_atom_ratio() {
        let law =
            make_tilted_symmetric(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)], 1.0).unwrap();
        let p_plus = law.atoms().iter().find(|a| a.value == 2.0).unwrap().prob;
        let p_minus = law.atoms().iter().find(|a| a.value == -2.0).unwrap().prob;
        assert!((p_plus / p_minus - (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn log_laplace_at_zero() {
        let law = make_two_point(0.25).unwrap();
        assert!((log_laplace(&law, 0.0, 3) - 2f64.ln()).abs() < 1e-12);
        // symmetry point: Lambda(beta0) = Lambda(0)
        let b0 = law.beta0();
        assert!((log_laplace(&law, b0, 3) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn check_xm_matches_closed_form_two_point() {
        // Closed form for the two-point law: min at beta = beta0/2,
        // value log(2 (d-1) sqrt(p (1-p))).
        for p in [0.25, 0.1, 0.3, 0.45] {
            let law = make_two_point(p).unwrap();
            let report = check_xm(&law, 3);
            let closed = (4.0 * (p * (1.0 - p)).sqrt()).ln();
            assert!(
                (report.lambda_min - closed).abs() < 1e-8,
                "p = {p}: {} vs {}",
                report.lambda_min,
                closed
            );
            assert!((report.beta_star - law.beta0() / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn check_xm_pass_fail() {
        let report = check_xm(&make_two_point(0.25).unwrap(), 3);
        assert!(report.satisfies_xm);
        assert!((report.lambda_min - 3f64.sqrt().ln()).abs() < 1e-8);
        let report = check_xm(&make_two_point(0.05).unwrap(), 3);
        assert!(!report.satisfies_xm);
    }

    #[test]
    fn brw_speed_zero_of_rate_function() {
        let law = make_two_point(0.25).unwrap();
        let v = brw_speed(&law, 3, SpeedDirection::Max).unwrap();
        assert!(v > 0.0);
        // Independent check on a dense grid: min_beta (Lambda(beta) - beta v) = 0.
        let mut min = f64::INFINITY;
        let mut b = 0.01;
        while b < 30.0 {
            min = min.min(log_laplace(&law, b, 3) - b * v);
            b += 0.001;
        }
        assert!(min.abs() < 1e-6, "rate function at speed: {min}");
    }

    #[test]
    fn brw_speed_min_is_negative_reflection() {
        let law = make_two_point(0.25).unwrap();
        let vmin = brw_speed(&law, 3, SpeedDirection::Min).unwrap();
        assert!(vmin < 0.0);
        // The +1/-1 law flipped has the same support; the min speed of a
        // law with marks negated equals minus the max speed of the law
        // with the original marks (definition symmetry). For the
        // two-point law flipping swaps p and 1-p, making the walk
        // upward-heavy, so |vmin| > vmax.
        let vmax = brw_speed(&law, 3, SpeedDirection::Max).unwrap();
        assert!(vmin.abs() > vmax);
    }

    #[test]
    fn brw_speed_requires_growth_condition() {
        let law = make_two_point(0.05).unwrap();
        assert!(brw_speed(&law, 3, SpeedDirection::Max).is_err());
    }

    proptest! {
        #[test]
        fn laplace_symmetry_about_half_beta0(beta in -5.0f64..5.0) {
            for law in [make_two_point(0.25).unwrap(), make_shifted_binomial(3, 0.3).unwrap()] {
                let b0 = law.beta0();
                let a = log_laplace(&law, beta, 3);
                let b = log_laplace(&law, b0 - beta, 3);
                prop_assert!((a - b).abs() < 1e-10, "Lambda({beta}) = {a} vs Lambda(b0 - beta) = {b}");
            }
        }

        #[test]
        fn lambda_is_convex(center in -4.0f64..4.0, step in 0.01f64..1.0) {
            let law = make_shifted_binomial(2, 0.3).unwrap();
            let f = |b: f64| log_laplace(&law, b, 3);
            let second_diff = f(center - step) - 2.0 * f(center) + f(center + step);
            prop_assert!(second_diff >= -1e-10);
        }
    }
}
