//! s-parameterized quasiprobability functions of Gaussian states.
//!
//! For a Gaussian state the order-`s` function (with `s <= 0`) is the Wigner
//! function of the same state with its covariance smoothed to `G + |s| I`.
//! `s = 0` gives the Wigner function, `s = -1` the Husimi function.
//!
//! Everything is evaluated as a logarithm first and exponentiated once.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, structural, Error, Result};
use crate::gaussian::{ln_gaussian_density, GaussianState, StsParams};

/// Order parameter `s` of a quasiprobability function, restricted to `s <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Smoothing(f64);

impl Smoothing {
    /// The Husimi order `s = -1`, where both measurement branches meet.
    pub const HUSIMI: Smoothing = Smoothing(-1.0);

    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() || s > 0.0 {
            return domain(format!(
                "smoothing parameter must be finite and <= 0, got {s}"
            ));
        }
        Ok(Self(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `|s|`, the variance added to every quadrature.
    pub fn width(self) -> f64 {
        -self.0
    }

    /// True for `-1 < s <= 0`, where the measurement is `(1-s) Pi + s I`.
    pub fn is_upper_branch(self) -> bool {
        self.0 > -1.0
    }
}

impl TryFrom<f64> for Smoothing {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<Smoothing> for f64 {
    fn from(s: Smoothing) -> f64 {
        s.0
    }
}

/// Which arm of a (1+1)-mode source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    First,
    Second,
}

/// Sign selector for the [`c_combinator`] and [`d_combinator`] helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Sign::Plus => a + b,
            Sign::Minus => a - b,
        }
    }
}

fn check_r(r: f64) -> Result<()> {
    if !r.is_finite() || r < 0.0 {
        return domain(format!("squeezing must be finite and >= 0, got {r}"));
    }
    Ok(())
}

/// `alpha beta + conj(alpha) conj(beta) = 2 Re(alpha beta)`.
fn cross(alpha: Complex64, beta: Complex64) -> f64 {
    2.0 * (alpha * beta).re
}

/// Two-mode squeezed vacuum.
pub fn q_epr(r: f64, alpha: Complex64, beta: Complex64, s: Smoothing) -> Result<f64> {
    check_r(r)?;
    let s = s.value();
    let c = (2.0 * r).cosh();
    let big_r = s * s - 2.0 * s * c + 1.0;
    let big_s = c - s;
    let expo = -(2.0 / big_r)
        * (big_s * (alpha.norm_sqr() + beta.norm_sqr()) - (2.0 * r).sinh() * cross(alpha, beta));
    Ok(((4.0 / (PI * PI * big_r)).ln() + expo).exp())
}

/// Single-mode marginal of [`q_epr`]; both arms coincide.
pub fn q_epr_marginal(r: f64, alpha: Complex64, s: Smoothing) -> Result<f64> {
    check_r(r)?;
    let big_s = (2.0 * r).cosh() - s.value();
    Ok(single_mode(big_s, alpha))
}

fn single_mode(width: f64, alpha: Complex64) -> f64 {
    ((2.0 / (PI * width)).ln() - 2.0 * alpha.norm_sqr() / width).exp()
}

/// The scalars `(A, A1, A2)` of the squeezed thermal closed form.
fn sts_coefficients(p: &StsParams, s: f64) -> (f64, f64, f64) {
    let ch2 = p.r.cosh().powi(2);
    let sum = p.v1 + p.v2;
    let a = -2.0 * ch2 * s * sum + (p.v1 + s) * (p.v2 + s);
    let a1 = sum * ch2 - p.v1 - s;
    let a2 = sum * ch2 - p.v2 - s;
    (a, a1, a2)
}

/// Two-mode squeezed thermal state.
pub fn q_sts(p: StsParams, alpha: Complex64, beta: Complex64, s: Smoothing) -> Result<f64> {
    p.check()?;
    let (a, a1, a2) = sts_coefficients(&p, s.value());
    let c = 0.5 * (p.v1 + p.v2) * (2.0 * p.r).sinh();
    let expo = -(2.0 / a) * (a1 * alpha.norm_sqr() + a2 * beta.norm_sqr() - c * cross(alpha, beta));
    Ok(((4.0 / (PI * PI * a)).ln() + expo).exp())
}

/// Single-mode marginal of [`q_sts`] on the chosen arm.
pub fn q_sts_marginals(p: StsParams, alpha: Complex64, s: Smoothing, arm: Arm) -> Result<f64> {
    p.check()?;
    let (_, a1, a2) = sts_coefficients(&p, s.value());
    Ok(match arm {
        Arm::First => single_mode(a2, alpha),
        Arm::Second => single_mode(a1, alpha),
    })
}

/// Any zero-mean Gaussian state, one complex point per mode.
pub fn q_generic(state: &GaussianState, point: &[Complex64], s: Smoothing) -> Result<f64> {
    if !state.is_zero_mean() {
        return Err(Error::Unsupported(
            "quasiprobability evaluation requires a zero-mean state".into(),
        ));
    }
    let mut cov = state.cov().clone();
    for i in 0..cov.nrows() {
        cov[(i, i)] += s.width();
    }
    Ok(ln_gaussian_density(&cov, point)?.exp())
}

/// Marginal of [`q_generic`] on the modes listed in `kept` (0-based, in the
/// order the coordinates of `point` are given).
pub fn q_generic_marginal(
    state: &GaussianState,
    kept: &[usize],
    point: &[Complex64],
    s: Smoothing,
) -> Result<f64> {
    let n = state.modes();
    if kept.is_empty() {
        return structural("marginal needs at least one kept mode");
    }
    if let Some(&bad) = kept.iter().find(|&&m| m >= n) {
        return structural(format!(
            "mode index {bad} out of range for a {n}-mode state"
        ));
    }
    let mut seen = vec![false; n];
    for &m in kept {
        if std::mem::replace(&mut seen[m], true) {
            return structural(format!("mode index {m} listed twice"));
        }
    }
    let idx: Vec<usize> = kept.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let sub = state.cov().select_rows(&idx).select_columns(&idx);
    let reduced = GaussianState::from_parts(sub, state.mean().select_rows(&idx))?;
    q_generic(&reduced, point, s)
}

/// `Q(a1, a2) +- Q(a1', a2')` from the two joint values.
pub fn c_combinator(sign: Sign, q: f64, q_prime: f64) -> f64 {
    sign.apply(q, q_prime)
}

/// `Q(a1) + Q(a2) +- (Q(a1') + Q(a2'))` from four marginal values.
pub fn d_combinator(sign: Sign, q1: f64, q2: f64, q1_prime: f64, q2_prime: f64) -> f64 {
    sign.apply(q1 + q2, q1_prime + q2_prime)
}

/// Precomputed order-`s` function of a zero-mean (1+1)-mode state.
///
/// Holds the inverse smoothed covariance of the joint state and of both
/// single-mode marginals, so each evaluation is a handful of flops.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeKernel {
    inv: [[f64; 4]; 4],
    ln_pref: f64,
    marg: [([[f64; 2]; 2], f64); 2],
}

impl TwoModeKernel {
    pub fn new(state: &GaussianState, s: Smoothing) -> Result<Self> {
        if state.modes() != 2 {
            return structural(format!(
                "expected a (1+1)-mode state, got {} modes",
                state.modes()
            ));
        }
        if !state.is_zero_mean() {
            return Err(Error::Unsupported(
                "quasiprobability evaluation requires a zero-mean state".into(),
            ));
        }
        let mut cov = state.cov().clone();
        for i in 0..4 {
            cov[(i, i)] += s.width();
        }
        let (inv, ln_pref) = invert_gaussian::<4>(&cov)?;
        let mut marg = [([[0.0; 2]; 2], 0.0); 2];
        for (k, m) in marg.iter_mut().enumerate() {
            let sub = cov.view((2 * k, 2 * k), (2, 2)).into_owned();
            *m = invert_gaussian::<2>(&sub)?;
        }
        Ok(Self { inv, ln_pref, marg })
    }

    /// Joint value `Q(alpha, beta)`.
    pub fn joint(&self, alpha: Complex64, beta: Complex64) -> f64 {
        let x = [2.0 * alpha.re, 2.0 * alpha.im, 2.0 * beta.re, 2.0 * beta.im];
        let quad: f64 = self
            .inv
            .iter()
            .zip(&x)
            .map(|(row, xi)| xi * row.iter().zip(&x).map(|(a, xj)| a * xj).sum::<f64>())
            .sum();
        (self.ln_pref - 0.5 * quad).exp()
    }

    /// Marginal value on one arm.
    pub fn marginal(&self, arm: Arm, alpha: Complex64) -> f64 {
        let (m, ln_pref) = &self.marg[arm as usize];
        let x = [2.0 * alpha.re, 2.0 * alpha.im];
        let quad =
            x[0] * (m[0][0] * x[0] + m[0][1] * x[1]) + x[1] * (m[1][0] * x[0] + m[1][1] * x[1]);
        (ln_pref - 0.5 * quad).exp()
    }
}

fn invert_gaussian<const D: usize>(cov: &nalgebra::DMatrix<f64>) -> Result<([[f64; D]; D], f64)> {
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo <= 0.0 || hi / lo > crate::gaussian::MAX_CONDITION {
        return Err(Error::Numeric(format!(
            "smoothed covariance is singular or ill-conditioned (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    let v = &eig.eigenvectors;
    let mut inv = [[0.0; D]; D];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = (0..D)
                .map(|k| v[(i, k)] * v[(j, k)] / eig.eigenvalues[k])
                .sum();
        }
    }
    let ln_det: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
    let modes = (D / 2) as f64;
    Ok((inv, modes * (2.0 / PI).ln() - 0.5 * ln_det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{epr_state, sts_state};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sm(s: f64) -> Smoothing {
        Smoothing::new(s).unwrap()
    }

    #[test]
    fn smoothing_rejects_positive() {
        assert!(matches!(Smoothing::new(0.1), Err(Error::Domain(_))));
        assert!(Smoothing::new(f64::NAN).is_err());
        assert!(Smoothing::new(0.0).is_ok());
        assert!(sm(-0.5).is_upper_branch());
        assert!(!sm(-1.0).is_upper_branch());
    }

    #[test]
    fn epr_values() {
        let z = c(0.0, 0.0);
        assert_relative_eq!(
            q_epr(0.0, z, z, sm(-1.0)).unwrap(),
            1.0 / PI.powi(2),
            epsilon = 1e-15
        );
        let one = c(1.0, 0.0);
        let v = q_epr(1.0, one, one, sm(-1.0)).unwrap();
        assert_relative_eq!(v, 0.0264147, epsilon = 1e-7);
        let r_big = 1.0 + 2.0 * (2.0f64).cosh() + 1.0;
        assert_relative_eq!(r_big, 9.524391382167263, epsilon = 1e-12);
        assert_relative_eq!(
            q_epr(1.0, z, z, sm(-1.0)).unwrap(),
            4.0 / (PI * PI * r_big),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            q_epr(1.0, z, z, sm(-1.0)).unwrap(),
            0.042552,
            epsilon = 5e-7
        );
        assert!(q_epr(-1.0, z, z, sm(-1.0)).is_err());
    }

    #[test]
    fn epr_marginal_values() {
        let z = c(0.0, 0.0);
        assert_relative_eq!(
            q_epr_marginal(0.0, z, sm(-1.0)).unwrap(),
            1.0 / PI,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            q_epr_marginal(1.0, z, sm(-1.0)).unwrap(),
            0.1336820,
            epsilon = 1e-7
        );
    }

    #[test]
    fn sts_values() {
        let z = c(0.0, 0.0);
        let p = StsParams::symmetric(1.2, 0.0).unwrap();
        assert_relative_eq!(
            q_sts(p, z, z, sm(-1.0)).unwrap(),
            4.0 / (PI * PI * 4.84),
            epsilon = 1e-15
        );
        assert_relative_eq!(q_sts(p, z, z, sm(-1.0)).unwrap(), 0.0837365, epsilon = 1e-7);
        assert_relative_eq!(
            q_sts_marginals(p, z, sm(-1.0), Arm::First).unwrap(),
            2.0 / (PI * 2.2),
            epsilon = 1e-15
        );
        let p = StsParams::symmetric(1.2, 1.0).unwrap();
        let a = 4.8 * 1.0f64.cosh().powi(2) + 0.04;
        assert_relative_eq!(a, 11.469270, epsilon = 1e-6);
        assert_relative_eq!(
            q_sts(p, z, z, sm(-1.0)).unwrap(),
            4.0 / (PI * PI * a),
            epsilon = 1e-15
        );
    }

    #[test]
    fn sts_with_vacuum_inputs_is_epr() {
        let pts = [c(0.3, -0.2), c(-1.1, 0.4), c(0.0, 0.9), c(1.5, 1.5)];
        for r in [0.0, 0.4, 1.3] {
            let p = StsParams::new(1.0, 1.0, r).unwrap();
            for s in [0.0, -0.3, -1.0, -2.5] {
                for &a in &pts {
                    for &b in &pts {
                        let x = q_sts(p, a, b, sm(s)).unwrap();
                        let y = q_epr(r, a, b, sm(s)).unwrap();
                        assert_relative_eq!(x, y, max_relative = 1e-12);
                    }
                    let m = q_sts_marginals(p, a, sm(s), Arm::First).unwrap();
                    assert_relative_eq!(
                        m,
                        q_epr_marginal(r, a, sm(s)).unwrap(),
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn asymmetric_sts_marginals_follow_the_arms() {
        let p = StsParams::new(1.5, 3.0, 0.7).unwrap();
        let st = sts_state(p).unwrap();
        let a = c(0.4, -0.3);
        for s in [-0.2, -1.0, -1.7] {
            let first = q_sts_marginals(p, a, sm(s), Arm::First).unwrap();
            let second = q_sts_marginals(p, a, sm(s), Arm::Second).unwrap();
            assert!((first - second).abs() > 1e-6);
            assert_relative_eq!(
                first,
                q_generic_marginal(&st, &[0], &[a], sm(s)).unwrap(),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                second,
                q_generic_marginal(&st, &[1], &[a], sm(s)).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn generic_matches_closed_forms() {
        let pts = [c(0.3, -0.2), c(-1.1, 0.4), c(0.0, 0.9)];
        for r in [0.3, 1.0, 2.0] {
            let st = epr_state(r).unwrap();
            for s in [-0.5, -1.0, -2.0] {
                for &a in &pts {
                    for &b in &pts {
                        let g = q_generic(&st, &[a, b], sm(s)).unwrap();
                        assert_relative_eq!(
                            g,
                            q_epr(r, a, b, sm(s)).unwrap(),
                            max_relative = 1e-12
                        );
                    }
                }
            }
        }
        let vac = GaussianState::vacuum(1);
        assert_relative_eq!(
            q_generic(&vac, &[c(0.0, 0.0)], sm(-1.0)).unwrap(),
            1.0 / PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn generic_marginal_edge_cases() {
        let st = epr_state(0.5).unwrap();
        let a = c(0.2, 0.1);
        let b = c(-0.4, 0.3);
        assert!(matches!(
            q_generic_marginal(&st, &[], &[], sm(-1.0)),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            q_generic_marginal(&st, &[2], &[a], sm(-1.0)),
            Err(Error::Structural(_))
        ));
        assert!(matches!(
            q_generic_marginal(&st, &[0, 0], &[a, a], sm(-1.0)),
            Err(Error::Structural(_))
        ));
        let all = q_generic_marginal(&st, &[0, 1], &[a, b], sm(-1.0)).unwrap();
        assert_relative_eq!(
            all,
            q_generic(&st, &[a, b], sm(-1.0)).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn kernel_matches_closed_forms() {
        let p = StsParams::new(1.3, 2.1, 0.8).unwrap();
        let st = sts_state(p).unwrap();
        for s in [0.0, -0.6, -1.0, -3.0] {
            let k = TwoModeKernel::new(&st, sm(s)).unwrap();
            for (a, b) in [(c(0.1, 0.2), c(-0.3, 0.5)), (c(1.2, -0.7), c(0.9, 0.9))] {
                assert_relative_eq!(
                    k.joint(a, b),
                    q_sts(p, a, b, sm(s)).unwrap(),
                    max_relative = 1e-12
                );
                assert_relative_eq!(
                    k.marginal(Arm::First, a),
                    q_sts_marginals(p, a, sm(s), Arm::First).unwrap(),
                    max_relative = 1e-12
                );
                assert_relative_eq!(
                    k.marginal(Arm::Second, b),
                    q_sts_marginals(p, b, sm(s), Arm::Second).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn deep_squeezing_far_out_is_finite() {
        let v = q_epr(6.0, c(40.0, 0.0), c(-40.0, 0.0), sm(-0.1)).unwrap();
        assert!(v >= 0.0 && v.is_finite());
        let k = TwoModeKernel::new(&epr_state(3.0).unwrap(), sm(-0.5)).unwrap();
        assert!(k.joint(c(30.0, 0.0), c(30.0, 0.0)).is_finite());
    }

    #[test]
    fn combinators() {
        assert_eq!(c_combinator(Sign::Plus, 0.3, 0.3), 0.6);
        assert_eq!(c_combinator(Sign::Minus, 0.3, 0.3), 0.0);
        let m = q_epr_marginal(1.0, c(0.0, 0.0), sm(-1.0)).unwrap();
        assert_eq!(d_combinator(Sign::Minus, m, m, m, m), 0.0);
        assert_eq!(d_combinator(Sign::Plus, 1.0, 2.0, 3.0, 4.0), 10.0);
    }
}
