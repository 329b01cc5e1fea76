//! Gaussian states described by a covariance matrix and a mean vector.
//!
//! Conventions: quadratures are ordered `(x1, p1, x2, p2, ...)` and scaled so
//! that the vacuum covariance matrix is the identity. A phase-space point
//! `alpha` of one mode maps to the real pair `(2 Re alpha, 2 Im alpha)`.
//! With these conventions the two-mode squeezed vacuum has
//! `cosh 2r` on the diagonal and `+-sinh 2r` on the off-diagonal blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, structural, Error, Result};

/// Tolerance on `max |G - G^T|`, relative to the largest entry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Lowest admissible eigenvalue of `G + i Omega`, per unit of the largest
/// entry of `G` (eigen-solve error grows with the matrix norm, and deep
/// squeezing puts `e^{-2r}` next to entries of size `e^{2r}`).
pub const PSD_TOLERANCE: f64 = -1e-10;
/// Condition numbers above this make phase-space evaluation refuse to run.
pub const MAX_CONDITION: f64 = 1e12;

/// Block-diagonal symplectic form `Omega (+) ... (+) Omega` with
/// `Omega = [[0, 1], [-1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Maps complex phase-space coordinates onto the real quadrature vector.
pub fn quadrature_vector(point: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(
        2 * point.len(),
        point.iter().flat_map(|z| [2.0 * z.re, 2.0 * z.im]),
    )
}

/// An n-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    cov: DMatrix<f64>,
    mean: DVector<f64>,
}

/// Outcome of [`GaussianState::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    /// `max |G - G^T|` divided by `max(1, max |G|)`.
    pub symmetry_defect: f64,
    /// Smallest eigenvalue of the Hermitian matrix `G + i Omega`.
    pub min_eigenvalue: f64,
    pub valid: bool,
}

impl GaussianState {
    /// Assembles a state from raw parts, checking only the shapes.
    pub fn from_parts(cov: DMatrix<f64>, mean: DVector<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || !n.is_multiple_of(2) || cov.ncols() != n {
            return structural(format!(
                "covariance must be 2n x 2n with n >= 1, got {}x{}",
                cov.nrows(),
                cov.ncols()
            ));
        }
        if mean.len() != n {
            return structural(format!(
                "mean has length {}, covariance is {n}x{n}",
                mean.len()
            ));
        }
        Ok(Self { cov, mean })
    }

    /// Zero-mean state with the given covariance, rejected unless it passes
    /// [`GaussianState::validate`].
    pub fn from_covariance(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        let state = Self::from_parts(cov, DVector::zeros(n))?;
        let report = state.validate();
        if !report.valid {
            return domain(format!(
                "not a physical covariance matrix (symmetry defect {:.3e}, min eigenvalue of G+iOmega {:.3e})",
                report.symmetry_defect, report.min_eigenvalue
            ));
        }
        Ok(state)
    }

    /// `n` vacuum modes.
    pub fn vacuum(modes: usize) -> Self {
        Self {
            cov: DMatrix::identity(2 * modes, 2 * modes),
            mean: DVector::zeros(2 * modes),
        }
    }

    pub fn modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn is_zero_mean(&self) -> bool {
        self.mean.iter().all(|&d| d == 0.0)
    }

    /// Checks symmetry and the uncertainty relation `G + i Omega >= 0`.
    pub fn validate(&self) -> ValidityReport {
        let n = self.cov.nrows();
        let scale = self.cov.amax().max(1.0);
        let symmetry_defect = (&self.cov - self.cov.transpose()).amax() / scale;

        // G + i Omega is Hermitian; the real symmetric embedding
        // [[G, -Omega], [Omega, G]] carries each of its eigenvalues twice.
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let omega = symplectic_form(self.modes());
        let mut embed = DMatrix::zeros(2 * n, 2 * n);
        embed.view_mut((0, 0), (n, n)).copy_from(&sym);
        embed.view_mut((n, n), (n, n)).copy_from(&sym);
        embed.view_mut((0, n), (n, n)).copy_from(&(-&omega));
        embed.view_mut((n, 0), (n, n)).copy_from(&omega);
        let min_eigenvalue = SymmetricEigen::new(embed).eigenvalues.min();

        ValidityReport {
            symmetry_defect,
            min_eigenvalue,
            valid: symmetry_defect <= SYMMETRY_TOLERANCE && min_eigenvalue >= PSD_TOLERANCE * scale,
        }
    }

    /// Characteristic function `exp(-u^T G u / 4 + i d^T u)`.
    pub fn characteristic_fn(&self, u: &[f64]) -> Result<Complex64> {
        if u.len() != self.cov.nrows() {
            return structural(format!(
                "argument has length {}, expected {}",
                u.len(),
                self.cov.nrows()
            ));
        }
        let u = DVector::from_column_slice(u);
        let quad = u.dot(&(&self.cov * &u));
        let phase = self.mean.dot(&u);
        Ok(Complex64::from_polar((-0.25 * quad).exp(), phase))
    }

    /// Wigner function at one complex point per mode.
    pub fn wigner(&self, point: &[Complex64]) -> Result<f64> {
        Ok(self.ln_wigner(point)?.exp())
    }

    /// Natural log of [`GaussianState::wigner`].
    pub fn ln_wigner(&self, point: &[Complex64]) -> Result<f64> {
        if !self.is_zero_mean() {
            return Err(Error::Unsupported(
                "phase-space evaluation requires a zero-mean state".into(),
            ));
        }
        ln_gaussian_density(&self.cov, point)
    }
}

/// `ln[ 2^n / (pi^n sqrt(det G)) * exp(-X^T G^{-1} X / 2) ]` for a zero-mean
/// covariance `G` and quadrature vector `X` built from `point`.
pub(crate) fn ln_gaussian_density(cov: &DMatrix<f64>, point: &[Complex64]) -> Result<f64> {
    let dim = cov.nrows();
    if point.len() * 2 != dim {
        return structural(format!(
            "point has {} modes, covariance describes {}",
            point.len(),
            dim / 2
        ));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        return Err(Error::Numeric(format!(
            "covariance is singular or ill-conditioned (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    let x = quadrature_vector(point);
    let y = eig.eigenvectors.transpose() * &x;
    let quad: f64 = y
        .iter()
        .zip(eig.eigenvalues.iter())
        .map(|(yi, li)| yi * yi / li)
        .sum();
    let ln_det: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
    let modes = (dim / 2) as f64;
    Ok(modes * (2.0 / PI).ln() - 0.5 * ln_det - 0.5 * quad)
}

/// Two-mode squeezed vacuum with squeezing `r`.
pub fn epr_state(r: f64) -> Result<GaussianState> {
    if !(r >= 0.0) || !r.is_finite() {
        return domain(format!("squeezing must be finite and >= 0, got {r}"));
    }
    let c = (2.0 * r).cosh();
    let s2 = (2.0 * r).sinh();
    Ok(two_mode_standard_form(c, c, s2, -s2))
}

fn two_mode_standard_form(a: f64, b: f64, c: f64, d: f64) -> GaussianState {
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        a,   0.0, c,   0.0,
        0.0, a,   0.0, d,
        c,   0.0, b,   0.0,
        0.0, d,   0.0, b,
    ]);
    GaussianState {
        cov,
        mean: DVector::zeros(4),
    }
}

/// Parameters of a two-mode squeezed thermal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StsParams {
    /// Thermal variance of the first arm, `2 nbar + 1`.
    pub v1: f64,
    /// Thermal variance of the second arm.
    pub v2: f64,
    /// Squeeze factor.
    pub r: f64,
}

impl StsParams {
    pub fn new(v1: f64, v2: f64, r: f64) -> Result<Self> {
        let p = Self { v1, v2, r };
        p.check()?;
        Ok(p)
    }

    pub fn symmetric(v: f64, r: f64) -> Result<Self> {
        Self::new(v, v, r)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let ok = self.v1.is_finite() && self.v2.is_finite() && self.r.is_finite();
        if !ok || self.v1 < 1.0 || self.v2 < 1.0 || self.r < 0.0 {
            return domain(format!(
                "squeezed thermal parameters need v1, v2 >= 1 and r >= 0, got ({}, {}, {})",
                self.v1, self.v2, self.r
            ));
        }
        Ok(())
    }

    /// Mean thermal photon numbers of the two input modes.
    pub fn mean_photons(&self) -> (f64, f64) {
        ((self.v1 - 1.0) / 2.0, (self.v2 - 1.0) / 2.0)
    }

    /// Covariance entries `(a, b, c)`; the fourth entry is `d = -c`.
    pub fn covariance_entries(&self) -> (f64, f64, f64) {
        let ch2 = self.r.cosh().powi(2);
        let sh2 = self.r.sinh().powi(2);
        let a = self.v1 * ch2 + self.v2 * sh2;
        let b = self.v1 * sh2 + self.v2 * ch2;
        let c = 0.5 * (self.v1 + self.v2) * (2.0 * self.r).sinh();
        (a, b, c)
    }
}

/// Two-mode squeezed thermal state.
pub fn sts_state(p: StsParams) -> Result<GaussianState> {
    p.check()?;
    let (a, b, c) = p.covariance_entries();
    Ok(two_mode_standard_form(a, b, c, -c))
}

/// Separability test for squeezed thermal states:
/// `cosh^2 r <= (v1 + 1)(v2 + 1) / (2 (v1 + v2))`.
pub fn sts_is_separable(p: StsParams) -> bool {
    p.r.cosh().powi(2) <= (p.v1 + 1.0) * (p.v2 + 1.0) / (2.0 * (p.v1 + p.v2))
}
