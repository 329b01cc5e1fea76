//! Tensor-product Gauss-Legendre integration over boxes in phase space.
//!
//! Used only to check normalization and marginals of the quasiprobabilities;
//! the library itself marginalizes Gaussians exactly.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use std::num::NonZeroUsize;

use crate::gaussian::GaussianState;
use crate::quasiprob::Smoothing;

/// Nodes per axis used by the verification checks.
pub const DEFAULT_NODES: usize = 96;
/// Half-width of the box, in standard deviations.
pub const BOX_SIGMAS: f64 = 6.0;

/// A one-dimensional rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pairs: Vec<(f64, f64)>,
}

impl Rule {
    pub fn new(nodes: usize) -> Self {
        let n = NonZeroUsize::new(nodes.max(1)).unwrap();
        Rule {
            pairs: GaussLegendre::new(n).as_node_weight_pairs().to_vec(),
        }
    }

    /// Nodes and weights mapped to `[c - h, c + h]`.
    fn mapped(&self, c: f64, h: f64) -> Vec<(f64, f64)> {
        self.pairs
            .iter()
            .map(|&(x, w)| (c + h * x, h * w))
            .collect()
    }

    /// `int f(x_1..x_D) dx` over the box with centers `c` and half-widths `h`.
    pub fn integrate<const D: usize>(
        &self,
        c: [f64; D],
        h: [f64; D],
        mut f: impl FnMut(&[f64; D]) -> f64,
    ) -> f64 {
        let axes: Vec<Vec<(f64, f64)>> = (0..D).map(|i| self.mapped(c[i], h[i])).collect();
        let n = self.pairs.len();
        let mut idx = [0usize; D];
        let mut x = [0.0; D];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for d in 0..D {
                let (xi, wi) = axes[d][idx[d]];
                x[d] = xi;
                w *= wi;
            }
            total += w * f(&x);
            // odometer
            let mut d = D;
            loop {
                if d == 0 {
                    return total;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// Half-widths `6 sigma` for the real and imaginary parts of each mode's
/// phase-space variable under smoothing `s`.
pub fn box_half_widths(state: &GaussianState, s: Smoothing) -> Vec<f64> {
    let cov = state.cov();
    (0..cov.nrows())
        .map(|i| BOX_SIGMAS * ((cov[(i, i)] + s.value().abs()) / 4.0).sqrt())
        .collect()
}

/// `int int f(alpha, beta) d^2alpha d^2beta` over the zero-centred box.
pub fn integrate_two_mode(
    rule: &Rule,
    half: [f64; 4],
    mut f: impl FnMut(Complex64, Complex64) -> f64,
) -> f64 {
    rule.integrate([0.0; 4], half, |x| {
        f(Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]))
    })
}

/// `int f(beta) d^2beta` over the zero-centred box.
pub fn integrate_one_mode(rule: &Rule, half: [f64; 2], mut f: impl FnMut(Complex64) -> f64) -> f64 {
    rule.integrate([0.0; 2], half, |x| f(Complex64::new(x[0], x[1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::epr_state;
    use crate::quasiprob::{q_epr, q_epr_marginal};

    #[test]
    fn gaussian_moments() {
        let rule = Rule::new(40);
        let v = rule.integrate([0.0], [8.0], |x| (-x[0] * x[0] / 2.0).exp());
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let v = rule.integrate([1.0, -1.0], [1.0, 2.0], |x| x[0] * x[1] * x[1]);
        assert!((v - 56.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn epr_marginal_by_quadrature() {
        let s = Smoothing::HUSIMI;
        let h = box_half_widths(&epr_state(0.5).unwrap(), s);
        let a = Complex64::new(0.3, 0.2);
        let v = integrate_one_mode(&Rule::new(DEFAULT_NODES), [h[2], h[3]], |b| {
            q_epr(0.5, a, b, s).unwrap()
        });
        assert!((v - q_epr_marginal(0.5, a, s).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn wigner_normalization_coarse() {
        let g = epr_state(0.5).unwrap();
        let h = box_half_widths(&g, Smoothing::new(0.0).unwrap());
        let v = integrate_two_mode(&Rule::new(24), [h[0], h[1], h[2], h[3]], |a, b| {
            g.wigner(&[a, b]).unwrap()
        });
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }
}
