//! Brute-force reference values in a truncated number basis.
//!
//! Nothing here uses the phase-space closed forms; the oracle builds the
//! displacement, `Pi` and `O` operators as matrices and takes traces against
//! number-basis density operators.
//!
//! Two-mode densities are stored as a mixture of pure states, each confined
//! to one sector of fixed photon-number difference: a component with offset
//! `(p, q)` and amplitudes `a_m` is the vector `sum_m a_m |p + m, q + m>`.
//! Squeezed thermal states are exactly such mixtures, since the two-mode
//! squeeze conserves `n1 - n2`, and traces against `A (x) B` reduce to
//! `sum_{m,m'} a_m a_m' A[p+m, p+m'] B[q+m, q+m']` without forming `A (x) B`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::bell::{BellAssignment, BellEvaluation, Functional, SourceState};
use crate::error::{domain, structural, Error, Result};
use crate::gaussian::StsParams;
use crate::network::{classify_parties, IndependentSet, NetworkTopology, PartyClass};
use crate::quasiprob::{Arm, Smoothing};

/// Smallest supported cutoff.
pub const MIN_CUTOFF: usize = 4;
/// Largest discarded probability a density may carry before construction
/// fails.
pub const TAIL_LIMIT: f64 = 1e-6;

/// A single-mode operator on Fock levels `0..=cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub cutoff: usize,
    pub matrix: DMatrix<Complex64>,
}

impl TruncatedOperator {
    /// Real eigenvalues of the (assumed Hermitian) operator, ascending.
    pub fn hermitian_spectrum(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `max |A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// `<m|D(alpha)|n>` for `m, n <= size - 1`, with `D = exp(alpha a^+ - alpha* a)`,
/// from the associated-Laguerre closed form.
fn displacement_block(alpha: Complex64, size: usize) -> DMatrix<Complex64> {
    let x = alpha.norm_sqr();
    if x == 0.0 {
        return DMatrix::identity(size, size);
    }
    let ln_abs = 0.5 * x.ln();
    let theta = alpha.arg();
    let lf = ln_factorials(size);
    let mut d = DMatrix::zeros(size, size);
    let mut lag = vec![0.0; size];
    for q in 0..size {
        // lag[p] = L_p^(q)(x), p + q < size
        let top = size - q;
        lag[0] = 1.0;
        if top > 1 {
            lag[1] = 1.0 + q as f64 - x;
        }
        for p in 1..top.saturating_sub(1) {
            let pf = p as f64;
            lag[p + 1] = ((2.0 * pf + 1.0 + q as f64 - x) * lag[p] - (pf + q as f64) * lag[p - 1])
                / (pf + 1.0);
        }
        for (p, &l) in lag.iter().enumerate().take(top) {
            if l == 0.0 {
                continue;
            }
            let ln_mag = 0.5 * (lf[p] - lf[p + q]) + q as f64 * ln_abs - 0.5 * x + l.abs().ln();
            let mag = ln_mag.exp() * l.signum();
            // m = p + q, n = p carries alpha^q; the transpose carries (-alpha*)^q
            d[(p + q, p)] = Complex64::from_polar(mag, q as f64 * theta);
            if q > 0 {
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                d[(p, p + q)] = Complex64::from_polar(sign * mag, -(q as f64) * theta);
            }
        }
    }
    d
}

/// Internal summation depth used for `Pi` at a given cutoff.
fn internal_size(alpha: Complex64, cutoff: usize) -> usize {
    cutoff + 41 + (10.0 * alpha.norm_sqr()).ceil() as usize
}

/// `D(alpha)` restricted to levels `0..=cutoff`.
pub fn displacement_matrix(alpha: Complex64, cutoff: usize) -> TruncatedOperator {
    TruncatedOperator {
        cutoff,
        matrix: displacement_block(alpha, cutoff + 1),
    }
}

/// `Pi(alpha; s) = sum_n ((s+1)/(s-1))^n D(alpha)|n><n|D(alpha)^+`, compressed
/// to levels `0..=cutoff`.
pub fn pi_operator(alpha: Complex64, s: Smoothing, cutoff: usize) -> TruncatedOperator {
    let s = s.value();
    let ratio = (s + 1.0) / (s - 1.0);
    let size = internal_size(alpha, cutoff);
    let d = displacement_block(alpha, size);
    let rows = d.rows(0, cutoff + 1);
    let mut scaled = rows.clone_owned();
    let mut w = 1.0;
    for k in 0..size {
        scaled.column_mut(k).scale_mut(w);
        w *= ratio;
    }
    TruncatedOperator {
        cutoff,
        matrix: scaled * rows.adjoint(),
    }
}

/// `O(alpha; s)`: `(1-s) Pi + s I` for `-1 < s <= 0`, `2 Pi - I` for `s <= -1`.
pub fn o_operator(alpha: Complex64, s: Smoothing, cutoff: usize) -> TruncatedOperator {
    let pi = pi_operator(alpha, s, cutoff);
    let id = DMatrix::<Complex64>::identity(cutoff + 1, cutoff + 1);
    let sv = s.value();
    let matrix = if s.is_upper_branch() {
        pi.matrix * Complex64::new(1.0 - sv, 0.0) + id * Complex64::new(sv, 0.0)
    } else {
        pi.matrix * Complex64::new(2.0, 0.0) - id
    };
    TruncatedOperator { cutoff, matrix }
}

/// One pure component of a [`TruncatedDensity`].
#[derive(Debug, Clone, PartialEq)]
pub struct SectorComponent {
    pub weight: f64,
    /// Level offsets `(p, q)` of the two modes.
    pub offset: (usize, usize),
    /// Amplitudes of `|p + m, q + m>`, `m = 0, 1, ...`, all within the cutoff.
    pub amplitudes: Vec<f64>,
}

/// A two-mode density operator on levels `0..=cutoff` per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDensity {
    pub cutoff: usize,
    pub components: Vec<SectorComponent>,
    /// Probability discarded by the truncation.
    pub tail: f64,
}

impl TruncatedDensity {
    pub fn trace(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.amplitudes.iter().map(|a| a * a).sum::<f64>())
            .sum()
    }

    /// Diagonal of the reduced density operator of one arm.
    pub fn partial_trace(&self, keep: Arm) -> Vec<f64> {
        let mut diag = vec![0.0; self.cutoff + 1];
        for c in &self.components {
            let off = if keep == Arm::First {
                c.offset.0
            } else {
                c.offset.1
            };
            for (m, a) in c.amplitudes.iter().enumerate() {
                diag[off + m] += c.weight * a * a;
            }
        }
        diag
    }

    /// Dense matrix on the `(cutoff + 1)^2`-dimensional space, index
    /// `n1 * (cutoff + 1) + n2`. Only sensible for small cutoffs.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.cutoff + 1;
        let mut rho = DMatrix::zeros(dim * dim, dim * dim);
        for c in &self.components {
            let idx = |m: usize| (c.offset.0 + m) * dim + c.offset.1 + m;
            for (m, a) in c.amplitudes.iter().enumerate() {
                for (mp, b) in c.amplitudes.iter().enumerate() {
                    rho[(idx(m), idx(mp))] += c.weight * a * b;
                }
            }
        }
        rho
    }

    /// `Tr[(A (x) B) rho]`.
    pub fn expectation(&self, a: &TruncatedOperator, b: &TruncatedOperator) -> Result<f64> {
        if a.cutoff != self.cutoff || b.cutoff != self.cutoff {
            return structural(format!(
                "operator cutoffs ({}, {}) differ from the density cutoff {}",
                a.cutoff, b.cutoff, self.cutoff
            ));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for c in &self.components {
            let (p, q) = c.offset;
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &am) in c.amplitudes.iter().enumerate() {
                for (mp, &amp) in c.amplitudes.iter().enumerate() {
                    acc += a.matrix[(p + m, p + mp)] * b.matrix[(q + m, q + mp)] * (am * amp);
                }
            }
            total += acc * c.weight;
        }
        Ok(total.re)
    }

    /// `Tr[A rho_arm]`.
    pub fn expectation_one(&self, arm: Arm, a: &TruncatedOperator) -> Result<f64> {
        if a.cutoff != self.cutoff {
            return structural(format!(
                "operator cutoff {} differs from the density cutoff {}",
                a.cutoff, self.cutoff
            ));
        }
        Ok(self
            .partial_trace(arm)
            .iter()
            .enumerate()
            .map(|(n, w)| w * a.matrix[(n, n)].re)
            .sum())
    }
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < MIN_CUTOFF {
        return domain(format!(
            "cutoff must be at least {MIN_CUTOFF}, got {cutoff}"
        ));
    }
    Ok(())
}

fn insufficient(tail: f64, cutoff: usize, suggested: usize) -> Error {
    Error::Resource(format!(
        "cutoff {cutoff} discards probability {tail:.3e} (limit {TAIL_LIMIT:.0e}); try cutoff {suggested}"
    ))
}

/// Smallest cutoff `N` with `tanh^(2(N+1)) r < tol`.
pub fn epr_cutoff(r: f64, tol: f64) -> usize {
    let t = r.tanh();
    if t == 0.0 {
        return MIN_CUTOFF;
    }
    let n = (tol.ln() / (2.0 * t.ln())).ceil() as usize;
    n.max(MIN_CUTOFF)
}

/// Cutoff for squeezed thermal states: the squeezed-vacuum estimate plus
/// room for the thermal photons, checked afterwards against the measured
/// tail.
pub fn sts_cutoff(p: StsParams, tol: f64) -> usize {
    let (n1, n2) = p.mean_photons();
    let nbar = n1.max(n2);
    let thermal = if nbar > 0.0 {
        (tol.ln() / (nbar / (nbar + 1.0)).ln()).ceil() as usize
    } else {
        0
    };
    epr_cutoff(p.r, tol) + 2 * thermal + 10
}

/// Two-mode squeezed vacuum `sech r sum_n tanh^n r |n, n>`.
pub fn epr_density(r: f64, cutoff: usize) -> Result<TruncatedDensity> {
    if !(r >= 0.0) || !r.is_finite() {
        return domain(format!("squeezing must be finite and >= 0, got {r}"));
    }
    check_cutoff(cutoff)?;
    let (sech, t) = (1.0 / r.cosh(), r.tanh());
    let amplitudes: Vec<f64> = (0..=cutoff).map(|n| sech * t.powi(n as i32)).collect();
    let tail = t.powi(2 * (cutoff as i32 + 1));
    if tail > TAIL_LIMIT {
        return Err(insufficient(tail, cutoff, epr_cutoff(r, 1e-16)));
    }
    Ok(TruncatedDensity {
        cutoff,
        components: vec![SectorComponent {
            weight: 1.0,
            offset: (0, 0),
            amplitudes,
        }],
        tail,
    })
}

/// Squeezed thermal state: the two-mode squeeze applied to a product of
/// thermal states. Each sector's squeeze is exponentiated at
/// `cutoff + margin` levels and then truncated.
pub fn sts_density(p: StsParams, cutoff: usize) -> Result<TruncatedDensity> {
    p.check()?;
    check_cutoff(cutoff)?;
    let margin = 10.max(cutoff / 4);
    let (n1, n2) = p.mean_photons();
    let thermal = |nbar: f64| -> Vec<f64> {
        // weights until the remaining mass is negligible
        let ratio = nbar / (nbar + 1.0);
        let mut w = vec![1.0 / (nbar + 1.0)];
        while ratio > 0.0 && *w.last().unwrap() * ratio / (1.0 - ratio) > 1e-18 && w.len() <= cutoff
        {
            w.push(w.last().unwrap() * ratio);
        }
        w
    };
    let (w1, w2) = (thermal(n1), thermal(n2));
    let thermal_tail =
        (1.0 - w1.iter().sum::<f64>()).max(0.0) + (1.0 - w2.iter().sum::<f64>()).max(0.0);

    let mut components = Vec::new();
    let mut tail = thermal_tail;
    let big = cutoff + margin;
    let lo = -(w2.len() as i64 - 1);
    let hi = w1.len() as i64 - 1;
    for d in lo..=hi {
        let (po, qo) = if d >= 0 {
            (d as usize, 0)
        } else {
            (0, (-d) as usize)
        };
        let len = big + 1 - po.max(qo);
        // generator a1^+ a2^+ - a1 a2 within the sector, times r
        let mut g = DMatrix::<f64>::zeros(len, len);
        for m in 0..len - 1 {
            let e = p.r * (((po + m + 1) * (qo + m + 1)) as f64).sqrt();
            g[(m + 1, m)] = e;
            g[(m, m + 1)] = -e;
        }
        let u = g.exp();
        let keep = cutoff + 1 - po.max(qo);
        for m0 in 0..len {
            let (j1, j2) = (po + m0, qo + m0);
            if j1 >= w1.len() || j2 >= w2.len() {
                break;
            }
            let weight = w1[j1] * w2[j2];
            let col = u.column(m0);
            let amplitudes: Vec<f64> = col.iter().take(keep).copied().collect();
            let lost: f64 = col.iter().skip(keep).map(|a| a * a).sum();
            tail += weight * lost;
            components.push(SectorComponent {
                weight,
                offset: (po, qo),
                amplitudes,
            });
        }
    }
    if tail > TAIL_LIMIT {
        return Err(insufficient(tail, cutoff, sts_cutoff(p, 1e-16)));
    }
    Ok(TruncatedDensity {
        cutoff,
        components,
        tail,
    })
}

/// Density for a named source at the given cutoff.
pub fn source_density(state: &SourceState, cutoff: usize) -> Result<TruncatedDensity> {
    match state {
        SourceState::Epr { r } => epr_density(*r, cutoff),
        SourceState::Sts(p) => sts_density(*p, cutoff),
        SourceState::Custom(_) => Err(Error::Unsupported(
            "the number-basis oracle handles EPR and squeezed thermal sources only".into(),
        )),
    }
}

/// Cutoff meeting `tol` for a named source.
pub fn suggested_cutoff(state: &SourceState, tol: f64) -> usize {
    match state {
        SourceState::Epr { r } => epr_cutoff(*r, tol),
        SourceState::Sts(p) => sts_cutoff(*p, tol),
        SourceState::Custom(_) => MIN_CUTOFF,
    }
}

/// `Tr[(O(alpha) (x) O(beta)) rho]`.
pub fn two_point_trace(
    rho: &TruncatedDensity,
    alpha: Complex64,
    beta: Complex64,
    s: Smoothing,
) -> Result<f64> {
    let a = o_operator(alpha, s, rho.cutoff);
    let b = o_operator(beta, s, rho.cutoff);
    rho.expectation(&a, &b)
}

/// `(2 / (pi (1 - s)))^2 Tr[(Pi(alpha) (x) Pi(beta)) rho]`.
pub fn q_oracle(
    rho: &TruncatedDensity,
    alpha: Complex64,
    beta: Complex64,
    s: Smoothing,
) -> Result<f64> {
    let a = pi_operator(alpha, s, rho.cutoff);
    let b = pi_operator(beta, s, rho.cutoff);
    let c = 2.0 / (PI * (1.0 - s.value()));
    Ok(c * c * rho.expectation(&a, &b)?)
}

/// `2 / (pi (1 - s)) Tr[Pi(alpha) rho_arm]`.
pub fn q_oracle_marginal(
    rho: &TruncatedDensity,
    arm: Arm,
    alpha: Complex64,
    s: Smoothing,
) -> Result<f64> {
    let a = pi_operator(alpha, s, rho.cutoff);
    Ok(2.0 / (PI * (1.0 - s.value())) * rho.expectation_one(arm, &a)?)
}

/// `I`, `J` and `B` from number-basis correlators, summing over every
/// joint setting of the parties in `K` rather than factoring by source.
pub fn oracle_functional(
    functional: Functional,
    topo: &NetworkTopology,
    k: &IndependentSet,
    densities: &[TruncatedDensity],
    assignment: &BellAssignment,
    s: Smoothing,
) -> Result<BellEvaluation> {
    let z = topo.source_count();
    if densities.len() != z || assignment.sources.len() != z {
        return structural("densities and assignment must list one entry per source");
    }
    let classes = classify_parties(topo, k)?;
    if k.k() > 20 {
        return Err(Error::Resource(
            "setting enumeration is capped at k = 20".into(),
        ));
    }
    // t[j][xp][xq]
    let mut t = vec![[[0.0; 2]; 2]; z];
    for (j, rho) in densities.iter().enumerate() {
        let d = &assignment.sources[j];
        for (xp, row) in t[j].iter_mut().enumerate() {
            for (xq, e) in row.iter_mut().enumerate() {
                *e = two_point_trace(rho, d.a(xp), d.b(xq), s)?;
            }
        }
    }
    let kk = k.k();
    let norm = 0.5f64.powi(kk as i32);
    let (i_value, j_value) = match functional {
        Functional::Literal => {
            let mut i_sum = 0.0;
            let mut j_sum = 0.0;
            let mut x = vec![0usize; topo.party_count() + 1];
            for bits in 0u32..(1 << kk) {
                for (g, &party) in k.members().iter().enumerate() {
                    x[party] = (bits >> g & 1) as usize;
                }
                let sign = if bits.count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                for (other, acc, sgn) in [(0usize, &mut i_sum, 1.0), (1, &mut j_sum, sign)] {
                    let setting = |party: usize| {
                        if classes[party - 1] == PartyClass::InK {
                            x[party]
                        } else {
                            other
                        }
                    };
                    let prod: f64 = topo
                        .sources()
                        .iter()
                        .enumerate()
                        .map(|(j, &(p, q))| t[j][setting(p)][setting(q)])
                        .product();
                    *acc += sgn * prod;
                }
            }
            (norm * i_sum, norm * j_sum)
        }
        Functional::Factorized => {
            let (mut i_p, mut j_p) = (norm, norm);
            for (j, &(p, q)) in topo.sources().iter().enumerate() {
                let (cp, cq) = (classes[p - 1], classes[q - 1]);
                i_p *= crate::bell::source_factor_from_table(&t[j], cp, cq, crate::bell::Which::I)?;
                j_p *= crate::bell::source_factor_from_table(&t[j], cp, cq, crate::bell::Which::J)?;
            }
            (i_p, j_p)
        }
    };
    Ok(BellEvaluation::from_ij(i_value, j_value, kk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasiprob::{q_epr, q_epr_marginal, q_sts, q_sts_marginals};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sm(s: f64) -> Smoothing {
        Smoothing::new(s).unwrap()
    }

    #[test]
    fn displacement_basics() {
        let id = displacement_matrix(c(0.0, 0.0), 10);
        assert_eq!(id.matrix, DMatrix::identity(11, 11));
        let d = displacement_matrix(c(1.0, 0.0), 20);
        assert_relative_eq!(d.matrix[(0, 0)].re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(d.matrix[(0, 0)].re, 0.60653, epsilon = 1e-5);
    }

    #[test]
    fn displacement_is_unitary_on_low_block() {
        for alpha in [c(0.3, 0.4), c(-1.2, 0.9), c(2.0, 0.0), c(0.0, -2.0)] {
            let d = displacement_matrix(alpha, 100).matrix;
            let prod = d.adjoint() * &d;
            for i in 0..30 {
                for j in 0..30 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((prod[(i, j)] - e).norm() < 1e-10, "{alpha} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn displacement_matches_generator_exponential() {
        let alpha = c(0.7, -0.4);
        let size = 81;
        let mut gen = DMatrix::<Complex64>::zeros(size, size);
        for n in 0..size - 1 {
            let e = ((n + 1) as f64).sqrt();
            gen[(n + 1, n)] = alpha * e;
            gen[(n, n + 1)] = -alpha.conj() * e;
        }
        let ex = gen.exp();
        let d = displacement_matrix(alpha, 80).matrix;
        for i in 0..30 {
            for j in 0..30 {
                assert!((ex[(i, j)] - d[(i, j)]).norm() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn operators_at_origin() {
        let pi = pi_operator(c(0.0, 0.0), sm(-1.0), 8);
        let mut expect = DMatrix::<Complex64>::zeros(9, 9);
        expect[(0, 0)] = c(1.0, 0.0);
        assert!((pi.matrix - expect).iter().all(|z| z.norm() < 1e-15));
        let o = o_operator(c(0.0, 0.0), sm(-1.0), 8);
        for n in 0..9 {
            let e = if n == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(o.matrix[(n, n)].re, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn o_spectrum_is_bounded() {
        let o = o_operator(c(0.7, 0.0), sm(-0.5), 60);
        assert!(o.hermiticity_defect() < 1e-12);
        let ev = o.hermitian_spectrum();
        assert!(ev.iter().all(|&e| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&e)));
        assert!((ev.last().unwrap() - 1.0).abs() < 1e-9);
        for s in [0.0, -0.3, -1.0, -2.5] {
            let o = o_operator(c(-0.4, 1.1), sm(s), 40);
            assert!(o
                .hermitian_spectrum()
                .iter()
                .all(|&e| e.abs() <= 1.0 + 1e-9));
        }
    }

    #[test]
    fn epr_density_properties() {
        let vac = epr_density(0.0, 6).unwrap();
        assert_eq!(vac.components[0].amplitudes[0], 1.0);
        assert!(vac.components[0].amplitudes[1..].iter().all(|&a| a == 0.0));
        let rho = epr_density(1.0, 40).unwrap();
        let t82 = 1.0f64.tanh().powi(82);
        assert_relative_eq!(rho.trace(), 1.0 - t82, epsilon = 1e-14);
        assert!(t82 > 1e-10 && t82 < 3e-10);
        assert!(matches!(epr_density(1.0, 6), Err(Error::Resource(_))));
        assert!(matches!(epr_density(1.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn dense_form_is_a_density() {
        let rho = sts_density(StsParams::new(1.4, 1.2, 0.3).unwrap(), 12).unwrap();
        let dense = rho.to_dense();
        assert!((&dense - dense.transpose()).amax() < 1e-15);
        let ev = SymmetricEigen::new(dense.clone()).eigenvalues;
        assert!(ev.min() > -1e-10);
        assert_relative_eq!(dense.trace(), rho.trace(), epsilon = 1e-12);
        assert!(rho.trace() <= 1.0 + 1e-12 && rho.trace() >= 1.0 - rho.tail - 1e-12);
    }

    #[test]
    fn sts_with_vacuum_inputs_is_epr() {
        for r in [0.2, 0.6, 1.0] {
            let a = sts_density(StsParams::new(1.0, 1.0, r).unwrap(), 50).unwrap();
            let b = epr_density(r, 50).unwrap();
            assert_eq!(a.components.len(), 1);
            let (x, y) = (&a.components[0].amplitudes, &b.components[0].amplitudes);
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn epr_marginal_is_thermal() {
        let r = 0.8;
        let rho = epr_density(r, 80).unwrap();
        let diag = rho.partial_trace(Arm::Second);
        let (sech2, t2) = (1.0 / r.cosh().powi(2), r.tanh().powi(2));
        for (n, p) in diag.iter().enumerate() {
            assert_relative_eq!(*p, sech2 * t2.powi(n as i32), epsilon = 1e-15);
        }
        let a = c(0.3, 0.5);
        let q = q_oracle_marginal(&rho, Arm::First, a, sm(-0.6)).unwrap();
        assert_relative_eq!(q, q_epr_marginal(r, a, sm(-0.6)).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn q_oracle_reproduces_closed_forms() {
        let rho = epr_density(1.0, 60).unwrap();
        let one = c(1.0, 0.0);
        let q = q_oracle(&rho, one, one, sm(-1.0)).unwrap();
        assert_relative_eq!(q, q_epr(1.0, one, one, sm(-1.0)).unwrap(), epsilon = 1e-8);
        assert_relative_eq!(q, 0.0264147, epsilon = 1e-7);

        let p = StsParams::new(1.2, 1.5, 0.6).unwrap();
        let rho = sts_density(p, sts_cutoff(p, 1e-16)).unwrap();
        let (a, b) = (c(0.4, -0.2), c(-0.3, 0.6));
        for s in [-0.2, -1.0, -2.0] {
            let q = q_oracle(&rho, a, b, sm(s)).unwrap();
            assert_relative_eq!(q, q_sts(p, a, b, sm(s)).unwrap(), epsilon = 1e-8);
            let m = q_oracle_marginal(&rho, Arm::Second, b, sm(s)).unwrap();
            assert_relative_eq!(
                m,
                q_sts_marginals(p, b, sm(s), Arm::Second).unwrap(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn two_point_trace_values() {
        let z = c(0.0, 0.0);
        let vac = epr_density(0.0, 10).unwrap();
        assert_relative_eq!(
            two_point_trace(&vac, z, z, sm(-1.0)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        for r in [0.3, 1.0] {
            let rho = epr_density(r, 60).unwrap();
            assert_relative_eq!(
                two_point_trace(&rho, z, z, sm(-1.0)).unwrap(),
                1.0,
                epsilon = 1e-9
            );
        }
        let rho = epr_density(1.0, 60).unwrap();
        let h = c(0.5, 0.0);
        let g = crate::gaussian::epr_state(1.0).unwrap();
        let closed = crate::bell::two_point(&g, h, h, sm(-1.0)).unwrap();
        assert_relative_eq!(
            two_point_trace(&rho, h, h, sm(-1.0)).unwrap(),
            closed,
            epsilon = 1e-8
        );
    }

    #[test]
    fn cutoff_mismatch_is_structural() {
        let rho = epr_density(0.5, 30).unwrap();
        let a = o_operator(c(0.1, 0.0), sm(-1.0), 20);
        assert!(matches!(rho.expectation(&a, &a), Err(Error::Structural(_))));
    }

    #[test]
    fn oracle_functionals_match_engine() {
        use crate::network::{canonical_independent_set, cycle};
        let t = cycle(5).unwrap();
        let k = canonical_independent_set(&t).unwrap();
        let r = 0.4;
        let st = vec![crate::gaussian::epr_state(r).unwrap(); 5];
        let rho = vec![epr_density(r, epr_cutoff(r, 1e-16)).unwrap(); 5];
        let p: Vec<f64> = (0..40)
            .map(|i| ((i * 7 % 13) as f64 - 6.0) / 10.0)
            .collect();
        let a = BellAssignment::from_flat(&p).unwrap();
        for f in [Functional::Literal, Functional::Factorized] {
            for s in [-0.5, -1.3] {
                let e = crate::bell::bell_value_with(f, &t, &k, &st, &a, sm(s)).unwrap();
                let o = oracle_functional(f, &t, &k, &rho, &a, sm(s)).unwrap();
                assert_relative_eq!(e.i_value, o.i_value, epsilon = 1e-8);
                assert_relative_eq!(e.j_value, o.j_value, epsilon = 1e-8);
            }
        }
    }
}
