use num_complex::Complex64;
use proptest::prelude::*;

use cvbell::gaussian::{epr_state, sts_state, StsParams};
use cvbell::quasiprob::{
    q_epr, q_epr_marginal, q_generic, q_generic_marginal, q_sts, q_sts_marginals, Arm, Smoothing,
};

fn point() -> impl Strategy<Value = Complex64> {
    (-2.5..2.5f64, -2.5..2.5f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn smoothing() -> impl Strategy<Value = Smoothing> {
    (-3.0..=0.0f64).prop_map(|s| Smoothing::new(s).unwrap())
}

fn sts_params() -> impl Strategy<Value = StsParams> {
    (1.0..3.0f64, 1.0..3.0f64, 0.0..2.0f64)
        .prop_map(|(v1, v2, r)| StsParams::new(v1, v2, r).unwrap())
}

/// Absolute agreement to `tol`, plus relative agreement scaled by the size
/// of the exponent: a generic solve loses about `cond * |ln q|` ulps, and
/// `cond = e^{4r}` stays below 3e3 for the sampled `r <= 2`.
fn close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    let exponent = -scale.ln().min(0.0);
    (a - b).abs() <= tol && (a - b).abs() <= 1e-12 * scale * (1.0 + exponent) * 1e3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn q_positive(p in sts_params(), a in point(), b in point(), s in smoothing()) {
        prop_assert!(q_sts(p, a, b, s).unwrap() >= 0.0);
        prop_assert!(q_epr(p.r, a, b, s).unwrap() >= 0.0);
    }

    #[test]
    fn epr_closed_form_matches_generic(r in 0.0..2.0f64, a in point(), b in point(), s in smoothing()) {
        let g = epr_state(r).unwrap();
        prop_assert!(close(q_epr(r, a, b, s).unwrap(), q_generic(&g, &[a, b], s).unwrap(), 1e-12));
        let m = q_generic_marginal(&g, &[0], &[a], s).unwrap();
        prop_assert!(close(q_epr_marginal(r, a, s).unwrap(), m, 1e-12));
    }

    #[test]
    fn sts_closed_form_matches_generic(p in sts_params(), a in point(), b in point(), s in smoothing()) {
        let g = sts_state(p).unwrap();
        prop_assert!(close(q_sts(p, a, b, s).unwrap(), q_generic(&g, &[a, b], s).unwrap(), 1e-12));
        let m1 = q_generic_marginal(&g, &[0], &[a], s).unwrap();
        let m2 = q_generic_marginal(&g, &[1], &[a], s).unwrap();
        prop_assert!(close(q_sts_marginals(p, a, s, Arm::First).unwrap(), m1, 1e-12));
        prop_assert!(close(q_sts_marginals(p, a, s, Arm::Second).unwrap(), m2, 1e-12));
    }

    #[test]
    fn sts_reduces_to_epr(r in 0.0..2.0f64, a in point(), b in point(), s in smoothing()) {
        let p = StsParams::new(1.0, 1.0, r).unwrap();
        prop_assert!(close(q_sts(p, a, b, s).unwrap(), q_epr(r, a, b, s).unwrap(), 1e-12));
    }

    #[test]
    fn positive_s_is_rejected(s in 1e-9..10.0f64) {
        prop_assert!(Smoothing::new(s).is_err());
    }
}
