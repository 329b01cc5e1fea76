//! Family-specific closed forms of `I` and `J`, written out term by term
//! with the `C`/`D` combinators.
//!
//! These expand each source separately (the [`Functional::Factorized`]
//! assembly) and exist to cross-check the general engine in [`crate::bell`].
//!
//! [`Functional::Factorized`]: crate::bell::Functional::Factorized

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::bell::{BellAssignment, BellEvaluation, SourceDisplacements, SourceState};
use crate::error::{structural, Result};
use crate::network::{self, NetworkTopology};
use crate::quasiprob::{
    c_combinator, d_combinator, q_epr, q_epr_marginal, q_generic, q_generic_marginal, q_sts,
    q_sts_marginals, Arm, Sign, Smoothing,
};

/// Network families with a dedicated closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremFamily {
    Chain,
    Star,
    Tree,
    CycleOdd,
    CycleEven,
}

struct Source<'a> {
    state: &'a SourceState,
    s: Smoothing,
}

impl Source<'_> {
    fn q(&self, a: Complex64, b: Complex64) -> Result<f64> {
        match self.state {
            SourceState::Epr { r } => q_epr(*r, a, b, self.s),
            SourceState::Sts(p) => q_sts(*p, a, b, self.s),
            SourceState::Custom(g) => q_generic(g, &[a, b], self.s),
        }
    }

    fn qm(&self, arm: Arm, a: Complex64) -> Result<f64> {
        match self.state {
            SourceState::Epr { r } => q_epr_marginal(*r, a, self.s),
            SourceState::Sts(p) => q_sts_marginals(*p, a, self.s, arm),
            SourceState::Custom(g) => {
                let mode = if arm == Arm::First { 0 } else { 1 };
                q_generic_marginal(g, &[mode], &[a], self.s)
            }
        }
    }

    /// `{ c C(a1,a2,a1',a2') + d D(a1,a2,a1',a2') + e }` with the branch
    /// constants, `e` counting the constant term in units of `s^2` (upper)
    /// or `1` (lower).
    fn bracket(
        &self,
        sign: Sign,
        (a1, a2, a1p, a2p): (Complex64, Complex64, Complex64, Complex64),
        e: f64,
    ) -> Result<f64> {
        let s = self.s.value();
        let cv = c_combinator(sign, self.q(a1, a2)?, self.q(a1p, a2p)?);
        let dv = d_combinator(
            sign,
            self.qm(Arm::First, a1)?,
            self.qm(Arm::Second, a2)?,
            self.qm(Arm::First, a1p)?,
            self.qm(Arm::Second, a2p)?,
        );
        Ok(if self.s.is_upper_branch() {
            PI * PI * (1.0 - s).powi(4) / 4.0 * cv
                + PI * s * (1.0 - s).powi(2) / 2.0 * dv
                + e * s * s
        } else {
            PI * PI * (1.0 - s).powi(2) * cv - PI * (1.0 - s) * dv + e
        })
    }

    /// The halved bracket attached to a source whose two parties are both
    /// outside the independent set.
    fn half_bracket(&self, a1: Complex64, a2: Complex64) -> Result<f64> {
        let s = self.s.value();
        let cv = c_combinator(Sign::Plus, self.q(a1, a2)?, self.q(a1, a2)?);
        let dv = d_combinator(
            Sign::Plus,
            self.qm(Arm::First, a1)?,
            self.qm(Arm::Second, a2)?,
            self.qm(Arm::First, a1)?,
            self.qm(Arm::Second, a2)?,
        );
        Ok(if self.s.is_upper_branch() {
            PI * PI * (1.0 - s).powi(4) / 8.0 * cv + PI * s * (1.0 - s).powi(2) / 4.0 * dv + s * s
        } else {
            PI * PI * (1.0 - s).powi(2) / 2.0 * cv - PI * (1.0 - s) / 2.0 * dv + 1.0
        })
    }
}

/// Source whose first-arm party is in the independent set.
fn first_in_k(src: &Source, d: &SourceDisplacements) -> Result<(f64, f64)> {
    Ok((
        src.bracket(Sign::Plus, (d.a0, d.b0, d.a1, d.b0), 2.0)?,
        src.bracket(Sign::Minus, (d.a0, d.b1, d.a1, d.b1), 0.0)?,
    ))
}

/// Source whose second-arm party is in the independent set.
fn second_in_k(src: &Source, d: &SourceDisplacements) -> Result<(f64, f64)> {
    Ok((
        src.bracket(Sign::Plus, (d.a0, d.b0, d.a0, d.b1), 2.0)?,
        src.bracket(Sign::Minus, (d.a1, d.b0, d.a1, d.b1), 0.0)?,
    ))
}

fn expect_topology(
    topo: &NetworkTopology,
    reference: Result<NetworkTopology>,
    what: &str,
) -> Result<()> {
    match reference {
        Ok(r) if r.sources() == topo.sources() && r.party_count() == topo.party_count() => Ok(()),
        _ => structural(format!("topology does not match the {what} family")),
    }
}

/// Evaluates the closed form for `family` on `topo`.
pub fn theorem_expression(
    family: TheoremFamily,
    topo: &NetworkTopology,
    states: &[SourceState],
    assignment: &BellAssignment,
    s: Smoothing,
) -> Result<BellEvaluation> {
    let y = topo.party_count();
    if states.len() != topo.source_count() || assignment.sources.len() != topo.source_count() {
        return structural("states and assignment must list one entry per source");
    }
    let src = |j: usize| Source {
        state: &states[j],
        s,
    };
    let disp = |j: usize| &assignment.sources[j];

    // (source index, whether its first party is in K)
    let mut terms: Vec<(usize, bool)> = Vec::new();
    let mut special: Option<usize> = None;
    let k;
    match family {
        TheoremFamily::Chain => {
            expect_topology(topo, network::chain(y), "chain")?;
            let (kset, kbar): (Vec<usize>, Vec<usize>) = if y % 2 == 1 {
                ((1..=y).step_by(2).collect(), (2..y).step_by(2).collect())
            } else {
                ((2..=y).step_by(2).collect(), (1..y).step_by(2).collect())
            };
            k = kset.len();
            for &i in &kset[..kset.len() - 1] {
                terms.push((i - 1, true));
            }
            for &j in &kbar {
                terms.push((j - 1, false));
            }
        }
        TheoremFamily::Star => {
            expect_topology(topo, network::star(y), "star")?;
            k = y - 1;
            for j in 1..y {
                terms.push((j - 1, true));
            }
        }
        TheoremFamily::Tree => {
            let Some((m, f)) = topo.tree_shape() else {
                return structural("topology does not match the tree family");
            };
            expect_topology(topo, network::tree(m, f), "tree")?;
            // layer t spans parties (f^(t-1) - 1)/(f - 1) + 1 ..= (f^t - 1)/(f - 1)
            let layer_end = |t: usize| (f.pow(t as u32) - 1) / (f - 1);
            let in_k = |t: usize| {
                if m % 2 == 1 {
                    t % 2 == 1
                } else {
                    t.is_multiple_of(2)
                }
            };
            k = if m % 2 == 1 {
                (f.pow(m as u32 + 1) - 1) / (f * f - 1)
            } else {
                (f.pow(m as u32 + 1) - f) / (f * f - 1)
            };
            for t in 1..m {
                for parent in layer_end(t - 1) + 1..=layer_end(t) {
                    for child in (parent - 1) * f + 2..=parent * f + 1 {
                        terms.push((child - 2, in_k(t)));
                    }
                }
            }
        }
        TheoremFamily::CycleOdd => {
            if y.is_multiple_of(2) {
                return structural("odd-cycle form needs an odd number of parties");
            }
            expect_topology(topo, network::cycle(y), "cycle")?;
            k = (y - 1) / 2;
            for i in (1..=y - 2).step_by(2) {
                terms.push((i - 1, true));
            }
            for j in (2..=y - 3).step_by(2).chain([y]) {
                terms.push((j - 1, false));
            }
            special = Some(y - 2);
        }
        TheoremFamily::CycleEven => {
            if y % 2 == 1 {
                return structural("even-cycle form needs an even number of parties");
            }
            expect_topology(topo, network::cycle(y), "cycle")?;
            k = y / 2;
            for i in (2..=y).step_by(2) {
                terms.push((i - 1, true));
            }
            for j in (1..y).step_by(2) {
                terms.push((j - 1, false));
            }
        }
    }

    let norm = 0.5f64.powi(k as i32);
    let (mut i_val, mut j_val) = (norm, norm);
    for (j, first) in terms {
        let (fi, fj) = if first {
            first_in_k(&src(j), disp(j))?
        } else {
            second_in_k(&src(j), disp(j))?
        };
        i_val *= fi;
        j_val *= fj;
    }
    if let Some(j) = special {
        let d = disp(j);
        i_val *= src(j).half_bracket(d.a0, d.b0)?;
        j_val *= src(j).half_bracket(d.a1, d.b1)?;
    }
    Ok(BellEvaluation::from_ij(i_val, j_val, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{bell_value_with, Functional};
    use crate::gaussian::StsParams;
    use crate::network::{canonical_independent_set, chain, cycle, star, tree};
    use approx::assert_relative_eq;

    fn assignment(n: usize, seed: u64) -> BellAssignment {
        let mut x = seed;
        let p: Vec<f64> = (0..n * 8)
            .map(|_| {
                x = x
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0
            })
            .collect();
        BellAssignment::from_flat(&p).unwrap()
    }

    fn check(family: TheoremFamily, topo: NetworkTopology, state: SourceState, s: f64) {
        let n = topo.source_count();
        let states = vec![state; n];
        let gs: Vec<_> = states.iter().map(|st| st.gaussian().unwrap()).collect();
        let k = canonical_independent_set(&topo).unwrap();
        let s = Smoothing::new(s).unwrap();
        for seed in 0..5 {
            let a = assignment(n, seed);
            let th = theorem_expression(family, &topo, &states, &a, s).unwrap();
            let en = bell_value_with(Functional::Factorized, &topo, &k, &gs, &a, s).unwrap();
            assert_eq!(th.k, en.k);
            assert_relative_eq!(
                th.b_value,
                en.b_value,
                epsilon = 1e-12,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                th.i_value,
                en.i_value,
                epsilon = 1e-12,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                th.j_value,
                en.j_value,
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn chain_star_tree_cycle() {
        check(
            TheoremFamily::Chain,
            chain(6).unwrap(),
            SourceState::Epr { r: 1.0 },
            -1.0,
        );
        check(
            TheoremFamily::Chain,
            chain(5).unwrap(),
            SourceState::Epr { r: 0.4 },
            -0.3,
        );
        let sts = SourceState::Sts(StsParams::symmetric(1.2, 1.0).unwrap());
        check(TheoremFamily::Star, star(6).unwrap(), sts.clone(), -0.5);
        check(TheoremFamily::Tree, tree(3, 2).unwrap(), sts, -1.4);
        check(
            TheoremFamily::Tree,
            tree(2, 3).unwrap(),
            SourceState::Epr { r: 0.9 },
            -0.8,
        );
        check(
            TheoremFamily::CycleOdd,
            cycle(5).unwrap(),
            SourceState::Epr { r: 0.8 },
            -2.0,
        );
        check(
            TheoremFamily::CycleEven,
            cycle(6).unwrap(),
            SourceState::Epr { r: 0.8 },
            -0.6,
        );
    }

    #[test]
    fn asymmetric_sources_keep_arm_order() {
        let st = SourceState::Sts(StsParams::new(1.1, 2.5, 0.6).unwrap());
        check(TheoremFamily::Chain, chain(4).unwrap(), st.clone(), -0.4);
        check(TheoremFamily::CycleOdd, cycle(7).unwrap(), st, -1.5);
    }

    #[test]
    fn mismatched_family_is_structural() {
        let t = chain(5).unwrap();
        let st = vec![SourceState::Epr { r: 0.5 }; 4];
        let a = BellAssignment::zeros(4);
        let s = Smoothing::new(-1.0).unwrap();
        assert!(theorem_expression(TheoremFamily::Star, &t, &st, &a, s).is_err());
        assert!(theorem_expression(TheoremFamily::CycleOdd, &t, &st, &a, s).is_err());
        let c6 = cycle(6).unwrap();
        let st6 = vec![SourceState::Epr { r: 0.5 }; 6];
        assert!(theorem_expression(
            TheoremFamily::CycleOdd,
            &c6,
            &st6,
            &BellAssignment::zeros(6),
            s
        )
        .is_err());
    }
}
