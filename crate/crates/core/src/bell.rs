//! The Bell functional `B = |I|^(1/k) + |J|^(1/k)` on depth-2 networks.
//!
//! Every party measures, on each arm it receives, the bounded observable
//! `O(alpha; s)` built from the displaced parity-like operator `Pi(alpha; s)`:
//! `O = (1 - s) Pi + s I` for `-1 < s <= 0` and `O = 2 Pi - I` for `s <= -1`.
//! The expectation of `O(alpha) (x) O(beta)` on a Gaussian source is a fixed
//! combination of the joint and marginal quasiprobability values; that
//! two-point correlator is the only state-dependent input to `I` and `J`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{structural, Error, Result};
use crate::gaussian::{epr_state, sts_state, GaussianState, StsParams};
use crate::network::{classify_parties, IndependentSet, NetworkTopology, PartyClass};
use crate::quasiprob::{Arm, Smoothing, TwoModeKernel};

/// Number of real parameters per source in the flat layout used by the
/// optimizer: `a0, a1, b0, b1`, each as `(re, im)`.
pub const PARAMS_PER_SOURCE: usize = 8;

/// The state emitted by one source.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceState {
    /// Two-mode squeezed vacuum.
    Epr { r: f64 },
    /// Two-mode squeezed thermal state.
    Sts(StsParams),
    /// Any zero-mean (1+1)-mode Gaussian state.
    Custom(GaussianState),
}

impl SourceState {
    pub fn gaussian(&self) -> Result<GaussianState> {
        match self {
            SourceState::Epr { r } => epr_state(*r),
            SourceState::Sts(p) => sts_state(*p),
            SourceState::Custom(g) => {
                if g.modes() != 2 {
                    return structural(format!(
                        "sources must be (1+1)-mode states, got {} modes",
                        g.modes()
                    ));
                }
                Ok(g.clone())
            }
        }
    }

    /// True when swapping the two arms leaves the state unchanged.
    pub fn is_arm_symmetric(&self) -> bool {
        match self {
            SourceState::Epr { .. } => true,
            SourceState::Sts(p) => p.v1 == p.v2,
            SourceState::Custom(_) => false,
        }
    }
}

/// Measurement displacements of one source: `a` on the first arm, `b` on
/// the second, indexed by the receiving party's input bit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SourceDisplacements {
    #[serde(with = "complex_pair")]
    pub a0: Complex64,
    #[serde(with = "complex_pair")]
    pub a1: Complex64,
    #[serde(with = "complex_pair")]
    pub b0: Complex64,
    #[serde(with = "complex_pair")]
    pub b1: Complex64,
}

impl SourceDisplacements {
    pub fn a(&self, x: usize) -> Complex64 {
        if x == 0 {
            self.a0
        } else {
            self.a1
        }
    }

    pub fn b(&self, x: usize) -> Complex64 {
        if x == 0 {
            self.b0
        } else {
            self.b1
        }
    }

    pub fn from_flat(p: &[f64]) -> Self {
        let c = |i: usize| Complex64::new(p[2 * i], p[2 * i + 1]);
        Self {
            a0: c(0),
            a1: c(1),
            b0: c(2),
            b1: c(3),
        }
    }

    pub fn write_flat(&self, out: &mut [f64]) {
        for (i, z) in [self.a0, self.a1, self.b0, self.b1].iter().enumerate() {
            out[2 * i] = z.re;
            out[2 * i + 1] = z.im;
        }
    }

    fn is_finite(&self) -> bool {
        [self.a0, self.a1, self.b0, self.b1]
            .iter()
            .all(|z| z.is_finite())
    }
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, ser: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(de)?;
        Ok(Complex64::new(re, im))
    }
}

/// Displacements for every source, in topology source order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BellAssignment {
    pub sources: Vec<SourceDisplacements>,
}

impl BellAssignment {
    /// All displacements zero.
    pub fn zeros(source_count: usize) -> Self {
        Self {
            sources: vec![SourceDisplacements::default(); source_count],
        }
    }

    pub fn from_flat(p: &[f64]) -> Result<Self> {
        if !p.len().is_multiple_of(PARAMS_PER_SOURCE) {
            return structural(format!(
                "flat assignment length {} is not a multiple of {PARAMS_PER_SOURCE}",
                p.len()
            ));
        }
        Ok(Self {
            sources: p
                .chunks(PARAMS_PER_SOURCE)
                .map(SourceDisplacements::from_flat)
                .collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sources.len() * PARAMS_PER_SOURCE];
        for (d, chunk) in self.sources.iter().zip(out.chunks_mut(PARAMS_PER_SOURCE)) {
            d.write_flat(chunk);
        }
        out
    }
}

/// `I`, `J`, `k` and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellEvaluation {
    #[serde(rename = "I")]
    pub i_value: f64,
    #[serde(rename = "J")]
    pub j_value: f64,
    pub k: usize,
    #[serde(rename = "B")]
    pub b_value: f64,
}

impl BellEvaluation {
    pub fn from_ij(i_value: f64, j_value: f64, k: usize) -> Self {
        let kf = k as f64;
        Self {
            i_value,
            j_value,
            k,
            b_value: i_value.abs().powf(1.0 / kf) + j_value.abs().powf(1.0 / kf),
        }
    }
}

/// Which measurement formula is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `-1 < s <= 0`
    Upper,
    /// `s <= -1`
    Lower,
}

impl Branch {
    pub fn of(s: Smoothing) -> Self {
        if s.is_upper_branch() {
            Branch::Upper
        } else {
            Branch::Lower
        }
    }
}

/// Two-point correlator from the joint value `q` and the marginals `qa`, `qb`
/// with the chosen branch formula. Both agree at `s = -1`.
pub fn two_point_from_q(q: f64, qa: f64, qb: f64, s: f64, branch: Branch) -> f64 {
    let t = 1.0 - s;
    match branch {
        Branch::Upper => PI * PI * t.powi(4) / 4.0 * q + PI * s * t * t / 2.0 * (qa + qb) + s * s,
        Branch::Lower => PI * PI * t * t * q - PI * t * (qa + qb) + 1.0,
    }
}

/// `Tr[(O(alpha) (x) O(beta)) rho]` for a zero-mean (1+1)-mode Gaussian state.
pub fn two_point(
    state: &GaussianState,
    alpha: Complex64,
    beta: Complex64,
    s: Smoothing,
) -> Result<f64> {
    Ok(SourceKernel::new(state, s)?.two_point(alpha, beta))
}

/// A source prepared for repeated correlator evaluation at a fixed `s`.
#[derive(Debug, Clone)]
pub struct SourceKernel {
    q: TwoModeKernel,
    s: f64,
    branch: Branch,
}

impl SourceKernel {
    pub fn new(state: &GaussianState, s: Smoothing) -> Result<Self> {
        Ok(Self {
            q: TwoModeKernel::new(state, s)?,
            s: s.value(),
            branch: Branch::of(s),
        })
    }

    pub fn two_point(&self, alpha: Complex64, beta: Complex64) -> f64 {
        two_point_from_q(
            self.q.joint(alpha, beta),
            self.q.marginal(Arm::First, alpha),
            self.q.marginal(Arm::Second, beta),
            self.s,
            self.branch,
        )
    }

    /// `t[xp][xq]`: correlator with the first-arm party on input `xp` and the
    /// second-arm party on input `xq`.
    pub fn table(&self, d: &SourceDisplacements) -> [[f64; 2]; 2] {
        let ma = [
            self.q.marginal(Arm::First, d.a0),
            self.q.marginal(Arm::First, d.a1),
        ];
        let mb = [
            self.q.marginal(Arm::Second, d.b0),
            self.q.marginal(Arm::Second, d.b1),
        ];
        let mut t = [[0.0; 2]; 2];
        for (xp, row) in t.iter_mut().enumerate() {
            for (xq, e) in row.iter_mut().enumerate() {
                let q = self.q.joint(d.a(xp), d.b(xq));
                *e = two_point_from_q(q, ma[xp], mb[xq], self.s, self.branch);
            }
        }
        t
    }
}

/// Which of the two Bell quantities a factor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    I,
    J,
}

/// How `I` and `J` are assembled from the correlators.
///
/// `Literal` takes the expectation of the products of party observables
/// directly: a party in `K` holding several arms contributes
/// `prod_arms t(x=0) +- prod_arms t(x=1)`. `Factorized` instead expands
/// every source on its own, which counts such a party once per arm; the two
/// agree whenever each party in `K` holds a single arm (stars, `chain(3)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    #[default]
    Literal,
    Factorized,
}

/// Per-source factor of the factorized functional.
pub fn source_factor_from_table(
    t: &[[f64; 2]; 2],
    cp: PartyClass,
    cq: PartyClass,
    which: Which,
) -> Result<f64> {
    use PartyClass::*;
    Ok(match (cp, cq, which) {
        (InK, InK, _) => {
            return Err(Error::Contract(
                "a source cannot feed two parties of the independent set".into(),
            ))
        }
        (InK, NotInK, Which::I) => t[0][0] + t[1][0],
        (InK, NotInK, Which::J) => t[0][1] - t[1][1],
        (NotInK, InK, Which::I) => t[0][0] + t[0][1],
        (NotInK, InK, Which::J) => t[1][0] - t[1][1],
        (NotInK, NotInK, Which::I) => t[0][0],
        (NotInK, NotInK, Which::J) => t[1][1],
    })
}

/// Per-source factor of the factorized functional, for endpoint classes
/// `(cp, cq)` of the first- and second-arm parties.
pub fn source_factor(
    state: &GaussianState,
    disp: &SourceDisplacements,
    cp: PartyClass,
    cq: PartyClass,
    which: Which,
    s: Smoothing,
) -> Result<f64> {
    let t = SourceKernel::new(state, s)?.table(disp);
    source_factor_from_table(&t, cp, cq, which)
}

/// A product kept as `ln |x|` plus sign, so long products neither
/// underflow nor lose precision.
#[derive(Debug, Clone, Copy)]
struct LogProduct {
    ln: f64,
    negative: bool,
}

impl LogProduct {
    fn one() -> Self {
        Self {
            ln: 0.0,
            negative: false,
        }
    }

    fn mul(&mut self, x: f64) {
        self.ln += x.abs().ln();
        self.negative ^= x < 0.0;
    }

    fn value(&self) -> f64 {
        let m = self.ln.exp();
        if self.negative {
            -m
        } else {
            m
        }
    }
}

/// Everything needed to evaluate `B` repeatedly on one network at one `s`.
#[derive(Debug, Clone)]
pub struct BellProblem {
    topo: NetworkTopology,
    k: IndependentSet,
    classes: Vec<PartyClass>,
    kernels: Vec<SourceKernel>,
    functional: Functional,
    /// For each member of `K`: the sources it holds and the arm it holds.
    k_groups: Vec<Vec<(usize, Arm)>>,
    /// Sources with no endpoint in `K`.
    free_sources: Vec<usize>,
}

impl BellProblem {
    pub fn new(
        topo: &NetworkTopology,
        k: &IndependentSet,
        states: &[GaussianState],
        s: Smoothing,
        functional: Functional,
    ) -> Result<Self> {
        if states.len() != topo.source_count() {
            return structural(format!(
                "{} source states given for {} sources",
                states.len(),
                topo.source_count()
            ));
        }
        let classes = classify_parties(topo, k)?;
        let kernels = states
            .iter()
            .map(|st| SourceKernel::new(st, s))
            .collect::<Result<Vec<_>>>()?;
        let mut k_groups = vec![Vec::new(); k.k()];
        let mut free_sources = Vec::new();
        for (j, &(p, q)) in topo.sources().iter().enumerate() {
            if let Ok(g) = k.members().binary_search(&p) {
                k_groups[g].push((j, Arm::First));
            } else if let Ok(g) = k.members().binary_search(&q) {
                k_groups[g].push((j, Arm::Second));
            } else {
                free_sources.push(j);
            }
        }
        Ok(Self {
            topo: topo.clone(),
            k: k.clone(),
            classes,
            kernels,
            functional,
            k_groups,
            free_sources,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topo
    }

    pub fn independent_set(&self) -> &IndependentSet {
        &self.k
    }

    pub fn functional(&self) -> Functional {
        self.functional
    }

    /// Length of the flat parameter vector.
    pub fn dimension(&self) -> usize {
        self.topo.source_count() * PARAMS_PER_SOURCE
    }

    pub fn evaluate(&self, a: &BellAssignment) -> Result<BellEvaluation> {
        if a.sources.len() != self.topo.source_count() {
            return structural(format!(
                "assignment has {} sources, network has {}",
                a.sources.len(),
                self.topo.source_count()
            ));
        }
        if !a.sources.iter().all(SourceDisplacements::is_finite) {
            return Err(Error::Domain("displacements must be finite".into()));
        }
        Ok(self.evaluate_flat(&a.to_flat()))
    }

    /// Evaluates the flat layout of [`BellAssignment::to_flat`]. Panics if
    /// the length is not [`BellProblem::dimension`].
    pub fn evaluate_flat(&self, p: &[f64]) -> BellEvaluation {
        assert_eq!(
            p.len(),
            self.dimension(),
            "flat assignment has the wrong length"
        );
        let tables: Vec<[[f64; 2]; 2]> = self
            .kernels
            .iter()
            .zip(p.chunks(PARAMS_PER_SOURCE))
            .map(|(kern, chunk)| kern.table(&SourceDisplacements::from_flat(chunk)))
            .collect();
        let (mut i, mut j) = (LogProduct::one(), LogProduct::one());
        match self.functional {
            Functional::Literal => {
                for &src in &self.free_sources {
                    i.mul(tables[src][0][0]);
                    j.mul(tables[src][1][1]);
                }
                for group in &self.k_groups {
                    // entry(x_K, x_other) for each held source
                    let at = |x: usize, other: usize| -> f64 {
                        group
                            .iter()
                            .map(|&(src, arm)| match arm {
                                Arm::First => tables[src][x][other],
                                Arm::Second => tables[src][other][x],
                            })
                            .product()
                    };
                    i.mul(at(0, 0) + at(1, 0));
                    j.mul(at(0, 1) - at(1, 1));
                }
            }
            Functional::Factorized => {
                for (src, &(pp, qq)) in self.topo.sources().iter().enumerate() {
                    let (cp, cq) = (self.classes[pp - 1], self.classes[qq - 1]);
                    // classes were checked at construction
                    i.mul(source_factor_from_table(&tables[src], cp, cq, Which::I).unwrap());
                    j.mul(source_factor_from_table(&tables[src], cp, cq, Which::J).unwrap());
                }
            }
        }
        let k = self.k.k();
        let ln2k = k as f64 * std::f64::consts::LN_2;
        i.ln -= ln2k;
        j.ln -= ln2k;
        let kf = k as f64;
        BellEvaluation {
            i_value: i.value(),
            j_value: j.value(),
            k,
            b_value: (i.ln / kf).exp() + (j.ln / kf).exp(),
        }
    }

    /// `B` alone, for optimizers.
    pub fn b_flat(&self, p: &[f64]) -> f64 {
        self.evaluate_flat(p).b_value
    }
}

/// `B` for one assignment with the default functional.
pub fn bell_value(
    topo: &NetworkTopology,
    k: &IndependentSet,
    states: &[GaussianState],
    assignment: &BellAssignment,
    s: Smoothing,
) -> Result<BellEvaluation> {
    bell_value_with(Functional::default(), topo, k, states, assignment, s)
}

/// `B` for one assignment with an explicit functional.
pub fn bell_value_with(
    functional: Functional,
    topo: &NetworkTopology,
    k: &IndependentSet,
    states: &[GaussianState],
    assignment: &BellAssignment,
    s: Smoothing,
) -> Result<BellEvaluation> {
    BellProblem::new(topo, k, states, s, functional)?.evaluate(assignment)
}
