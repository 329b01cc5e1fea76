//! Maximizing `B` over the measurement displacements.
//!
//! Each restart runs a bounded Nelder-Mead simplex search with the
//! dimension-adaptive coefficients of Gao and Han. Restarts are independent
//! and run on the rayon pool; each draws from its own ChaCha stream, so the
//! result depends only on the seed and not on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{
    BellAssignment, BellEvaluation, BellProblem, Functional, SourceState, PARAMS_PER_SOURCE,
};
use crate::error::{domain, Result};
use crate::gaussian::{GaussianState, StsParams};
use crate::network::{IndependentSet, NetworkTopology};
use crate::quasiprob::Smoothing;

/// Standard deviations of the Gaussian starting points, cycled over restarts.
const START_SCALES: [f64; 4] = [0.05, 0.2, 0.5, 1.0];

/// Search space for the displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    /// Independent displacements for every source. The search first runs the
    /// `SymmetricSources` stage and then refines in the full space.
    #[default]
    Full,
    /// One set of four displacements shared by every source.
    SymmetricSources,
    /// Shared displacements restricted to the real axis.
    RealOnly,
}

impl std::str::FromStr for Ansatz {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Ansatz::Full),
            "symmetric_sources" | "symmetric" => Ok(Ansatz::SymmetricSources),
            "real_only" | "real" => Ok(Ansatz::RealOnly),
            other => Err(crate::Error::Structural(format!(
                "unknown ansatz `{other}` (expected full, symmetric_sources or real_only)"
            ))),
        }
    }
}

impl std::fmt::Display for Ansatz {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ansatz::Full => "full",
            Ansatz::SymmetricSources => "symmetric_sources",
            Ansatz::RealOnly => "real_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Objective evaluations allowed per restart.
    pub eval_budget: usize,
    /// Convergence threshold on the spread of simplex values.
    pub tolerance: f64,
    /// Bound on every real and imaginary part of every displacement.
    pub box_radius: f64,
    pub seed: u64,
    pub ansatz: Ansatz,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            eval_budget: 20_000,
            tolerance: 1e-10,
            box_radius: 3.0,
            seed: 1,
            ansatz: Ansatz::Full,
        }
    }
}

impl OptimizerConfig {
    pub fn check(&self) -> Result<()> {
        if self.restarts == 0 {
            return domain("restarts must be at least 1");
        }
        if self.eval_budget == 0 {
            return domain("evaluation budget must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return domain(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            ));
        }
        if !(self.box_radius > 0.0) || !self.box_radius.is_finite() {
            return domain(format!(
                "box radius must be positive, got {}",
                self.box_radius
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupremumResult {
    pub best: BellEvaluation,
    pub argmax: BellAssignment,
    pub restarts_run: usize,
    pub evals_used: usize,
    pub per_restart_best: Vec<f64>,
    /// True when some coordinate of the argmax sits on the search box.
    pub boundary_hit: bool,
}

/// Maps the reduced parameters of an ansatz to the flat per-source layout.
fn expand(ansatz: Ansatz, theta: &[f64], sources: usize, out: &mut [f64]) {
    match ansatz {
        Ansatz::Full => out.copy_from_slice(theta),
        Ansatz::SymmetricSources => {
            for chunk in out.chunks_mut(PARAMS_PER_SOURCE) {
                chunk.copy_from_slice(theta);
            }
        }
        Ansatz::RealOnly => {
            for chunk in out.chunks_mut(PARAMS_PER_SOURCE) {
                for (i, &t) in theta.iter().enumerate() {
                    chunk[2 * i] = t;
                    chunk[2 * i + 1] = 0.0;
                }
            }
        }
    }
    debug_assert_eq!(out.len(), sources * PARAMS_PER_SOURCE);
}

fn reduced_dim(ansatz: Ansatz, sources: usize) -> usize {
    match ansatz {
        Ansatz::Full => sources * PARAMS_PER_SOURCE,
        Ansatz::SymmetricSources => PARAMS_PER_SOURCE,
        Ansatz::RealOnly => PARAMS_PER_SOURCE / 2,
    }
}

struct RunOutcome {
    x: Vec<f64>,
    value: f64,
    evals: usize,
}

/// Bounded Nelder-Mead maximization of `f` from `x0`. Candidates are
/// clamped to `[-radius, radius]`. After convergence the simplex is rebuilt
/// around the incumbent and the search continues until a rebuild no longer
/// improves the value.
fn nelder_mead_max(
    f: &dyn Fn(&[f64]) -> f64,
    x0: Vec<f64>,
    step: f64,
    budget: usize,
    ftol: f64,
    radius: f64,
) -> RunOutcome {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma) = (1.0, 1.0 + 2.0 / nf);
    let (rho, sigma) = (0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let xtol = ftol.sqrt();
    let clamp = |v: &mut Vec<f64>| v.iter_mut().for_each(|c| *c = c.clamp(-radius, radius));

    let mut evals = 0usize;
    // past the budget every probe is rejected, which ends the search
    let eval = |x: &[f64], evals: &mut usize| {
        if *evals >= budget {
            return f64::INFINITY;
        }
        *evals += 1;
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = x0;
    clamp(&mut best_x);
    let mut best_f = eval(&best_x, &mut evals);

    loop {
        let start_f = best_f;
        // simplex of (point, value), kept sorted ascending by value
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_f));
        for i in 0..n {
            if evals >= budget {
                break;
            }
            let mut v = best_x.clone();
            v[i] += if v[i] + step <= radius { step } else { -step };
            clamp(&mut v);
            let fv = eval(&v, &mut evals);
            simplex.push((v, fv));
        }
        if simplex.len() < n + 1 {
            break;
        }

        while evals < budget {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(v, _)| {
                    v.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if spread <= ftol && diameter <= xtol {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                clamp(&mut p);
                p
            };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let outside = fr < simplex[n].1;
                let xc = along(if outside { rho } else { -rho });
                let fc = eval(&xc, &mut evals);
                if (outside && fc <= fr) || (!outside && fc < simplex[n].1) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for (v, fv) in simplex[1..].iter_mut() {
                        for (c, b) in v.iter_mut().zip(&x_best) {
                            *c = b + sigma * (*c - b);
                        }
                        *fv = eval(v, &mut evals);
                        if evals >= budget {
                            break;
                        }
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_f {
            best_f = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        if evals >= budget || start_f - best_f <= ftol {
            break;
        }
    }
    RunOutcome {
        x: best_x,
        value: -best_f,
        evals,
    }
}

fn stream_rng(seed: u64, stage: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stage << 32) | restart as u64);
    rng
}

fn random_start(rng: &mut ChaCha8Rng, dim: usize, class: usize, radius: f64) -> Vec<f64> {
    match START_SCALES.get(class % (START_SCALES.len() + 1)) {
        Some(&sd) => {
            let normal = Normal::new(0.0, sd).expect("positive scale");
            (0..dim).map(|_| normal.sample(rng)).collect()
        }
        None => (0..dim)
            .map(|_| rng.random_range(-radius..=radius))
            .collect(),
    }
}

/// Runs one stage of restarts in the reduced space of `ansatz`.
fn run_stage(
    problem: &BellProblem,
    config: &OptimizerConfig,
    ansatz: Ansatz,
    stage: u64,
    start: &(dyn Fn(usize, &mut ChaCha8Rng) -> Vec<f64> + Sync),
) -> Vec<RunOutcome> {
    let z = problem.topology().source_count();
    let objective = |theta: &[f64]| {
        let mut flat = vec![0.0; problem.dimension()];
        expand(ansatz, theta, z, &mut flat);
        problem.b_flat(&flat)
    };
    (0..config.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, stage, i);
            let x0 = start(i, &mut rng);
            let mut out = nelder_mead_max(
                &objective,
                x0,
                0.2,
                config.eval_budget,
                config.tolerance,
                config.box_radius,
            );
            let mut flat = vec![0.0; problem.dimension()];
            expand(ansatz, &out.x, z, &mut flat);
            out.x = flat;
            out
        })
        .collect()
}

/// Supremum of `B` for a prepared problem.
pub fn supremum(problem: &BellProblem, config: &OptimizerConfig) -> Result<SupremumResult> {
    config.check()?;
    let z = problem.topology().source_count();
    let radius = config.box_radius;
    let shared = if config.ansatz == Ansatz::RealOnly {
        Ansatz::RealOnly
    } else {
        Ansatz::SymmetricSources
    };
    let dim = reduced_dim(shared, z);
    let mut outcomes = run_stage(problem, config, shared, 0, &|i, rng| {
        random_start(rng, dim, i, radius)
    });

    if config.ansatz == Ansatz::Full && z > 1 {
        let seed_x = outcomes
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .map(|o| o.x.clone())
            .expect("at least one restart");
        let full_dim = reduced_dim(Ansatz::Full, z);
        let jitter = Normal::new(0.0, 0.05).expect("positive scale");
        let refined = run_stage(problem, config, Ansatz::Full, 1, &|i, rng| {
            if i % 2 == 0 {
                let mut x = seed_x.clone();
                if i > 0 {
                    x.iter_mut().for_each(|c| *c += jitter.sample(rng));
                }
                x
            } else {
                random_start(rng, full_dim, i / 2, radius)
            }
        });
        outcomes.extend(refined);
    }

    let per_restart_best: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let evals_used = outcomes.iter().map(|o| o.evals).sum();
    let winner = outcomes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value).then(b.0.cmp(&a.0)))
        .map(|(_, o)| o)
        .expect("at least one restart");
    let best = problem.evaluate_flat(&winner.x);
    let boundary_hit = winner.x.iter().any(|c| c.abs() >= radius * (1.0 - 1e-9));
    Ok(SupremumResult {
        best,
        argmax: BellAssignment::from_flat(&winner.x)?,
        restarts_run: outcomes.len(),
        evals_used,
        per_restart_best,
        boundary_hit,
    })
}

/// Supremum of `B` over all displacements, with the default functional.
pub fn supremum_b(
    topo: &NetworkTopology,
    k: &IndependentSet,
    states: &[GaussianState],
    s: Smoothing,
    config: &OptimizerConfig,
) -> Result<SupremumResult> {
    let problem = BellProblem::new(topo, k, states, s, Functional::default())?;
    supremum(&problem, config)
}

/// One-parameter source families for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceFamily {
    Epr,
    Sts { v1: f64, v2: f64 },
}

impl SourceFamily {
    pub fn state(&self, r: f64) -> Result<SourceState> {
        Ok(match *self {
            SourceFamily::Epr => {
                crate::gaussian::epr_state(r)?;
                SourceState::Epr { r }
            }
            SourceFamily::Sts { v1, v2 } => SourceState::Sts(StsParams::new(v1, v2, r)?),
        })
    }
}

/// A grid of `(s, r1, r2)` cells on one network.
///
/// With `r2 = None` every source gets squeezing `r1`; otherwise the first
/// source gets `r1` and all others `r2`.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub topology: NetworkTopology,
    pub k: IndependentSet,
    pub source: SourceFamily,
    pub s_values: Vec<f64>,
    pub r_values: Vec<(f64, Option<f64>)>,
    pub functional: Functional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub s: f64,
    pub r1: f64,
    pub r2: Option<f64>,
    pub result: SupremumResult,
}

impl SweepSpec {
    pub fn states(&self, r1: f64, r2: Option<f64>) -> Result<Vec<SourceState>> {
        (0..self.topology.source_count())
            .map(|j| {
                self.source
                    .state(if j == 0 { r1 } else { r2.unwrap_or(r1) })
            })
            .collect()
    }
}

/// Runs [`supremum`] on every cell; rows are sorted by `(s, r1, r2)`.
pub fn sweep(spec: &SweepSpec, config: &OptimizerConfig) -> Result<Vec<SweepRow>> {
    if spec.s_values.is_empty() || spec.r_values.is_empty() {
        return domain("sweep grids must be non-empty");
    }
    config.check()?;
    let mut cells: Vec<(f64, f64, Option<f64>)> = spec
        .s_values
        .iter()
        .flat_map(|&s| spec.r_values.iter().map(move |&(r1, r2)| (s, r1, r2)))
        .collect();
    cells.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.unwrap_or(f64::NAN).total_cmp(&b.2.unwrap_or(f64::NAN)))
    });
    cells
        .into_par_iter()
        .map(|(s, r1, r2)| {
            let states = spec
                .states(r1, r2)?
                .iter()
                .map(SourceState::gaussian)
                .collect::<Result<Vec<_>>>()?;
            let problem = BellProblem::new(
                &spec.topology,
                &spec.k,
                &states,
                Smoothing::new(s)?,
                spec.functional,
            )?;
            Ok(SweepRow {
                s,
                r1,
                r2,
                result: supremum(&problem, config)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::epr_state;
    use crate::network::{canonical_independent_set, chain};
    use approx::assert_relative_eq;

    #[test]
    fn nelder_mead_finds_quadratic_peak() {
        let f = |x: &[f64]| -(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.7).powi(2) + 1.0;
        let out = nelder_mead_max(&f, vec![2.0, 2.0], 0.2, 5000, 1e-14, 3.0);
        assert_relative_eq!(out.value, 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.x[0], 0.3, epsilon = 1e-5);
        assert_relative_eq!(out.x[1], -0.7, epsilon = 1e-5);
        assert!(out.evals <= 5000);
    }

    #[test]
    fn nelder_mead_respects_box_and_budget() {
        let f = |x: &[f64]| x.iter().sum::<f64>();
        let out = nelder_mead_max(&f, vec![0.0; 3], 0.2, 2000, 1e-12, 1.5);
        assert!(out.x.iter().all(|c| (c - 1.5).abs() < 1e-9));
        let out = nelder_mead_max(&f, vec![0.0; 3], 0.2, 10, 1e-12, 1.5);
        assert!(out.evals <= 10);
    }

    fn small_config() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 8,
            eval_budget: 4000,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn vacuum_chain_supremum_is_one() {
        let t = chain(3).unwrap();
        let k = canonical_independent_set(&t).unwrap();
        let st = vec![epr_state(0.0).unwrap(); 2];
        let res = supremum_b(&t, &k, &st, Smoothing::HUSIMI, &small_config()).unwrap();
        assert_relative_eq!(res.best.b_value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn result_invariants_and_determinism() {
        let t = chain(3).unwrap();
        let k = canonical_independent_set(&t).unwrap();
        let st = vec![epr_state(0.0).unwrap(), epr_state(0.5).unwrap()];
        let cfg = small_config();
        let a = supremum_b(&t, &k, &st, Smoothing::HUSIMI, &cfg).unwrap();
        let b = supremum_b(&t, &k, &st, Smoothing::HUSIMI, &cfg).unwrap();
        assert_eq!(a, b);
        let max = a.per_restart_best.iter().cloned().fold(f64::MIN, f64::max);
        assert_relative_eq!(a.best.b_value, max, epsilon = 1e-14);
        let again = crate::bell::bell_value(&t, &k, &st, &a.argmax, Smoothing::HUSIMI).unwrap();
        assert_relative_eq!(again.b_value, a.best.b_value, epsilon = 1e-12);
        assert!(a.best.b_value > 1.0);
        assert_eq!(a.restarts_run, 16);
    }

    #[test]
    fn ansatz_layouts() {
        let mut out = vec![0.0; 16];
        expand(Ansatz::RealOnly, &[1.0, 2.0, 3.0, 4.0], 2, &mut out);
        assert_eq!(&out[..8], &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0, 0.0]);
        assert_eq!(&out[8..], &out[..8].to_vec()[..]);
        let theta: Vec<f64> = (0..8).map(f64::from).collect();
        expand(Ansatz::SymmetricSources, &theta, 2, &mut out);
        assert_eq!(&out[8..], &theta[..]);
    }

    #[test]
    fn config_checks() {
        let t = chain(3).unwrap();
        let k = canonical_independent_set(&t).unwrap();
        let st = vec![epr_state(0.2).unwrap(); 2];
        for cfg in [
            OptimizerConfig {
                eval_budget: 0,
                ..small_config()
            },
            OptimizerConfig {
                restarts: 0,
                ..small_config()
            },
            OptimizerConfig {
                box_radius: 0.0,
                ..small_config()
            },
            OptimizerConfig {
                tolerance: -1.0,
                ..small_config()
            },
        ] {
            assert!(matches!(
                supremum_b(&t, &k, &st, Smoothing::HUSIMI, &cfg),
                Err(crate::Error::Domain(_))
            ));
        }
    }

    #[test]
    fn sweep_orders_rows() {
        let t = chain(3).unwrap();
        let spec = SweepSpec {
            k: canonical_independent_set(&t).unwrap(),
            topology: t,
            source: SourceFamily::Epr,
            s_values: vec![-1.0, -2.0],
            r_values: vec![(0.5, None), (0.25, None)],
            functional: Functional::Literal,
        };
        let cfg = OptimizerConfig {
            restarts: 2,
            eval_budget: 500,
            ..small_config()
        };
        let rows = sweep(&spec, &cfg).unwrap();
        let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.s, r.r1)).collect();
        assert_eq!(
            keys,
            vec![(-2.0, 0.25), (-2.0, 0.5), (-1.0, 0.25), (-1.0, 0.5)]
        );
        assert!(sweep(
            &SweepSpec {
                s_values: vec![],
                ..spec
            },
            &cfg
        )
        .is_err());
    }
}
