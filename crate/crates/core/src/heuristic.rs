//! Pairwise exchange search for good binary designs.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OptexError, Result};
use crate::linalg::SymMatrix;
use crate::milp::ExtraConstraint;
use crate::model::{CriterionKind, CriterionSpec, DesignProblem, ExactDesign};

const RANDOM_TRIES: usize = 100;
const DRAWS_PER_RESTART: usize = 1000;
const IMPROVE_TOL: f64 = 1e-12;
const COV_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub restarts: usize,
    pub rng_seed: u64,
    pub max_passes: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self { restarts: 8, rng_seed: 0, max_passes: 200 }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_passes == 0 {
            return Err(OptexError::InvalidProblem("restarts and max_passes must be positive".into()));
        }
        Ok(())
    }
}

/// What one restart did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub start: ExactDesign,
    /// Objective after the start and after every accepted swap, per phase.
    pub phases: Vec<Vec<f64>>,
    pub design: ExactDesign,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicRun {
    pub design: ExactDesign,
    pub value: f64,
    pub restarts: Vec<RestartTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    Criterion,
    NegLogDet,
}

struct Ctx<'a> {
    f: Vec<DVector<f64>>,
    grams: Vec<DMatrix<f64>>,
    extras: &'a [ExtraConstraint],
    forced: Vec<usize>,
    n: usize,
    budget: usize,
}

struct State {
    counts: Vec<usize>,
    m: DMatrix<f64>,
    sigma: DMatrix<f64>,
}

fn checked_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(hi > 0.0) || lo <= 1e-10 * hi {
        return None;
    }
    let v = &eig.eigenvectors;
    Some(v * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x)) * v.transpose())
}

fn rank_one(sigma: &DMatrix<f64>, f: &DVector<f64>, sign: f64) -> Option<(DMatrix<f64>, f64)> {
    let sf = sigma * f;
    let denom = 1.0 + sign * f.dot(&sf);
    if denom <= 1e-10 {
        return None;
    }
    let mut out = sigma.clone();
    out.ger(-sign / denom, &sf, &sf, 1.0);
    Some((out, denom))
}

impl<'a> Ctx<'a> {
    fn new(problem: &DesignProblem, spec: &CriterionSpec, extras: &'a [ExtraConstraint]) -> Result<Self> {
        if spec.m() != problem.m() {
            return Err(OptexError::DimensionMismatch("criterion and problem dimensions differ".into()));
        }
        let mut forced = Vec::new();
        for e in extras {
            e.validate(problem.n(), problem.m())?;
            if let ExtraConstraint::Augmentation { point, count } = e {
                if *count > 1 {
                    return Err(OptexError::InvalidProblem(format!(
                        "binary designs cannot hold {count} trials at point {point}"
                    )));
                }
                if *count == 1 && !forced.contains(point) {
                    forced.push(*point);
                }
            }
        }
        forced.sort_unstable();
        if forced.len() > problem.run_budget() {
            return Err(OptexError::NoFeasibleDesign);
        }
        Ok(Self {
            f: problem.regressors().iter().map(|r| DVector::from_column_slice(r)).collect(),
            grams: spec.grams().iter().map(|g| g.as_matrix().clone()).collect(),
            extras,
            forced,
            n: problem.n(),
            budget: problem.run_budget(),
        })
    }

    fn m(&self) -> usize {
        self.grams[0].nrows()
    }

    fn info(&self, counts: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m(), self.m());
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                out.ger(c as f64, &self.f[i], &self.f[i], 1.0);
            }
        }
        out
    }

    fn criterion(&self, sigma: &DMatrix<f64>) -> f64 {
        self.grams
            .iter()
            .map(|g| g.component_mul(&sigma.transpose()).sum())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn feasible(&self, counts: &[usize], sigma: &DMatrix<f64>) -> bool {
        if self.extras.is_empty() {
            return true;
        }
        let d = ExactDesign::new(counts.to_vec());
        let s = SymMatrix::symmetrize(sigma.clone());
        self.extras.iter().all(|e| e.is_satisfied(&d, &s, COV_TOL))
    }

    fn state(&self, counts: Vec<usize>) -> Option<State> {
        let m = self.info(&counts);
        let sigma = checked_inverse(&m)?;
        self.feasible(&counts, &sigma).then_some(State { counts, m, sigma })
    }

    fn objective(&self, obj: Objective, st: &State) -> f64 {
        match obj {
            Objective::Criterion => self.criterion(&st.sigma),
            Objective::NegLogDet => -st.m.clone().cholesky().map_or(f64::NEG_INFINITY, |c| {
                2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
            }),
        }
    }

    fn random_counts(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for &i in &self.forced {
            counts[i] = 1;
        }
        let pool: Vec<usize> = (0..self.n).filter(|i| counts[*i] == 0).collect();
        for t in sample(rng, pool.len(), self.budget - self.forced.len()) {
            counts[pool[t]] = 1;
        }
        counts
    }

    /// Forced points, then points of largest residual norm, then lowest indices.
    fn greedy_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let take = |i: usize, counts: &mut Vec<usize>, basis: &mut Vec<DVector<f64>>| {
            counts[i] = 1;
            let mut r = self.f[i].clone();
            for q in basis.iter() {
                r -= q * q.dot(&r);
            }
            let norm = r.norm();
            if norm > 1e-12 * self.f[i].norm() {
                basis.push(r / norm);
            }
        };
        for &i in &self.forced {
            take(i, &mut counts, &mut basis);
        }
        while counts.iter().sum::<usize>() < self.budget && basis.len() < self.m() {
            let mut best: Option<(usize, f64)> = None;
            for i in (0..self.n).filter(|&i| counts[i] == 0) {
                let mut r = self.f[i].clone();
                for q in &basis {
                    r -= q * q.dot(&r);
                }
                let score = r.norm() / self.f[i].norm();
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((i, score));
                }
            }
            match best {
                Some((i, _)) => take(i, &mut counts, &mut basis),
                None => break,
            }
        }
        for i in 0..self.n {
            if counts.iter().sum::<usize>() >= self.budget {
                break;
            }
            if counts[i] == 0 {
                counts[i] = 1;
            }
        }
        counts
    }

    fn start(&self, rng: &mut ChaCha8Rng) -> Option<State> {
        for _ in 0..RANDOM_TRIES {
            if let Some(st) = self.state(self.random_counts(rng)) {
                return Some(st);
            }
        }
        if let Some(st) = self.state(self.greedy_counts()) {
            return Some(st);
        }
        for _ in RANDOM_TRIES..DRAWS_PER_RESTART {
            if let Some(st) = self.state(self.random_counts(rng)) {
                return Some(st);
            }
        }
        None
    }

    /// Steepest pairwise exchange; returns the objective history.
    fn exchange(&self, obj: Objective, st: &mut State, max_passes: usize) -> Vec<f64> {
        let mut current = self.objective(obj, st);
        let mut history = vec![current];
        for _ in 0..max_passes {
            let mut best: Option<(f64, usize, usize)> = None;
            let support: Vec<usize> = (0..self.n).filter(|&i| st.counts[i] == 1).collect();
            for &out in &support {
                if self.forced.binary_search(&out).is_ok() {
                    continue;
                }
                for inn in (0..self.n).filter(|&j| st.counts[j] == 0) {
                    let Some(v) = self.swap_value(obj, st, out, inn) else { continue };
                    if best.is_none_or(|(b, _, _)| v < b) {
                        best = Some((v, out, inn));
                    }
                }
            }
            let Some((v, out, inn)) = best else { break };
            if current - v <= IMPROVE_TOL * current.abs().max(1.0) {
                break;
            }
            st.counts[out] = 0;
            st.counts[inn] = 1;
            st.m = self.info(&st.counts);
            match checked_inverse(&st.m) {
                Some(s) => st.sigma = s,
                None => {
                    st.counts[out] = 1;
                    st.counts[inn] = 0;
                    st.m = self.info(&st.counts);
                    break;
                }
            }
            current = self.objective(obj, st);
            history.push(current);
        }
        history
    }

    fn swap_value(&self, obj: Objective, st: &State, out: usize, inn: usize) -> Option<f64> {
        let (s1, g1) = rank_one(&st.sigma, &self.f[inn], 1.0)?;
        let (s2, g2) = rank_one(&s1, &self.f[out], -1.0)?;
        let mut m2 = st.m.clone();
        m2.ger(1.0, &self.f[inn], &self.f[inn], 1.0);
        m2.ger(-1.0, &self.f[out], &self.f[out], 1.0);
        let sigma = if m2.norm() * s2.norm() < 1e9 { s2 } else { checked_inverse(&m2)? };
        if !self.extras.is_empty() {
            let mut counts = st.counts.clone();
            counts[out] = 0;
            counts[inn] = 1;
            if !self.feasible(&counts, &sigma) {
                return None;
            }
        }
        Some(match obj {
            Objective::Criterion => self.criterion(&sigma),
            Objective::NegLogDet => {
                let base = self.objective(Objective::NegLogDet, st);
                base - g1.ln() - g2.ln()
            }
        })
    }

    fn restart(&self, spec_kind: CriterionKind, config: &HeuristicConfig, r: usize) -> Option<RestartTrace> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(r as u64);
        let mut st = self.start(&mut rng)?;
        let start = ExactDesign::new(st.counts.clone());
        let start_value = self.criterion(&st.sigma);
        let mut phases = Vec::new();
        if spec_kind == CriterionKind::G {
            phases.push(self.exchange(Objective::NegLogDet, &mut st, config.max_passes));
        }
        phases.push(self.exchange(Objective::Criterion, &mut st, config.max_passes));
        let value = self.criterion(&st.sigma);
        let (design, value) = if value <= start_value {
            (ExactDesign::new(st.counts), value)
        } else {
            (start.clone(), start_value)
        };
        Some(RestartTrace { start, phases, design, value })
    }
}

/// Best design over `config.restarts` exchange runs from random starts.
pub fn exchange_search(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    config: &HeuristicConfig,
    extras: &[ExtraConstraint],
) -> Result<ExactDesign> {
    Ok(exchange_search_traced(problem, spec, config, extras)?.design)
}

/// [`exchange_search`] with per-restart traces.
pub fn exchange_search_traced(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    config: &HeuristicConfig,
    extras: &[ExtraConstraint],
) -> Result<HeuristicRun> {
    config.validate()?;
    let ctx = Ctx::new(problem, spec, extras)?;
    let runs: Vec<Option<RestartTrace>> =
        (0..config.restarts).into_par_iter().map(|r| ctx.restart(spec.kind(), config, r)).collect();
    let restarts: Vec<RestartTrace> = runs.into_iter().flatten().collect();
    let best = restarts
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then_with(|| b.design.cmp(&a.design)))
        .ok_or(OptexError::NoFeasibleStart { draws: config.restarts * DRAWS_PER_RESTART })?;
    Ok(HeuristicRun { design: best.design.clone(), value: best.value, restarts: restarts.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;
    use crate::model::{design_value, info_matrix, quadratic_at, quadratic_grid};
    use crate::oracle::enumerate_best;
    use proptest::prelude::*;

    #[test]
    fn saturated_problem() {
        let p = quadratic_grid(4, 4).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let d = exchange_search(&p, &spec, &HeuristicConfig::default(), &[]).unwrap();
        assert_eq!(d.counts(), &[1, 1, 1, 1]);
    }

    #[test]
    fn five_point_grid_matches_enumeration() {
        let p = quadratic_at(&[-1.0, -0.5, 0.0, 0.5, 1.0], 3).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let d = exchange_search(&p, &spec, &HeuristicConfig::default(), &[]).unwrap();
        let oracle = enumerate_best(&p, &spec, &[]).unwrap();
        assert!((design_value(&p, &spec, &d).unwrap() - oracle.value).abs() < 1e-12);
        assert_eq!(d.support(), vec![0, 2, 4]);
    }

    #[test]
    fn linear_model_within_five_percent() {
        let xs: Vec<f64> = (0..21).map(|i| -1.0 + i as f64 / 10.0).collect();
        let regs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let p = DesignProblem::new(regs, 6, None).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let oracle = enumerate_best(&p, &spec, &[]).unwrap();
        for seed in 0..10 {
            let cfg = HeuristicConfig { rng_seed: seed, ..Default::default() };
            let d = exchange_search(&p, &spec, &cfg, &[]).unwrap();
            assert!(design_value(&p, &spec, &d).unwrap() <= 1.05 * oracle.value);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let p = quadratic_grid(21, 5).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::I, &p).unwrap();
        let cfg = HeuristicConfig { restarts: 5, rng_seed: 7, max_passes: 50 };
        let a = exchange_search_traced(&p, &spec, &cfg, &[]).unwrap();
        let b = exchange_search_traced(&p, &spec, &cfg, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn respects_extras() {
        let p = quadratic_grid(31, 5).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let left = ExtraConstraint::DesignLinear {
            name: None,
            coeffs: (5..=10).map(|i| (i, 1.0)).collect(),
            sense: Sense::Ge,
            rhs: 1.0,
        };
        let keep = ExtraConstraint::Augmentation { point: 3, count: 1 };
        let d = exchange_search(&p, &spec, &HeuristicConfig::default(), &[left, keep]).unwrap();
        assert!((5..=10).any(|i| d.counts()[i] == 1));
        assert_eq!(d.counts()[3], 1);
    }

    #[test]
    fn impossible_extras() {
        let p = quadratic_grid(9, 3).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let tight = ExtraConstraint::CovarianceLinear { name: None, coeffs: vec![((0, 0), 1.0)], sense: Sense::Le, rhs: 1e-6 };
        let cfg = HeuristicConfig { restarts: 2, ..Default::default() };
        assert_eq!(
            exchange_search(&p, &spec, &cfg, &[tight]).unwrap_err(),
            OptexError::NoFeasibleStart { draws: 2000 }
        );
    }

    #[test]
    fn g_uses_determinant_phase() {
        let p = quadratic_grid(15, 4).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::G, &p).unwrap();
        let run = exchange_search_traced(&p, &spec, &HeuristicConfig::default(), &[]).unwrap();
        assert!(run.restarts.iter().all(|r| r.phases.len() == 2));
        let oracle = enumerate_best(&p, &spec, &[]).unwrap();
        assert!(run.value <= 1.2 * oracle.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn output_invariants(seed in 0u64..1000, n in 6usize..16, m in 2usize..4, kind in 0usize..4) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let big_n = rng.random_range(m..=n.min(8));
            let regs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let p = DesignProblem::new(regs, big_n, None).unwrap();
            let kind = [CriterionKind::A, CriterionKind::I, CriterionKind::MV, CriterionKind::G][kind];
            let spec = CriterionSpec::preset(kind, &p).unwrap();
            let cfg = HeuristicConfig { restarts: 3, rng_seed: seed, max_passes: 100 };
            let run = exchange_search_traced(&p, &spec, &cfg, &[]).unwrap();
            prop_assert_eq!(run.design.total(), big_n);
            prop_assert!(run.design.is_binary());
            prop_assert!(info_matrix(&p, &run.design).unwrap().is_nonsingular());
            for r in &run.restarts {
                for h in &r.phases {
                    prop_assert!(h.windows(2).all(|w| w[1] <= w[0]));
                }
                let start = design_value(&p, &spec, &r.start).unwrap();
                prop_assert!(r.value <= start * (1.0 + 1e-12));
            }
            let oracle = enumerate_best(&p, &spec, &[]).unwrap();
            prop_assert!(oracle.value <= run.value * (1.0 + 1e-9));
        }
    }
}
