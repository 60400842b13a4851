//! Exhaustive search over all designs of size `N`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OptexError, Result};
use crate::linalg::SymMatrix;
use crate::milp::ExtraConstraint;
use crate::model::{CriterionSpec, DesignProblem, ExactDesign};

/// Default limit on the number of designs.
pub const DEFAULT_CAP: u128 = 5_000_000;
const REFRESH_EVERY: usize = 64;
const COV_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub design: ExactDesign,
    pub value: f64,
    /// Feasible designs with a nonsingular information matrix.
    pub examined: u64,
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    r
}

/// Knuth's revolving-door order on `k`-subsets of `0..n`: consecutive
/// subsets differ by one element in and one element out.
#[derive(Debug, Clone)]
pub struct RevolvingDoor {
    c: Vec<usize>,
    n: usize,
    k: usize,
    started: bool,
    done: bool,
}

impl RevolvingDoor {
    pub fn new(n: usize, k: usize) -> Self {
        let mut c: Vec<usize> = (0..k).collect();
        c.push(n);
        Self { c, n, k, started: false, done: k > n }
    }

    /// Current subset, ascending.
    pub fn current(&self) -> &[usize] {
        &self.c[..self.k]
    }

    /// Advances; returns `(out, in)` or `None` at the end. The first call
    /// yields `Some((usize::MAX, usize::MAX))` for the initial subset.
    pub fn advance(&mut self) -> Option<(usize, usize)> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some((usize::MAX, usize::MAX));
        }
        let (k, c) = (self.k, &mut self.c);
        if k == 0 || k == self.n {
            self.done = true;
            return None;
        }
        // 1-based c_j is c[j - 1]
        if k % 2 == 1 {
            if c[0] + 1 < c[1] {
                c[0] += 1;
                return Some((c[0] - 1, c[0]));
            }
        } else if c[0] > 0 {
            c[0] -= 1;
            return Some((c[0] + 1, c[0]));
        }
        let mut j = 2;
        let mut try_decrease = k % 2 == 1;
        loop {
            if j > k {
                self.done = true;
                return None;
            }
            if try_decrease {
                // c_j = c_{j-1} + 1
                if c[j - 1] >= j {
                    let out = c[j - 1];
                    c[j - 1] = c[j - 2];
                    c[j - 2] = j - 2;
                    return Some((out, j - 2));
                }
                j += 1;
                if j > k {
                    self.done = true;
                    return None;
                }
                try_decrease = false;
            } else {
                // c_{j-1} = j - 2
                if c[j - 1] + 1 < c[j] {
                    let out = c[j - 2];
                    c[j - 2] = c[j - 1];
                    c[j - 1] += 1;
                    return Some((out, c[j - 1]));
                }
                j += 1;
                if j > k {
                    self.done = true;
                    return None;
                }
                try_decrease = true;
            }
        }
    }
}

struct Scorer<'a> {
    f: Vec<DVector<f64>>,
    grams: Vec<DMatrix<f64>>,
    extras: &'a [ExtraConstraint],
    cov_extras: bool,
    n: usize,
}

#[derive(Clone, PartialEq)]
struct Best {
    value: f64,
    design: Vec<usize>,
}

fn better(a: &Best, b: &Best) -> bool {
    a.value < b.value || (a.value == b.value && a.design < b.design)
}

fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if better(&b, &a) { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

impl<'a> Scorer<'a> {
    fn new(problem: &DesignProblem, spec: &CriterionSpec, extras: &'a [ExtraConstraint]) -> Result<Self> {
        if spec.m() != problem.m() {
            return Err(OptexError::DimensionMismatch("criterion and problem dimensions differ".into()));
        }
        for e in extras {
            e.validate(problem.n(), problem.m())?;
        }
        Ok(Self {
            f: problem.regressors().iter().map(|r| DVector::from_column_slice(r)).collect(),
            grams: spec.grams().iter().map(|g| g.as_matrix().clone()).collect(),
            extras,
            cov_extras: extras.iter().any(|e| !e.is_design_only()),
            n: problem.n(),
        })
    }

    fn m(&self) -> usize {
        self.grams[0].nrows()
    }

    fn info(&self, counts: impl Iterator<Item = (usize, usize)>) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (i, c) in counts {
            out.ger(c as f64, &self.f[i], &self.f[i], 1.0);
        }
        out
    }

    /// `M^-1` if `M` passes the nonsingularity test.
    fn checked_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let eig = m.clone().symmetric_eigen();
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        if !(hi > 0.0) || lo <= 1e-10 * hi {
            return None;
        }
        let v = &eig.eigenvectors;
        Some(v * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x)) * v.transpose())
    }

    fn value(&self, sigma: &DMatrix<f64>) -> f64 {
        self.grams
            .iter()
            .map(|g| g.component_mul(&sigma.transpose()).sum())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn design_feasible(&self, counts: &[usize]) -> bool {
        if self.extras.is_empty() {
            return true;
        }
        let d = ExactDesign::new(counts.to_vec());
        let zero = SymMatrix::zeros(self.m());
        self.extras.iter().filter(|e| e.is_design_only()).all(|e| e.is_satisfied(&d, &zero, 1e-9))
    }

    fn cov_feasible(&self, counts: &[usize], sigma: &DMatrix<f64>) -> bool {
        if !self.cov_extras {
            return true;
        }
        let d = ExactDesign::new(counts.to_vec());
        let s = SymMatrix::symmetrize(sigma.clone());
        self.extras.iter().filter(|e| !e.is_design_only()).all(|e| e.is_satisfied(&d, &s, COV_TOL))
    }
}

/// Incremental inverse of `M` under rank-one changes.
struct Tracker {
    m: DMatrix<f64>,
    sigma: Option<DMatrix<f64>>,
    steps: usize,
}

impl Tracker {
    fn sherman_morrison(sigma: &DMatrix<f64>, f: &DVector<f64>, sign: f64) -> Option<DMatrix<f64>> {
        let sf = sigma * f;
        let denom = 1.0 + sign * f.dot(&sf);
        if denom.abs() < 1e-8 {
            return None;
        }
        let mut out = sigma.clone();
        out.ger(-sign / denom, &sf, &sf, 1.0);
        Some(out)
    }

    fn swap(&mut self, out_f: &DVector<f64>, in_f: &DVector<f64>) {
        self.m.ger(1.0, in_f, in_f, 1.0);
        self.m.ger(-1.0, out_f, out_f, 1.0);
        self.steps += 1;
        self.sigma = self
            .sigma
            .as_ref()
            .and_then(|s| Self::sherman_morrison(s, in_f, 1.0))
            .and_then(|s| Self::sherman_morrison(&s, out_f, -1.0));
    }

    /// Current inverse, verified against the nonsingularity test when the
    /// conditioning estimate is not conclusive.
    fn inverse(&mut self, fresh: impl FnOnce() -> DMatrix<f64>) -> Option<DMatrix<f64>> {
        if self.steps >= REFRESH_EVERY {
            self.m = fresh();
            self.sigma = None;
            self.steps = 0;
        }
        if let Some(s) = &self.sigma {
            // kappa_2 <= ||M||_F ||Sigma||_F
            if self.m.norm() * s.norm() < 1e9 {
                return Some(s.clone());
            }
        }
        self.sigma = Scorer::checked_inverse(&self.m);
        self.sigma.clone()
    }
}

/// Best binary design by exhaustive enumeration, with the default cap.
pub fn enumerate_best(problem: &DesignProblem, spec: &CriterionSpec, extras: &[ExtraConstraint]) -> Result<OracleResult> {
    enumerate_best_with(problem, spec, extras, DEFAULT_CAP)
}

/// Best binary design among at most `cap` subsets.
pub fn enumerate_best_with(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    extras: &[ExtraConstraint],
    cap: u128,
) -> Result<OracleResult> {
    let (n, big_n) = (problem.n(), problem.run_budget());
    let count = binomial(n, big_n);
    if count > cap {
        return Err(OptexError::TooLarge { count, cap });
    }
    let scorer = Scorer::new(problem, spec, extras)?;
    if big_n == 0 {
        return Err(OptexError::NoFeasibleDesign);
    }
    // partition by the smallest selected point
    let parts: Vec<(Option<Best>, u64)> = (0..=n - big_n)
        .into_par_iter()
        .map(|first| scan_partition(&scorer, first, big_n))
        .collect();
    let mut best = None;
    let mut examined = 0;
    for (b, e) in parts {
        best = merge(best, b);
        examined += e;
    }
    finish(&scorer, best, examined)
}

fn scan_partition(scorer: &Scorer, first: usize, big_n: usize) -> (Option<Best>, u64) {
    let n = scorer.n;
    let rest = n - first - 1;
    let k = big_n - 1;
    let mut door = RevolvingDoor::new(rest, k);
    let mut counts = vec![0usize; n];
    counts[first] = 1;
    let mut best: Option<Best> = None;
    let mut examined = 0;
    let mut tracker: Option<Tracker> = None;
    let off = first + 1;
    while let Some((out, inn)) = door.advance() {
        if out == usize::MAX {
            for &t in door.current() {
                counts[off + t] = 1;
            }
            let m = scorer.info(counts.iter().copied().enumerate().filter(|p| p.1 > 0));
            tracker = Some(Tracker { m, sigma: None, steps: 0 });
        } else {
            counts[off + out] = 0;
            counts[off + inn] = 1;
            if let Some(t) = tracker.as_mut() {
                t.swap(&scorer.f[off + out], &scorer.f[off + inn]);
            }
        }
        if !scorer.design_feasible(&counts) {
            continue;
        }
        let t = tracker.as_mut().expect("initialized on the first subset");
        let fresh = || scorer.info(counts.iter().copied().enumerate().filter(|p| p.1 > 0));
        let Some(sigma) = t.inverse(fresh) else { continue };
        if !scorer.cov_feasible(&counts, &sigma) {
            continue;
        }
        examined += 1;
        let value = scorer.value(&sigma);
        if best.as_ref().is_none_or(|b| value < b.value || (value == b.value && counts < b.design)) {
            best = Some(Best { value, design: counts.clone() });
        }
    }
    (best, examined)
}

fn finish(scorer: &Scorer, best: Option<Best>, examined: u64) -> Result<OracleResult> {
    let best = best.ok_or(OptexError::NoFeasibleDesign)?;
    let m = scorer.info(best.design.iter().copied().enumerate().filter(|p| p.1 > 0));
    let sigma = Scorer::checked_inverse(&m).ok_or(OptexError::NoFeasibleDesign)?;
    Ok(OracleResult { value: scorer.value(&sigma), design: ExactDesign::new(best.design), examined })
}

/// Number of designs with `0 <= d_i <= caps_i` and `sum d = total`, saturating.
pub fn count_capped(caps: &[usize], total: usize) -> u128 {
    let mut ways = vec![0u128; total + 1];
    ways[0] = 1;
    for &c in caps {
        let mut next = vec![0u128; total + 1];
        for (s, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for t in 0..=c.min(total - s) {
                next[s + t] = next[s + t].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[total]
}

/// Best design with replications `d_i <= caps_i`, by exhaustive enumeration.
pub fn enumerate_capped(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    extras: &[ExtraConstraint],
    caps: &[usize],
    cap: u128,
) -> Result<OracleResult> {
    let (n, big_n) = (problem.n(), problem.run_budget());
    if caps.len() != n {
        return Err(OptexError::DimensionMismatch(format!("{} caps for {n} points", caps.len())));
    }
    let count = count_capped(caps, big_n);
    if count > cap {
        return Err(OptexError::TooLarge { count, cap });
    }
    let scorer = Scorer::new(problem, spec, extras)?;
    let firsts: Vec<(usize, usize)> = (0..n).flat_map(|i| (1..=caps[i].min(big_n)).map(move |c| (i, c))).collect();
    let parts: Vec<(Option<Best>, u64)> = firsts
        .into_par_iter()
        .map(|(first, c)| {
            let mut counts = vec![0usize; n];
            counts[first] = c;
            let mut best = None;
            let mut examined = 0;
            fill(&scorer, caps, &mut counts, first + 1, big_n - c, &mut best, &mut examined);
            (best, examined)
        })
        .collect();
    let mut best = None;
    let mut examined = 0;
    for (b, e) in parts {
        best = merge(best, b);
        examined += e;
    }
    finish(&scorer, best, examined)
}

fn fill(
    scorer: &Scorer,
    caps: &[usize],
    counts: &mut Vec<usize>,
    from: usize,
    left: usize,
    best: &mut Option<Best>,
    examined: &mut u64,
) {
    if left == 0 {
        if !scorer.design_feasible(counts) {
            return;
        }
        let m = scorer.info(counts.iter().copied().enumerate().filter(|p| p.1 > 0));
        let Some(sigma) = Scorer::checked_inverse(&m) else { return };
        if !scorer.cov_feasible(counts, &sigma) {
            return;
        }
        *examined += 1;
        let cand = Best { value: scorer.value(&sigma), design: counts.clone() };
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            *best = Some(cand);
        }
        return;
    }
    for i in from..counts.len() {
        for c in 1..=caps[i].min(left) {
            counts[i] = c;
            fill(scorer, caps, counts, i + 1, left - c, best, examined);
        }
        counts[i] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;
    use crate::model::{design_value, quadratic_grid, CriterionKind};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn revolving_door_visits_every_subset_once() {
        for n in 0..9 {
            for k in 0..=n {
                let mut door = RevolvingDoor::new(n, k);
                let mut seen = BTreeSet::new();
                let mut prev: Option<Vec<usize>> = None;
                while let Some((out, inn)) = door.advance() {
                    let cur = door.current().to_vec();
                    assert!(cur.windows(2).all(|w| w[0] < w[1]) && cur.iter().all(|&c| c < n));
                    if let Some(p) = &prev {
                        let removed: Vec<usize> = p.iter().copied().filter(|x| !cur.contains(x)).collect();
                        let added: Vec<usize> = cur.iter().copied().filter(|x| !p.contains(x)).collect();
                        assert_eq!((removed, added), (vec![out], vec![inn]), "n={n} k={k}");
                    }
                    assert!(seen.insert(cur.clone()), "repeat {cur:?}");
                    prev = Some(cur);
                }
                assert_eq!(seen.len() as u128, binomial(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn orthonormal_pairs() {
        let s = 0.5f64.sqrt();
        let regs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s], vec![s, -s]];
        let p = DesignProblem::new(regs, 2, None).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let r = enumerate_best(&p, &spec, &[]).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.examined, 6);
    }

    #[test]
    fn saturated_problem_has_one_design() {
        let p = quadratic_grid(3, 3).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::MV, &p).unwrap();
        let r = enumerate_best(&p, &spec, &[]).unwrap();
        assert_eq!(r.design.counts(), &[1, 1, 1]);
        assert_eq!(r.examined, 1);
    }

    #[test]
    fn cap_is_enforced() {
        let p = quadratic_grid(31, 5).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        assert_eq!(
            enumerate_best_with(&p, &spec, &[], 1000).unwrap_err(),
            OptexError::TooLarge { count: 169_911, cap: 1000 }
        );
    }

    #[test]
    fn constraints_reject_designs() {
        let p = quadratic_grid(7, 3).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let none = ExtraConstraint::DesignLinear { name: None, coeffs: vec![(0, 1.0)], sense: Sense::Ge, rhs: 2.0 };
        assert_eq!(enumerate_best(&p, &spec, &[none]).unwrap_err(), OptexError::NoFeasibleDesign);
        let mid = ExtraConstraint::DesignLinear { name: None, coeffs: vec![(3, 1.0)], sense: Sense::Eq, rhs: 1.0 };
        let r = enumerate_best(&p, &spec, &[mid]).unwrap();
        assert_eq!(r.design.counts()[3], 1);
        assert_eq!(r.examined, 15);
    }

    #[test]
    fn capped_enumeration_counts() {
        assert_eq!(count_capped(&[5; 31], 5), binomial(35, 5));
        assert_eq!(count_capped(&[1; 31], 5), binomial(31, 5));
        let p = quadratic_grid(9, 4).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::I, &p).unwrap();
        let binary = enumerate_best(&p, &spec, &[]).unwrap();
        let capped = enumerate_capped(&p, &spec, &[], &[1; 9], DEFAULT_CAP).unwrap();
        assert_eq!(binary.design, capped.design);
        assert_eq!(binary.examined, capped.examined);
    }

    fn brute_force(p: &DesignProblem, spec: &CriterionSpec) -> f64 {
        let n = p.n();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != p.run_budget() {
                continue;
            }
            let d = ExactDesign::new((0..n).map(|i| ((mask >> i) & 1) as usize).collect());
            if let Ok(v) = design_value(p, spec, &d) {
                best = best.min(v);
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn matches_brute_force(seed in 0u64..10_000, n in 4usize..11, m in 2usize..4, kind in 0usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let big_n = rng.random_range(m..=n);
            let regs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let p = DesignProblem::new(regs, big_n, None).unwrap();
            let kind = [CriterionKind::A, CriterionKind::I, CriterionKind::MV, CriterionKind::G][kind];
            let spec = CriterionSpec::preset(kind, &p).unwrap();
            let r = enumerate_best(&p, &spec, &[]).unwrap();
            let b = brute_force(&p, &spec);
            prop_assert!((r.value - b).abs() <= 1e-9 * b.abs().max(1.0), "{} vs {}", r.value, b);
            prop_assert!((design_value(&p, &spec, &r.design).unwrap() - r.value).abs() <= 1e-9 * r.value);
        }

        #[test]
        fn permutation_invariance(seed in 0u64..10_000) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (n, m) = (9, 3);
            let regs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| regs[i].clone()).collect();
            let p = DesignProblem::new(regs, 4, None).unwrap();
            let q = DesignProblem::new(permuted, 4, None).unwrap();
            let sp = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
            let sq = CriterionSpec::preset(CriterionKind::A, &q).unwrap();
            let rp = enumerate_best(&p, &sp, &[]).unwrap();
            let rq = enumerate_best(&q, &sq, &[]).unwrap();
            prop_assert!((rp.value - rq.value).abs() <= 1e-10 * rp.value);
            let mapped: Vec<usize> = perm.iter().map(|&i| rp.design.counts()[i]).collect();
            prop_assert!((design_value(&q, &sq, &ExactDesign::new(mapped)).unwrap() - rq.value).abs() <= 1e-10 * rq.value);
        }
    }
}
