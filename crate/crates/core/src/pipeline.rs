//! End-to-end workflow: starting design, covariance bounds, model, search.
//!
//! With replication caps the problem is expanded so that every point may be
//! chosen up to its cap; designs are reported per original point.

use serde::{Deserialize, Serialize};

use crate::bnb::{self, SolveLimits, SolveStatus};
use crate::bounds::{combined_bounds, reference_alpha, CovBounds};
use crate::error::{OptexError, Result};
use crate::heuristic::{exchange_search, HeuristicConfig};
use crate::linalg::{invert, SymMatrix};
use crate::milp::{build, expand_replications, ExtraConstraint, MilpModel, ReplicationMap};
use crate::model::{design_value, info_matrix, CriterionSpec, DesignProblem, ExactDesign};
use crate::oracle::{enumerate_best_with, enumerate_capped, OracleResult};

/// Tolerance for re-checking reported designs against the extra constraints.
pub const CONSTRAINT_TOL: f64 = 1e-7;
/// Relative tolerance for the recomputed criterion value.
pub const VALUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    /// Per-point replication caps; `None` means binary designs.
    pub caps: Option<Vec<usize>>,
    pub heuristic: HeuristicConfig,
    /// Starting design on the original points, replacing the heuristic.
    pub start: Option<ExactDesign>,
    /// Covariance bounds replacing the computed ones.
    pub bounds: Option<CovBounds>,
    pub limits: SolveLimits,
}

/// Everything needed to run the search.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// The (possibly expanded) binary problem the model is built on.
    pub problem: DesignProblem,
    pub map: ReplicationMap,
    pub extras: Vec<ExtraConstraint>,
    /// Starting design on the original points.
    pub start: ExactDesign,
    pub alpha: f64,
    pub bounds: CovBounds,
    pub model: MilpModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub design: ExactDesign,
    pub criterion_value: f64,
    pub sigma: SymMatrix,
    pub status: SolveStatus,
    pub gap: f64,
    pub lower_bound: f64,
    pub nodes: usize,
    pub start: ExactDesign,
    pub alpha: f64,
}

fn check_caps(problem: &DesignProblem, caps: &Option<Vec<usize>>) -> Result<()> {
    if let Some(c) = caps {
        if c.len() != problem.n() {
            return Err(OptexError::DimensionMismatch(format!("{} caps for {} points", c.len(), problem.n())));
        }
    }
    Ok(())
}

/// The binary problem for `caps` and the map back to the original points.
pub fn binary_problem(problem: &DesignProblem, caps: Option<&[usize]>) -> Result<(DesignProblem, ReplicationMap)> {
    match caps {
        Some(c) => expand_replications(problem, c),
        None => Ok((problem.clone(), ReplicationMap::identity(problem.n()))),
    }
}

/// Checks that `design` is a valid design of `problem` within the caps
/// that satisfies `extras`, and returns its covariance matrix.
pub fn verify_design(
    problem: &DesignProblem,
    caps: Option<&[usize]>,
    extras: &[ExtraConstraint],
    design: &ExactDesign,
) -> Result<SymMatrix> {
    if design.len() != problem.n() {
        return Err(OptexError::InvalidDesign(format!("design has length {}, expected {}", design.len(), problem.n())));
    }
    if design.total() != problem.run_budget() {
        return Err(OptexError::InvalidDesign(format!(
            "design has {} trials, expected {}",
            design.total(),
            problem.run_budget()
        )));
    }
    match caps {
        Some(c) => {
            if let Some(i) = (0..problem.n()).find(|&i| design.counts()[i] > c[i]) {
                return Err(OptexError::InvalidDesign(format!("point {i} exceeds its cap {}", c[i])));
            }
        }
        None => {
            if !design.is_binary() {
                return Err(OptexError::InvalidDesign("design is not binary".into()));
            }
        }
    }
    let m = info_matrix(problem, design)?;
    let ratio = m.conditioning_ratio();
    let sigma = invert(&m).map_err(|_| OptexError::SingularInformation { ratio })?;
    if let Some(e) = extras.iter().find(|e| !e.is_satisfied(design, &sigma, CONSTRAINT_TOL)) {
        let what = match e {
            ExtraConstraint::DesignLinear { name: Some(n), .. } | ExtraConstraint::CovarianceLinear { name: Some(n), .. } => {
                format!("constraint `{n}`")
            }
            ExtraConstraint::DesignLinear { .. } => "a design constraint".into(),
            ExtraConstraint::CovarianceLinear { .. } => "a covariance constraint".into(),
            ExtraConstraint::Augmentation { point, count } => format!("the augmentation d_{point} >= {count}"),
        };
        return Err(OptexError::InvalidDesign(format!("design violates {what}")));
    }
    Ok(sigma)
}

/// Starting design: the supplied one, or the exchange heuristic run on the
/// binary problem.
pub fn starting_design(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    extras: &[ExtraConstraint],
    config: &PipelineConfig,
) -> Result<ExactDesign> {
    check_caps(problem, &config.caps)?;
    let caps = config.caps.as_deref();
    match &config.start {
        Some(d) => {
            verify_design(problem, caps, extras, d)
                .map_err(|e| OptexError::InvalidDesign(format!("starting design: {e}")))?;
            Ok(d.clone())
        }
        None => {
            let (binary, map) = binary_problem(problem, caps)?;
            let expanded = expand_extras(&map, extras)?;
            let start = map.fold(&exchange_search(&binary, spec, &config.heuristic, &expanded)?);
            verify_design(problem, caps, extras, &start)?;
            Ok(start)
        }
    }
}

fn expand_extras(map: &ReplicationMap, extras: &[ExtraConstraint]) -> Result<Vec<ExtraConstraint>> {
    let mut out = Vec::new();
    for e in extras {
        out.extend(map.expand_constraint(e)?);
    }
    Ok(out)
}

/// Runs everything up to the model build.
pub fn prepare(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    extras: &[ExtraConstraint],
    config: &PipelineConfig,
) -> Result<Prepared> {
    if spec.m() != problem.m() {
        return Err(OptexError::DimensionMismatch(format!("criterion has m = {}, problem m = {}", spec.m(), problem.m())));
    }
    let start = starting_design(problem, spec, extras, config)?;
    let (binary, map) = binary_problem(problem, config.caps.as_deref())?;
    let extras = expand_extras(&map, extras)?;
    let start_binary = map.unfold(&start)?;
    let alpha = reference_alpha(&binary, spec, &start_binary)?;
    let bounds = match &config.bounds {
        Some(b) => {
            b.validate(problem.m())?;
            b.clone()
        }
        None => combined_bounds(&binary, spec, &start_binary)?,
    };
    let model = build(&binary, spec, &bounds, &extras)?;
    Ok(Prepared { problem: binary, map, extras, start, alpha, bounds, model })
}

/// Solves a prepared problem and re-validates the reported design on the
/// original points.
pub fn solve_prepared(
    original: &DesignProblem,
    spec: &CriterionSpec,
    extras: &[ExtraConstraint],
    config: &PipelineConfig,
    prepared: &Prepared,
) -> Result<PipelineResult> {
    let incumbent = prepared.map.unfold(&prepared.start)?;
    // supplied bounds need not contain the starting design
    let result = match bnb::solve(&prepared.model, Some(&incumbent), &config.limits) {
        Err(OptexError::InvalidDesign(_)) => bnb::solve(&prepared.model, None, &config.limits)?,
        r => r?,
    };
    let design = prepared.map.fold(&result.design);
    let sigma = verify_design(original, config.caps.as_deref(), extras, &design)?;
    let value = design_value(original, spec, &design)?;
    if (value - result.criterion_value).abs() > VALUE_TOL * (1.0 + value.abs()) {
        return Err(OptexError::Linkage(format!(
            "search reported {} but the design evaluates to {value}",
            result.criterion_value
        )));
    }
    Ok(PipelineResult {
        design,
        criterion_value: value,
        sigma,
        status: result.status,
        gap: result.gap,
        lower_bound: result.lower_bound,
        nodes: result.nodes,
        start: prepared.start.clone(),
        alpha: prepared.alpha,
    })
}

pub fn solve(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    extras: &[ExtraConstraint],
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    let prepared = prepare(problem, spec, extras, config)?;
    solve_prepared(problem, spec, extras, config, &prepared)
}

/// Exhaustive search over binary or capped designs.
pub fn enumerate(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    extras: &[ExtraConstraint],
    caps: Option<&[usize]>,
    cap: u128,
) -> Result<OracleResult> {
    match caps {
        Some(c) => enumerate_capped(problem, spec, extras, c, cap),
        None => enumerate_best_with(problem, spec, extras, cap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Sense;
    use crate::model::{quadratic_grid, CriterionKind};
    use crate::oracle::DEFAULT_CAP;

    #[test]
    fn matches_enumeration() {
        let p = quadratic_grid(11, 4).unwrap();
        for kind in [CriterionKind::A, CriterionKind::I, CriterionKind::MV, CriterionKind::G] {
            let spec = CriterionSpec::preset(kind, &p).unwrap();
            let r = solve(&p, &spec, &[], &PipelineConfig::default()).unwrap();
            let o = enumerate(&p, &spec, &[], None, DEFAULT_CAP).unwrap();
            assert_eq!(r.status, SolveStatus::Certified);
            assert!((r.criterion_value - o.value).abs() <= 1e-7 * o.value, "{kind}");
            assert!(r.criterion_value <= r.alpha * (1.0 + 1e-12));
        }
    }

    #[test]
    fn replications_fold_back() {
        let regs = quadratic_grid(5, 3).unwrap().regressors().to_vec();
        let p = DesignProblem::new_unrestricted(regs, 6, None).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let caps = vec![3; 5];
        let config = PipelineConfig { caps: Some(caps.clone()), ..Default::default() };
        let r = solve(&p, &spec, &[], &config).unwrap();
        let o = enumerate(&p, &spec, &[], Some(&caps), DEFAULT_CAP).unwrap();
        assert_eq!(r.design.len(), 5);
        assert_eq!(r.design.total(), 6);
        assert!((r.criterion_value - o.value).abs() <= 1e-7 * o.value);
    }

    #[test]
    fn constraints_hold_and_bad_starts_are_rejected() {
        let p = quadratic_grid(11, 3).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let extras =
            vec![ExtraConstraint::DesignLinear { name: None, coeffs: vec![(3, 1.0), (4, 1.0)], sense: Sense::Ge, rhs: 1.0 }];
        let r = solve(&p, &spec, &extras, &PipelineConfig::default()).unwrap();
        assert!(r.design.counts()[3] + r.design.counts()[4] >= 1);
        let o = enumerate(&p, &spec, &extras, None, DEFAULT_CAP).unwrap();
        assert!((r.criterion_value - o.value).abs() <= 1e-7 * o.value);

        let config = PipelineConfig { start: Some(ExactDesign::from_support(11, &[0, 5, 10])), ..Default::default() };
        assert!(matches!(solve(&p, &spec, &extras, &config), Err(OptexError::InvalidDesign(_))));
        let config = PipelineConfig { start: Some(ExactDesign::from_support(11, &[0, 4, 10])), ..Default::default() };
        assert_eq!(solve(&p, &spec, &extras, &config).unwrap().start.support(), vec![0, 4, 10]);
    }

    #[test]
    fn supplied_bounds_are_used() {
        let p = quadratic_grid(7, 3).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::MV, &p).unwrap();
        let bounds = CovBounds {
            lower: SymMatrix::from_rows(&vec![vec![-50.0; 3]; 3]).unwrap(),
            upper: SymMatrix::from_rows(&vec![vec![50.0; 3]; 3]).unwrap(),
            alpha: None,
        };
        let config = PipelineConfig { bounds: Some(bounds.clone()), ..Default::default() };
        let prepared = prepare(&p, &spec, &[], &config).unwrap();
        assert_eq!(prepared.bounds, bounds);
        let r = solve_prepared(&p, &spec, &[], &config, &prepared).unwrap();
        let o = enumerate(&p, &spec, &[], None, DEFAULT_CAP).unwrap();
        assert!((r.criterion_value - o.value).abs() <= 1e-7 * o.value);
    }
}
