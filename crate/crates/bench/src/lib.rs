//! Fixtures shared by the benchmarks.

use optex_core::model::quadratic_grid;
use optex_core::{CriterionKind, CriterionSpec, DesignProblem};

/// Quadratic regression on `n` equispaced points in [-1, 1] with `runs` trials.
pub fn quadratic(n: usize, runs: usize, kind: CriterionKind) -> (DesignProblem, CriterionSpec) {
    let problem = quadratic_grid(n, runs).expect("valid grid");
    let spec = CriterionSpec::preset(kind, &problem).expect("preset");
    (problem, spec)
}
