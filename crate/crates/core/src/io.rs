//! JSON input files: problems, custom criteria, constraints and designs.

use serde::{Deserialize, Serialize};

use crate::error::{OptexError, Result};
use crate::linalg::DenseMatrix;
use crate::milp::{covariance_constraint_from_criterion, ExtraConstraint, Sense};
use crate::model::{CriterionKind, CriterionSpec, DesignProblem, ExactDesign};

fn schema(what: &str, e: serde_json::Error) -> OptexError {
    OptexError::Schema(format!("{what}: {e}"))
}

/// `{"regressors": [[..], ..], "N": 5, "labels": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub regressors: Vec<Vec<f64>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema("problem file", e))
    }

    /// Builds the problem, with `runs` overriding the file's `N`. With
    /// `replicated` the checks `N <= n` and `n >= m` are skipped since
    /// points may then be used more than once.
    pub fn into_problem(self, runs: Option<usize>, replicated: bool) -> Result<DesignProblem> {
        let runs = runs
            .or(self.runs)
            .ok_or_else(|| OptexError::Schema("problem file: the run budget `N` is missing".into()))?;
        if replicated {
            let p = DesignProblem::new_unrestricted(self.regressors, runs, self.labels)?;
            if p.m() < 2 || runs < p.m() {
                return Err(OptexError::InvalidProblem(format!(
                    "need m >= 2 and N >= m, got N = {runs}, m = {}",
                    p.m()
                )));
            }
            Ok(p)
        } else {
            DesignProblem::new(self.regressors, runs, self.labels)
        }
    }
}

/// `{"blocks": [B_1, B_2, ..]}` with each block given by its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksFile {
    pub blocks: Vec<DenseMatrix>,
}

impl BlocksFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema("criterion file", e))
    }

    pub fn into_spec(self, m: usize) -> Result<CriterionSpec> {
        let spec = CriterionSpec::custom(self.blocks)?;
        if spec.m() != m {
            return Err(OptexError::DimensionMismatch(format!("criterion blocks have {} rows, expected {m}", spec.m())));
        }
        Ok(spec)
    }
}

/// One entry of a constraint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintEntry {
    /// `sum_t coeffs_t d_{points_t} (sense) rhs`; coefficients default to 1.
    Design {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(alias = "vars")]
        points: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeffs: Option<Vec<f64>>,
        sense: Sense,
        rhs: f64,
    },
    /// Either `sum_t coeffs_t c_{pairs_t} (sense) rhs`, or
    /// `Phi(Sigma) <= limit` for a preset criterion.
    Covariance {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<(usize, usize)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeffs: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sense: Option<Sense>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rhs: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        criterion: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<f64>,
    },
    /// `d_point >= count`.
    Augmentation { point: usize, count: usize },
}

fn coefficients(coeffs: Option<Vec<f64>>, len: usize, what: &str) -> Result<Vec<f64>> {
    let c = coeffs.unwrap_or_else(|| vec![1.0; len]);
    if c.len() != len {
        return Err(OptexError::Schema(format!("{what}: {} coefficients for {len} entries", c.len())));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(OptexError::Schema(format!("{what}: coefficients must be finite")));
    }
    Ok(c)
}

impl ConstraintEntry {
    /// Converts to model constraints, checking indices against `problem`.
    pub fn resolve(self, problem: &DesignProblem) -> Result<Vec<ExtraConstraint>> {
        let (n, m) = (problem.n(), problem.m());
        match self {
            ConstraintEntry::Design { name, points, coeffs, sense, rhs } => {
                let what = "design constraint";
                if let Some(&i) = points.iter().find(|&&i| i >= n) {
                    return Err(OptexError::Schema(format!("{what}: point {i} out of range 0..{n}")));
                }
                if !rhs.is_finite() {
                    return Err(OptexError::Schema(format!("{what}: rhs must be finite")));
                }
                let c = coefficients(coeffs, points.len(), what)?;
                Ok(vec![ExtraConstraint::DesignLinear { name, coeffs: points.into_iter().zip(c).collect(), sense, rhs }])
            }
            ConstraintEntry::Covariance { name, pairs, coeffs, sense, rhs, criterion, limit } => {
                let what = "covariance constraint";
                match (pairs, criterion) {
                    (Some(pairs), None) => {
                        if limit.is_some() {
                            return Err(OptexError::Schema(format!("{what}: `limit` goes with `criterion`")));
                        }
                        let (Some(sense), Some(rhs)) = (sense, rhs) else {
                            return Err(OptexError::Schema(format!("{what}: `sense` and `rhs` are required")));
                        };
                        if let Some(&(j, k)) = pairs.iter().find(|&&(j, k)| j >= m || k >= m) {
                            return Err(OptexError::Schema(format!("{what}: entry ({j}, {k}) out of range for m = {m}")));
                        }
                        if !rhs.is_finite() {
                            return Err(OptexError::Schema(format!("{what}: rhs must be finite")));
                        }
                        let c = coefficients(coeffs, pairs.len(), what)?;
                        Ok(vec![ExtraConstraint::CovarianceLinear { name, coeffs: pairs.into_iter().zip(c).collect(), sense, rhs }])
                    }
                    (None, Some(tag)) => {
                        if coeffs.is_some() || sense.is_some() || rhs.is_some() || name.is_some() {
                            return Err(OptexError::Schema(format!(
                                "{what}: a criterion limit takes only `criterion` and `limit`"
                            )));
                        }
                        let limit = limit
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| OptexError::Schema(format!("{what}: a finite `limit` is required")))?;
                        let kind: CriterionKind = tag.parse().map_err(|e: OptexError| OptexError::Schema(e.to_string()))?;
                        let spec = CriterionSpec::preset(kind, problem)?;
                        Ok(covariance_constraint_from_criterion(&spec, limit))
                    }
                    _ => Err(OptexError::Schema(format!("{what}: give either `pairs` or `criterion`"))),
                }
            }
            ConstraintEntry::Augmentation { point, count } => {
                if point >= n {
                    return Err(OptexError::Schema(format!("augmentation: point {point} out of range 0..{n}")));
                }
                Ok(vec![ExtraConstraint::Augmentation { point, count }])
            }
        }
    }
}

/// Parses a constraint file (a JSON list of [`ConstraintEntry`]).
pub fn parse_constraints(text: &str, problem: &DesignProblem) -> Result<Vec<ExtraConstraint>> {
    let entries: Vec<ConstraintEntry> = serde_json::from_str(text).map_err(|e| schema("constraint file", e))?;
    let mut out = Vec::new();
    for e in entries {
        out.extend(e.resolve(problem)?);
    }
    Ok(out)
}

/// `{"design": [d_1, .., d_n]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub design: ExactDesign,
}

pub fn parse_design(text: &str) -> Result<ExactDesign> {
    let f: DesignFile = serde_json::from_str(text).map_err(|e| schema("design file", e))?;
    Ok(f.design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::quadratic_grid;

    #[test]
    fn problem_file() {
        let p = ProblemFile::from_json(r#"{"regressors": [[1, 0], [1, 1], [1, 2]], "N": 2, "labels": ["a", "b", "c"]}"#)
            .unwrap()
            .into_problem(None, false)
            .unwrap();
        assert_eq!((p.n(), p.m(), p.run_budget()), (3, 2, 2));
        assert_eq!(p.label(1), "b");

        let f = ProblemFile::from_json(r#"{"regressors": [[1, 0], [1, 1]]}"#).unwrap();
        assert!(matches!(f.clone().into_problem(None, false), Err(OptexError::Schema(_))));
        assert!(matches!(f.clone().into_problem(Some(3), false), Err(OptexError::InvalidProblem(_))));
        assert_eq!(f.into_problem(Some(3), true).unwrap().run_budget(), 3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r = ProblemFile::from_json(r#"{"regressors": [[1, 0]], "N": 1, "weights": []}"#);
        assert!(matches!(r, Err(OptexError::Schema(m)) if m.contains("weights")));
        let p = quadratic_grid(5, 3).unwrap();
        let r = parse_constraints(r#"[{"kind": "design", "points": [0], "sense": ">=", "rhs": 1, "x": 2}]"#, &p);
        assert!(matches!(r, Err(OptexError::Schema(_))));
        let r = parse_constraints(r#"[{"kind": "other"}]"#, &p);
        assert!(matches!(r, Err(OptexError::Schema(_))));
    }

    #[test]
    fn constraint_kinds() {
        let p = quadratic_grid(5, 3).unwrap();
        let text = r#"[
            {"kind": "design", "name": "mid", "vars": [1, 2, 3], "sense": ">=", "rhs": 1},
            {"kind": "design", "points": [0, 4], "coeffs": [2, 3], "sense": "<=", "rhs": 4},
            {"kind": "covariance", "pairs": [[0, 0], [1, 2]], "coeffs": [1, -1], "sense": "<=", "rhs": 2},
            {"kind": "covariance", "criterion": "g", "limit": 0.9},
            {"kind": "augmentation", "point": 2, "count": 1}
        ]"#;
        let c = parse_constraints(text, &p).unwrap();
        assert_eq!(c.len(), 2 + 1 + 5 + 1);
        assert_eq!(
            c[0],
            ExtraConstraint::DesignLinear {
                name: Some("mid".into()),
                coeffs: vec![(1, 1.0), (2, 1.0), (3, 1.0)],
                sense: Sense::Ge,
                rhs: 1.0
            }
        );
        assert_eq!(
            c[2],
            ExtraConstraint::CovarianceLinear {
                name: None,
                coeffs: vec![((0, 0), 1.0), ((1, 2), -1.0)],
                sense: Sense::Le,
                rhs: 2.0
            }
        );
        assert_eq!(c[8], ExtraConstraint::Augmentation { point: 2, count: 1 });
    }

    #[test]
    fn bad_constraints() {
        let p = quadratic_grid(5, 3).unwrap();
        for text in [
            r#"[{"kind": "design", "points": [5], "sense": ">=", "rhs": 1}]"#,
            r#"[{"kind": "design", "points": [0, 1], "coeffs": [1], "sense": ">=", "rhs": 1}]"#,
            r#"[{"kind": "covariance", "pairs": [[0, 3]], "sense": "<=", "rhs": 1}]"#,
            r#"[{"kind": "covariance", "pairs": [[0, 0]], "rhs": 1}]"#,
            r#"[{"kind": "covariance", "criterion": "A"}]"#,
            r#"[{"kind": "covariance", "criterion": "Z", "limit": 1}]"#,
            r#"[{"kind": "covariance", "criterion": "A", "limit": 1, "pairs": [[0, 0]]}]"#,
            r#"[{"kind": "augmentation", "point": 9, "count": 1}]"#,
            r#"{"kind": "design"}"#,
        ] {
            assert!(matches!(parse_constraints(text, &p), Err(OptexError::Schema(_))), "{text}");
        }
    }

    #[test]
    fn blocks_and_designs() {
        let spec = BlocksFile::from_json(r#"{"blocks": [[[1], [0]], [[0], [2]]]}"#).unwrap().into_spec(2).unwrap();
        assert_eq!(spec.k(), 2);
        assert_eq!(spec.kind(), CriterionKind::Custom);
        let r = BlocksFile::from_json(r#"{"blocks": [[[1, 0], [0, 1]]]}"#).unwrap().into_spec(3);
        assert!(matches!(r, Err(OptexError::DimensionMismatch(_))));
        assert_eq!(parse_design(r#"{"design": [1, 0, 2]}"#).unwrap().counts(), &[1, 0, 2]);
        assert!(parse_design(r#"{"design": [1, -1]}"#).is_err());
    }
}
