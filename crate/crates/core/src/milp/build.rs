use crate::bounds::CovBounds;
use crate::error::{OptexError, Result};
use crate::linalg::{invert, SymMatrix};
use crate::model::{info_matrix, psi_value, CriterionSpec, DesignProblem, ExactDesign};

use super::{MilpModel, Row, Sense, VarLayout};

/// Side constraints on designs or on the covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtraConstraint {
    /// `sum_i a_i d_i (sense) rhs` over design points.
    DesignLinear {
        name: Option<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    },
    /// `sum a_jk c_jk (sense) rhs` over covariance entries.
    CovarianceLinear {
        name: Option<String>,
        coeffs: Vec<((usize, usize), f64)>,
        sense: Sense,
        rhs: f64,
    },
    /// `d_point >= count`.
    Augmentation { point: usize, count: usize },
}

impl ExtraConstraint {
    /// Checks the constraint at a design with covariance `sigma`.
    pub fn is_satisfied(&self, design: &ExactDesign, sigma: &SymMatrix, tol: f64) -> bool {
        let holds = |lhs: f64, sense: Sense, rhs: f64| match sense {
            Sense::Le => lhs <= rhs + tol,
            Sense::Ge => lhs >= rhs - tol,
            Sense::Eq => (lhs - rhs).abs() <= tol,
        };
        match self {
            ExtraConstraint::DesignLinear { coeffs, sense, rhs, .. } => {
                let lhs = coeffs.iter().map(|&(i, a)| a * design.counts()[i] as f64).sum();
                holds(lhs, *sense, *rhs)
            }
            ExtraConstraint::CovarianceLinear { coeffs, sense, rhs, .. } => {
                let lhs = coeffs.iter().map(|&((j, k), a)| a * sigma.get(j, k)).sum();
                holds(lhs, *sense, *rhs)
            }
            ExtraConstraint::Augmentation { point, count } => design.counts()[*point] >= *count,
        }
    }

    /// `true` for constraints that only involve the design counts.
    pub fn is_design_only(&self) -> bool {
        !matches!(self, ExtraConstraint::CovarianceLinear { .. })
    }

    pub(crate) fn validate(&self, n: usize, m: usize) -> Result<()> {
        match self {
            ExtraConstraint::DesignLinear { coeffs, rhs, .. } => {
                if let Some(&(i, _)) = coeffs.iter().find(|(i, _)| *i >= n) {
                    return Err(OptexError::InvalidProblem(format!("constraint references point {i}, n = {n}")));
                }
                finite(coeffs.iter().map(|c| c.1).chain([*rhs]))
            }
            ExtraConstraint::CovarianceLinear { coeffs, rhs, .. } => {
                if let Some(((j, k), _)) = coeffs.iter().find(|((j, k), _)| *j >= m || *k >= m) {
                    return Err(OptexError::InvalidProblem(format!(
                        "covariance constraint references ({j}, {k}), m = {m}"
                    )));
                }
                finite(coeffs.iter().map(|c| c.1).chain([*rhs]))
            }
            ExtraConstraint::Augmentation { point, .. } => {
                if *point >= n {
                    return Err(OptexError::InvalidProblem(format!("augmentation of point {point}, n = {n}")));
                }
                Ok(())
            }
        }
    }
}

fn finite(mut vals: impl Iterator<Item = f64>) -> Result<()> {
    if vals.all(f64::is_finite) {
        Ok(())
    } else {
        Err(OptexError::InvalidProblem("constraint has non-finite coefficients".into()))
    }
}

/// Assembles the linearized program: the inverse-equality block, the four
/// McCormick families, the cardinality row, one epigraph row per block,
/// then the extra constraints.
pub fn build(
    problem: &DesignProblem,
    spec: &CriterionSpec,
    bounds: &CovBounds,
    extras: &[ExtraConstraint],
) -> Result<MilpModel> {
    let (n, m) = (problem.n(), problem.m());
    if spec.m() != m {
        return Err(OptexError::DimensionMismatch(format!("criterion has m = {}, problem m = {m}", spec.m())));
    }
    if bounds.lower.dim() != m || bounds.upper.dim() != m {
        return Err(OptexError::DimensionMismatch("bounds do not match m".into()));
    }
    for j in 0..m {
        for k in 0..m {
            if !bounds.lower.get(j, k).is_finite() || !bounds.upper.get(j, k).is_finite() {
                return Err(OptexError::InfiniteBound { row: j, col: k });
            }
        }
    }
    for e in extras {
        e.validate(n, m)?;
    }

    let layout = VarLayout { n, m };
    let nv = layout.num_vars();
    let mut rows = Vec::with_capacity(m * m + 4 * n * m * m + 1 + spec.k() + extras.len());

    let elementary: Vec<_> = (0..n).map(|i| problem.elementary(i)).collect();
    for k in 0..m {
        for p in 0..m {
            let mut coeffs = Vec::with_capacity(n * m);
            for (i, mi) in elementary.iter().enumerate() {
                for j in 0..m {
                    coeffs.push((layout.z(i, j, k), mi[(p, j)]));
                }
            }
            rows.push(Row {
                name: format!("eq_{p}_{k}"),
                coeffs,
                sense: Sense::Eq,
                rhs: if p == k { 1.0 } else { 0.0 },
            });
        }
    }

    for i in 0..n {
        let d = layout.d(i);
        for j in 0..m {
            for k in 0..m {
                let (l, u) = (bounds.lower.get(j, k), bounds.upper.get(j, k));
                let (z, c) = (layout.z(i, j, k), layout.c(j, k));
                rows.push(Row {
                    name: format!("mc1_{i}_{j}_{k}"),
                    coeffs: vec![(z, 1.0), (d, -l)],
                    sense: Sense::Ge,
                    rhs: 0.0,
                });
                rows.push(Row {
                    name: format!("mc2_{i}_{j}_{k}"),
                    coeffs: vec![(z, 1.0), (d, -u), (c, -1.0)],
                    sense: Sense::Ge,
                    rhs: 0.0 - u,
                });
                rows.push(Row {
                    name: format!("mc3_{i}_{j}_{k}"),
                    coeffs: vec![(z, 1.0), (d, -u)],
                    sense: Sense::Le,
                    rhs: 0.0,
                });
                rows.push(Row {
                    name: format!("mc4_{i}_{j}_{k}"),
                    coeffs: vec![(z, 1.0), (d, -l), (c, -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0 - l,
                });
            }
        }
    }

    rows.push(Row {
        name: "card".into(),
        coeffs: (0..n).map(|i| (layout.d(i), 1.0)).collect(),
        sense: Sense::Eq,
        rhs: problem.run_budget() as f64,
    });

    for (l, g) in spec.grams().iter().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(m * m + 1);
        for k in 0..m {
            for j in 0..m {
                coeffs.push((layout.c(j, k), -g.get(j, k)));
            }
        }
        coeffs.push((layout.phi(), 1.0));
        rows.push(Row { name: format!("epi_{l}"), coeffs, sense: Sense::Ge, rhs: 0.0 });
    }

    let mut var_lower = vec![f64::NEG_INFINITY; nv];
    let mut var_upper = vec![f64::INFINITY; nv];
    let mut integrality = vec![false; nv];
    for i in 0..n {
        var_lower[layout.d(i)] = 0.0;
        var_upper[layout.d(i)] = 1.0;
        integrality[layout.d(i)] = true;
    }

    for (t, e) in extras.iter().enumerate() {
        match e {
            ExtraConstraint::DesignLinear { name, coeffs, sense, rhs } => rows.push(Row {
                name: name.clone().unwrap_or_else(|| format!("extra_{t}")),
                coeffs: coeffs.iter().map(|&(i, a)| (layout.d(i), a)).collect(),
                sense: *sense,
                rhs: *rhs,
            }),
            ExtraConstraint::CovarianceLinear { name, coeffs, sense, rhs } => rows.push(Row {
                name: name.clone().unwrap_or_else(|| format!("extra_{t}")),
                coeffs: coeffs.iter().map(|&((j, k), a)| (layout.c(j, k), a)).collect(),
                sense: *sense,
                rhs: *rhs,
            }),
            ExtraConstraint::Augmentation { point, count } => match count {
                0 => {}
                1 => var_lower[layout.d(*point)] = 1.0,
                _ => {
                    return Err(OptexError::InvalidProblem(format!(
                        "augmentation of point {point} with {count} trials needs replication caps"
                    )))
                }
            },
        }
    }

    let mut model = MilpModel {
        name: "optex".into(),
        var_names: layout.names(),
        objective: vec![(layout.phi(), 1.0)],
        rows,
        var_lower,
        var_upper,
        integrality,
        layout: Some(layout),
    };
    model.finalize();
    Ok(model)
}

/// One `vec(B_l B_l')' c <= limit` row per block of `spec2`.
pub fn covariance_constraint_from_criterion(spec2: &CriterionSpec, limit: f64) -> Vec<ExtraConstraint> {
    let m = spec2.m();
    spec2
        .grams()
        .iter()
        .enumerate()
        .map(|(l, g)| {
            let mut coeffs = Vec::new();
            for k in 0..m {
                for j in 0..m {
                    let v = g.get(j, k);
                    if v != 0.0 {
                        coeffs.push(((j, k), v));
                    }
                }
            }
            ExtraConstraint::CovarianceLinear {
                name: Some(format!("cov_{}_{l}", spec2.kind().to_string().to_lowercase())),
                coeffs,
                sense: Sense::Le,
                rhs: limit,
            }
        })
        .collect()
}

/// The point `(z, d, c, phi)` of a binary design with `c = vec(M(d)^-1)`,
/// `z_i = d_i c` and `phi = Psi_B(Sigma)`.
pub fn embed_design(
    model: &MilpModel,
    problem: &DesignProblem,
    spec: &CriterionSpec,
    design: &ExactDesign,
) -> Result<Vec<f64>> {
    let layout = model
        .layout
        .ok_or_else(|| OptexError::Structure("model has no variable layout".into()))?;
    design.validate(problem, true)?;
    if layout.n != problem.n() || layout.m != problem.m() {
        return Err(OptexError::DimensionMismatch("model layout does not match the problem".into()));
    }
    let m_info = info_matrix(problem, design)?;
    let ratio = m_info.conditioning_ratio();
    let sigma = invert(&m_info).map_err(|_| OptexError::SingularInformation { ratio })?;
    let mut x = vec![0.0; layout.num_vars()];
    for (i, &di) in design.counts().iter().enumerate() {
        x[layout.d(i)] = di as f64;
        if di == 1 {
            for j in 0..layout.m {
                for k in 0..layout.m {
                    x[layout.z(i, j, k)] = sigma.get(j, k);
                }
            }
        }
    }
    for j in 0..layout.m {
        for k in 0..layout.m {
            x[layout.c(j, k)] = sigma.get(j, k);
        }
    }
    x[layout.phi()] = psi_value(spec, &sigma)?;
    Ok(x)
}

/// Largest row or bound violation of `x`.
pub fn check_feasible(model: &MilpModel, x: &[f64]) -> f64 {
    let rows = model.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
    let bounds = x
        .iter()
        .zip(model.var_lower.iter().zip(&model.var_upper))
        .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max);
    rows.max(bounds)
}
