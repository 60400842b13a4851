use crate::error::{OptexError, Result};
use crate::model::{DesignProblem, ExactDesign};

use super::ExtraConstraint;

/// Correspondence between replicated (binary) points and original points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicationMap {
    origin: Vec<usize>,
    offsets: Vec<usize>,
    copies: Vec<usize>,
}

impl ReplicationMap {
    /// Identity map on `n` points.
    pub fn identity(n: usize) -> Self {
        Self { origin: (0..n).collect(), offsets: (0..n).collect(), copies: vec![1; n] }
    }

    /// Number of original points.
    pub fn original_len(&self) -> usize {
        self.copies.len()
    }

    /// Number of expanded points.
    pub fn expanded_len(&self) -> usize {
        self.origin.len()
    }

    /// Original point of expanded point `t`.
    pub fn origin(&self, t: usize) -> usize {
        self.origin[t]
    }

    /// Expanded indices belonging to original point `i`.
    pub fn replicates(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.copies[i]
    }

    /// Replication counts per original point.
    pub fn fold(&self, expanded: &ExactDesign) -> ExactDesign {
        let mut d = vec![0; self.original_len()];
        for (t, &v) in expanded.counts().iter().enumerate() {
            d[self.origin[t]] += v;
        }
        ExactDesign::new(d)
    }

    /// Binary design using the first `d_i` replicates of every point.
    pub fn unfold(&self, design: &ExactDesign) -> Result<ExactDesign> {
        if design.len() != self.original_len() {
            return Err(OptexError::DimensionMismatch(format!(
                "design has length {}, expected {}",
                design.len(),
                self.original_len()
            )));
        }
        let mut d = vec![0; self.expanded_len()];
        for (i, &di) in design.counts().iter().enumerate() {
            if di > self.copies[i] {
                return Err(OptexError::InvalidDesign(format!(
                    "point {i} has {di} trials, cap allows {}",
                    self.copies[i]
                )));
            }
            for t in self.replicates(i).take(di) {
                d[t] = 1;
            }
        }
        Ok(ExactDesign::new(d))
    }

    /// Rewrites a constraint on original points in terms of replicates.
    pub fn expand_constraint(&self, e: &ExtraConstraint) -> Result<Vec<ExtraConstraint>> {
        Ok(match e {
            ExtraConstraint::DesignLinear { name, coeffs, sense, rhs } => {
                let mut out = Vec::new();
                for &(i, a) in coeffs {
                    if i >= self.original_len() {
                        return Err(OptexError::InvalidProblem(format!("constraint references point {i}")));
                    }
                    out.extend(self.replicates(i).map(|t| (t, a)));
                }
                vec![ExtraConstraint::DesignLinear { name: name.clone(), coeffs: out, sense: *sense, rhs: *rhs }]
            }
            ExtraConstraint::CovarianceLinear { .. } => vec![e.clone()],
            ExtraConstraint::Augmentation { point, count } => {
                if *point >= self.original_len() {
                    return Err(OptexError::InvalidProblem(format!("augmentation of point {point}")));
                }
                if *count > self.copies[*point] {
                    return Err(OptexError::InvalidProblem(format!(
                        "augmentation of point {point} with {count} trials exceeds its cap"
                    )));
                }
                self.replicates(*point)
                    .take(*count)
                    .map(|t| ExtraConstraint::Augmentation { point: t, count: 1 })
                    .collect()
            }
        })
    }
}

/// Replicates point `i` `min(N_i, N)` times so that binary designs of the
/// expanded problem correspond to designs with `d_i <= N_i`.
pub fn expand_replications(problem: &DesignProblem, caps: &[usize]) -> Result<(DesignProblem, ReplicationMap)> {
    if caps.len() != problem.n() {
        return Err(OptexError::DimensionMismatch(format!("{} caps for {} points", caps.len(), problem.n())));
    }
    let runs = problem.run_budget();
    let copies: Vec<usize> = caps.iter().map(|&c| c.min(runs)).collect();
    let capacity: usize = copies.iter().sum();
    if capacity < runs {
        return Err(OptexError::InfeasibleCaps { capacity, runs });
    }
    let mut origin = Vec::with_capacity(capacity);
    let mut offsets = Vec::with_capacity(problem.n());
    let mut regressors = Vec::with_capacity(capacity);
    let mut labels = Vec::with_capacity(capacity);
    for (i, &c) in copies.iter().enumerate() {
        offsets.push(origin.len());
        for _ in 0..c {
            origin.push(i);
            regressors.push(problem.regressor(i).to_vec());
            labels.push(problem.label(i));
        }
    }
    let expanded = DesignProblem::new_unrestricted(regressors, runs, problem.labels().map(|_| labels))?;
    Ok((expanded, ReplicationMap { origin, offsets, copies }))
}
