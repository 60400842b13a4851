use crate::error::{OptexError, Result};
use crate::milp::{MilpModel, Sense};

/// Compressed sparse row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn new(entries: &[(usize, f64)]) -> Self {
        let mut e: Vec<(usize, f64)> = entries.to_vec();
        crate::milp::compress(&mut e);
        Self { idx: e.iter().map(|p| p.0).collect(), val: e.iter().map(|p| p.1).collect() }
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&j, &v)| v * x[j]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `min c'x` subject to `row_lo <= Ax <= row_hi`, `col_lo <= x <= col_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub(crate) row_norm: Vec<f64>,
}

impl LpProblem {
    pub fn new(cost: Vec<f64>, col_lo: Vec<f64>, col_hi: Vec<f64>) -> Self {
        Self { cost, col_lo, col_hi, rows: Vec::new(), row_lo: Vec::new(), row_hi: Vec::new(), row_norm: Vec::new() }
    }

    pub fn from_model(model: &MilpModel) -> Self {
        let mut cost = vec![0.0; model.num_vars()];
        for &(j, c) in &model.objective {
            cost[j] += c;
        }
        let mut p = Self::new(cost, model.var_lower.clone(), model.var_upper.clone());
        for row in &model.rows {
            let (lo, hi) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            p.push_row(SparseRow::new(&row.coeffs), lo, hi);
        }
        p
    }

    pub fn ncols(&self) -> usize {
        self.cost.len()
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn push_row(&mut self, row: SparseRow, lo: f64, hi: f64) {
        let norm = row.norm().max(1e-300);
        self.rows.push(row);
        self.row_lo.push(lo);
        self.row_hi.push(hi);
        self.row_norm.push(norm);
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.ncols();
        if self.col_lo.len() != n || self.col_hi.len() != n {
            return Err(OptexError::DimensionMismatch("bound vectors do not match the cost vector".into()));
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(OptexError::InvalidProblem("non-finite objective coefficient".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.idx.iter().any(|&j| j >= n) || row.val.iter().any(|v| !v.is_finite()) {
                return Err(OptexError::InvalidProblem(format!("row {r} is malformed")));
            }
        }
        Ok(())
    }

    /// Bounds implied by the rows through repeated activity propagation,
    /// slightly widened; infinite where nothing can be inferred.
    pub fn implied_bounds_from(&self, lo0: &[f64], hi0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        const CAP: f64 = 1e12;
        let mut lo = lo0.to_vec();
        let mut hi = hi0.to_vec();
        for _ in 0..20 {
            let mut changed = false;
            for (r, row) in self.rows.iter().enumerate() {
                let (rlo, rhi) = (self.row_lo[r], self.row_hi[r]);
                let mut min_fin = 0.0;
                let mut min_inf = 0usize;
                let mut max_fin = 0.0;
                let mut max_inf = 0usize;
                for (&j, &a) in row.idx.iter().zip(&row.val) {
                    let (l, u) = if a > 0.0 { (a * lo[j], a * hi[j]) } else { (a * hi[j], a * lo[j]) };
                    if l.is_finite() {
                        min_fin += l;
                    } else {
                        min_inf += 1;
                    }
                    if u.is_finite() {
                        max_fin += u;
                    } else {
                        max_inf += 1;
                    }
                }
                for (&j, &a) in row.idx.iter().zip(&row.val) {
                    let (l, u) = if a > 0.0 { (a * lo[j], a * hi[j]) } else { (a * hi[j], a * lo[j]) };
                    let min_rest = match (min_inf, l.is_finite()) {
                        (0, _) => Some(min_fin - l),
                        (1, false) => Some(min_fin),
                        _ => None,
                    };
                    let max_rest = match (max_inf, u.is_finite()) {
                        (0, _) => Some(max_fin - u),
                        (1, false) => Some(max_fin),
                        _ => None,
                    };
                    let mut cand_lo = f64::NEG_INFINITY;
                    let mut cand_hi = f64::INFINITY;
                    // a x_j <= rhi - min_rest and a x_j >= rlo - max_rest
                    if let (Some(mr), true) = (min_rest, rhi.is_finite()) {
                        let v = (rhi - mr) / a;
                        if a > 0.0 {
                            cand_hi = v;
                        } else {
                            cand_lo = v;
                        }
                    }
                    if let (Some(mr), true) = (max_rest, rlo.is_finite()) {
                        let v = (rlo - mr) / a;
                        if a > 0.0 {
                            cand_lo = cand_lo.max(v);
                        } else {
                            cand_hi = cand_hi.min(v);
                        }
                    }
                    if cand_lo.is_finite() && cand_lo.abs() < CAP {
                        let widened = cand_lo - 1e-9 * (1.0 + cand_lo.abs());
                        if widened > lo[j] + 1e-9 * (1.0 + lo[j].abs()) || !lo[j].is_finite() {
                            lo[j] = widened;
                            changed = true;
                        }
                    }
                    if cand_hi.is_finite() && cand_hi.abs() < CAP {
                        let widened = cand_hi + 1e-9 * (1.0 + cand_hi.abs());
                        if widened < hi[j] - 1e-9 * (1.0 + hi[j].abs()) || !hi[j].is_finite() {
                            hi[j] = widened;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (lo, hi)
    }
}

/// Result of removing fixed columns and singleton rows.
pub(crate) enum Presolved {
    Infeasible,
    Reduced {
        prob: LpProblem,
        /// Original index of each kept column.
        kept: Vec<usize>,
        /// Values of all columns, final for the removed ones.
        values: Vec<f64>,
    },
}

impl LpProblem {
    /// Repeatedly turns singleton rows into column bounds and substitutes
    /// columns whose bounds coincide.
    pub(crate) fn presolve(&self) -> Presolved {
        const TOL: f64 = 1e-9;
        let n = self.ncols();
        let mut lo = self.col_lo.clone();
        let mut hi = self.col_hi.clone();
        let mut fixed = vec![false; n];
        let mut row_alive = vec![true; self.nrows()];
        loop {
            let mut changed = false;
            for j in 0..n {
                if !fixed[j] && lo[j].is_finite() && hi[j] - lo[j] <= 1e-12 * (1.0 + lo[j].abs()) {
                    if lo[j] > hi[j] + TOL * (1.0 + lo[j].abs()) {
                        return Presolved::Infeasible;
                    }
                    let v = 0.5 * (lo[j] + hi[j]);
                    lo[j] = v;
                    hi[j] = v;
                    fixed[j] = true;
                    changed = true;
                }
            }
            for (r, row) in self.rows.iter().enumerate() {
                if !row_alive[r] {
                    continue;
                }
                let mut shift = 0.0;
                let mut free = None;
                let mut count = 0;
                for (&j, &a) in row.idx.iter().zip(&row.val) {
                    if fixed[j] {
                        shift += a * lo[j];
                    } else {
                        count += 1;
                        free = Some((j, a));
                    }
                }
                let (rlo, rhi) = (self.row_lo[r] - shift, self.row_hi[r] - shift);
                match (count, free) {
                    (0, _) => {
                        let scale = 1.0 + self.row_lo[r].abs().min(self.row_hi[r].abs()).min(1e12) + shift.abs();
                        if rlo > TOL * scale || rhi < -TOL * scale {
                            return Presolved::Infeasible;
                        }
                        row_alive[r] = false;
                    }
                    (1, Some((j, a))) => {
                        let (mut l, mut u) = if a > 0.0 { (rlo / a, rhi / a) } else { (rhi / a, rlo / a) };
                        if l.is_nan() {
                            l = f64::NEG_INFINITY;
                        }
                        if u.is_nan() {
                            u = f64::INFINITY;
                        }
                        lo[j] = lo[j].max(l);
                        hi[j] = hi[j].min(u);
                        if lo[j] > hi[j] {
                            if lo[j] > hi[j] + TOL * (1.0 + lo[j].abs().min(hi[j].abs())) {
                                return Presolved::Infeasible;
                            }
                            let v = 0.5 * (lo[j] + hi[j]);
                            lo[j] = v;
                            hi[j] = v;
                        }
                        row_alive[r] = false;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }

        let kept: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
        let mut pos = vec![usize::MAX; n];
        for (p, &j) in kept.iter().enumerate() {
            pos[j] = p;
        }
        let mut prob = LpProblem::new(
            kept.iter().map(|&j| self.cost[j]).collect(),
            kept.iter().map(|&j| lo[j]).collect(),
            kept.iter().map(|&j| hi[j]).collect(),
        );
        for (r, row) in self.rows.iter().enumerate() {
            if !row_alive[r] {
                continue;
            }
            let mut shift = 0.0;
            let mut entries = Vec::new();
            for (&j, &a) in row.idx.iter().zip(&row.val) {
                if fixed[j] {
                    shift += a * lo[j];
                } else {
                    entries.push((pos[j], a));
                }
            }
            prob.push_row(SparseRow::new(&entries), self.row_lo[r] - shift, self.row_hi[r] - shift);
        }
        let values = (0..n).map(|j| if fixed[j] { lo[j] } else { 0.0 }).collect();
        Presolved::Reduced { prob, kept, values }
    }
}
