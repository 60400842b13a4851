use nalgebra::DMatrix;

use crate::error::Result;
use crate::lp::{LpOptions, LpProblem, LpSolver, SolveOutcome, SparseRow};
use crate::milp::{DesignStructure, MilpModel, Sense};

use super::relax::{trace_prod, Cut, Evaluation};

/// Model rows that touch only `d` and `phi`, as `(entries, lo, hi)` in
/// master columns.
fn design_rows(model: &MilpModel, s: &DesignStructure) -> Vec<(Vec<(usize, f64)>, f64, f64)> {
    let layout = s.layout;
    let d = layout.d_range();
    let phi = layout.phi();
    let mut out = Vec::new();
    for row in &model.rows {
        let mut entries = Vec::with_capacity(row.coeffs.len());
        let mut ok = true;
        for &(col, a) in &row.coeffs {
            if d.contains(&col) {
                entries.push((col - d.start, a));
            } else if col == phi {
                entries.push((layout.n, a));
            } else {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let (lo, hi) = match row.sense {
            Sense::Le => (f64::NEG_INFINITY, row.rhs),
            Sense::Ge => (row.rhs, f64::INFINITY),
            Sense::Eq => (row.rhs, row.rhs),
        };
        out.push((entries, lo, hi));
    }
    out
}

/// `tr(A Sigma(d)) <= limit` with `A` positive semidefinite, hence convex in `d`.
pub(crate) struct ConvexRow {
    a: DMatrix<f64>,
    limit: f64,
}

impl ConvexRow {
    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn value(&self, ev: &Evaluation) -> f64 {
        trace_prod(&self.a, &ev.sigma)
    }

    /// Tangent `sum_i g_i d_i <= rhs` of the row at `w`.
    pub fn tangent(&self, s: &DesignStructure, w: &[f64], ev: &Evaluation) -> Option<(Vec<(usize, f64)>, f64)> {
        let h = self.value(ev);
        let b = &ev.sigma * &self.a * &ev.sigma;
        let grad: Vec<f64> = s.elementary.iter().map(|mi| -trace_prod(mi, &b)).collect();
        if grad.iter().any(|v| !v.is_finite() || v.abs() > 1e8) {
            return None;
        }
        let mut rhs = self.limit - h + grad.iter().zip(w).map(|(g, x)| g * x).sum::<f64>();
        rhs += 1e-10 * (1.0 + rhs.abs() + h.abs());
        let entries = grad.iter().enumerate().filter(|(_, &g)| g != 0.0).map(|(i, &g)| (i, g)).collect();
        Some((entries, rhs))
    }
}

/// Covariance rows that are convex in `d`.
fn convex_rows(model: &MilpModel, s: &DesignStructure) -> Vec<ConvexRow> {
    let layout = s.layout;
    let m = layout.m;
    let c = layout.c_range();
    let mut out = Vec::new();
    for row in &model.rows {
        if row.coeffs.is_empty() || !row.coeffs.iter().all(|(col, _)| c.contains(col)) {
            continue;
        }
        let mut a = DMatrix::zeros(m, m);
        for &(col, v) in &row.coeffs {
            let off = col - c.start;
            let (j, k) = (off % m, off / m);
            a[(j, k)] += 0.5 * v;
            a[(k, j)] += 0.5 * v;
        }
        let eig = a.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        if scale == 0.0 {
            continue;
        }
        let psd = eig.eigenvalues.min() >= -1e-12 * scale;
        let nsd = eig.eigenvalues.max() <= 1e-12 * scale;
        match row.sense {
            Sense::Le | Sense::Eq if psd => out.push(ConvexRow { a, limit: row.rhs }),
            Sense::Ge | Sense::Eq if nsd => out.push(ConvexRow { a: -a, limit: -row.rhs }),
            _ => {}
        }
    }
    out
}

/// Outer approximation of the model projected onto `(d, phi)`: design rows,
/// criterion and covariance tangents, and cuts excluding infeasible designs.
pub(crate) struct Master {
    lp: LpSolver,
    n: usize,
    pub convex: Vec<ConvexRow>,
    pub cuts: usize,
}

impl Master {
    pub fn new(model: &MilpModel, s: &DesignStructure) -> Result<Self> {
        let layout = s.layout;
        let n = layout.n;
        let mut cost = vec![0.0; n + 1];
        cost[n] = 1.0;
        let mut lo: Vec<f64> = layout.d_range().map(|j| model.var_lower[j]).collect();
        let mut hi: Vec<f64> = layout.d_range().map(|j| model.var_upper[j]).collect();
        let psd = s.grams.iter().all(|g| {
            let e = g.clone().symmetric_eigen().eigenvalues;
            e.min() >= -1e-12 * e.amax()
        });
        let phi_lo = model.var_lower[layout.phi()];
        lo.push(if psd { phi_lo.max(0.0) } else { phi_lo });
        hi.push(model.var_upper[layout.phi()]);
        let mut prob = LpProblem::new(cost, lo, hi);
        for (entries, lo, hi) in design_rows(model, s) {
            prob.push_row(SparseRow::new(&entries), lo, hi);
        }
        Ok(Self { lp: LpSolver::new(prob, LpOptions::default())?, n, convex: convex_rows(model, s), cuts: 0 })
    }

    pub fn set_bounds(&mut self, i: usize, lo: f64, hi: f64) {
        self.lp.set_col_bounds(i, lo, hi);
    }

    pub fn solve(&mut self, cutoff: f64) -> Result<SolveOutcome> {
        self.lp.set_cutoff(cutoff);
        self.lp.solve()
    }

    pub fn objective(&self) -> f64 {
        self.lp.objective()
    }

    pub fn d(&self) -> &[f64] {
        &self.lp.primal()[..self.n]
    }

    pub fn phi(&self) -> f64 {
        self.lp.primal()[self.n]
    }

    fn push(&mut self, entries: &[(usize, f64)], lo: f64, hi: f64) {
        self.lp.add_row(SparseRow::new(entries), lo, hi);
        self.cuts += 1;
    }

    /// `phi + sum coeffs d >= rhs`.
    pub fn add_tangent(&mut self, cut: &Cut) {
        let mut entries = cut.coeffs.clone();
        entries.push((self.n, 1.0));
        self.push(&entries, cut.rhs, f64::INFINITY);
    }

    pub fn add_convex(&mut self, entries: &[(usize, f64)], rhs: f64) {
        self.push(entries, f64::NEG_INFINITY, rhs);
    }

    /// Excludes the binary `design` and no other binary point.
    pub fn exclude(&mut self, design: &[usize]) {
        let entries: Vec<(usize, f64)> =
            design.iter().enumerate().map(|(i, &v)| (i, if v == 1 { 1.0 } else { -1.0 })).collect();
        let rhs = design.iter().filter(|&&v| v == 1).count() as f64 - 1.0;
        self.push(&entries, f64::NEG_INFINITY, rhs);
    }
}
