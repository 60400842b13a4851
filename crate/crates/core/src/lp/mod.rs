//! Dual simplex for the LP relaxations.
//!
//! The solver works in active-set form: a basis is a set of `n` linearly
//! independent active constraints (variable bounds or rows), and the
//! explicit inverse of the basis matrix is kept and updated by rank-one
//! corrections. Bound changes and appended rows preserve dual feasibility,
//! so every re-solve starts from the previous basis.

mod problem;

pub use problem::{LpProblem, SparseRow};

use problem::Presolved;

use nalgebra::DMatrix;

use crate::error::{OptexError, Result};
use crate::milp::MilpModel;

/// Primal feasibility tolerance.
pub const PRIMAL_TOL: f64 = 1e-9;
/// Smallest admissible pivot element.
pub const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;
const BIG: f64 = 1e9;
const DEGENERATE_SWITCH: usize = 200;
const CHECK_INTERVAL: usize = 100;
const REFACTOR_INTERVAL: usize = 1000;
const MAX_RESETS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub iterations: usize,
}

/// Choice of the entering (violated) constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PricingRule {
    /// Largest normalized violation.
    #[default]
    MostViolated,
    /// Lowest constraint index; leaving ties also by lowest index.
    Bland,
    /// Highest constraint index.
    LastIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LpOptions {
    pub pricing: PricingRule,
    /// Overrides the default limit of `50 * (rows + cols)` pivots.
    pub iteration_limit: Option<usize>,
}

/// Outcome of [`LpSolver::solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    /// The objective exceeded the cutoff; it is a valid lower bound.
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lo,
    Hi,
    Fixed,
    Free,
}

/// A basis: active constraint ids with their sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    cons: Vec<usize>,
    sides: Vec<u8>,
}

pub struct LpSolver {
    prob: LpProblem,
    implied_lo: Vec<f64>,
    implied_hi: Vec<f64>,
    base_lo: Vec<f64>,
    base_hi: Vec<f64>,
    options: LpOptions,
    cutoff: f64,

    basis: Vec<usize>,
    side: Vec<Side>,
    pos_of: Vec<usize>,
    binv: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    act: Vec<f64>,
    since_check: usize,
    since_refactor: usize,
    iterations: usize,
    resets: usize,
}

const NONE: usize = usize::MAX;

impl LpSolver {
    pub fn new(prob: LpProblem, options: LpOptions) -> Result<Self> {
        prob.validate()?;
        let n = prob.ncols();
        let (implied_lo, implied_hi) = prob.implied_bounds_from(&prob.col_lo, &prob.col_hi);
        let ncons = n + prob.nrows();
        let (base_lo, base_hi) = (prob.col_lo.clone(), prob.col_hi.clone());
        let mut s = LpSolver {
            prob,
            implied_lo,
            implied_hi,
            base_lo,
            base_hi,
            options,
            cutoff: f64::INFINITY,
            basis: (0..n).collect(),
            side: vec![Side::Free; n],
            pos_of: vec![NONE; ncons],
            binv: vec![0.0; n * n],
            x: vec![0.0; n],
            y: vec![0.0; n],
            act: Vec::new(),
            since_check: 0,
            since_refactor: 0,
            iterations: 0,
            resets: 0,
        };
        for j in 0..n {
            s.pos_of[j] = j;
            s.binv[j * n + j] = 1.0;
            let c = s.prob.cost[j];
            s.side[j] = Self::initial_side(c, s.prob.col_lo[j], s.prob.col_hi[j]);
            s.y[j] = c;
        }
        s.recompute_primal();
        Ok(s)
    }

    /// Solver for the relaxation of `model` with some variables fixed.
    pub fn from_model(model: &MilpModel, fixings: &[(usize, f64)], options: LpOptions) -> Result<Self> {
        Self::new(fixed_problem(model, fixings)?, options)
    }

    pub fn problem(&self) -> &LpProblem {
        &self.prob
    }

    pub fn ncols(&self) -> usize {
        self.prob.ncols()
    }

    pub fn primal(&self) -> &[f64] {
        &self.x
    }

    pub fn objective(&self) -> f64 {
        self.prob.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Stops [`LpSolver::solve`] once the objective exceeds `cutoff`.
    pub fn set_cutoff(&mut self, cutoff: f64) {
        self.cutoff = cutoff;
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.prob.col_lo[j], self.prob.col_hi[j])
    }

    /// Changes the bounds of variable `j`, keeping the basis.
    pub fn set_col_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        let loosened = lo < self.prob.col_lo[j] || hi > self.prob.col_hi[j];
        self.prob.col_lo[j] = lo;
        self.prob.col_hi[j] = hi;
        if loosened && (lo < self.base_lo[j] || hi > self.base_hi[j]) {
            self.base_lo[j] = self.base_lo[j].min(lo);
            self.base_hi[j] = self.base_hi[j].max(hi);
            let (ilo, ihi) = self.prob.implied_bounds_from(&self.base_lo, &self.base_hi);
            self.implied_lo = ilo;
            self.implied_hi = ihi;
        }
        let pos = self.pos_of[j];
        if pos == NONE {
            return;
        }
        let new_side = if lo == hi {
            Side::Fixed
        } else if self.side[pos] == Side::Free {
            Side::Free
        } else if self.y[pos] > 0.0 || (self.y[pos] == 0.0 && lo.is_finite()) {
            Side::Lo
        } else {
            Side::Hi
        };
        self.side[pos] = new_side;
        let target = self.active_value(pos);
        let delta = target - self.x[j];
        if delta != 0.0 {
            self.shift_along(pos, delta);
        }
    }

    /// Appends an inequality row `lo <= a'x <= hi`; it starts inactive.
    pub fn add_row(&mut self, row: SparseRow, lo: f64, hi: f64) {
        let a = row.dot(&self.x);
        self.prob.push_row(row, lo, hi);
        self.pos_of.push(NONE);
        self.act.push(a);
    }

    pub fn nrows(&self) -> usize {
        self.prob.nrows()
    }

    pub fn basis(&self) -> Basis {
        Basis {
            cons: self.basis.clone(),
            sides: self
                .side
                .iter()
                .map(|s| match s {
                    Side::Lo => 0,
                    Side::Hi => 1,
                    Side::Fixed => 2,
                    Side::Free => 3,
                })
                .collect(),
        }
    }

    /// Installs a previously saved basis and refactorizes.
    pub fn load_basis(&mut self, basis: &Basis) -> Result<()> {
        let n = self.ncols();
        if basis.cons.len() != n || basis.cons.iter().any(|&c| c >= self.pos_of.len()) {
            return Err(OptexError::DimensionMismatch("basis does not match the problem".into()));
        }
        self.pos_of.iter_mut().for_each(|p| *p = NONE);
        for (pos, &c) in basis.cons.iter().enumerate() {
            self.pos_of[c] = pos;
        }
        self.basis = basis.cons.clone();
        self.side = basis
            .sides
            .iter()
            .map(|s| match s {
                0 => Side::Lo,
                1 => Side::Hi,
                2 => Side::Fixed,
                _ => Side::Free,
            })
            .collect();
        self.refactor()
    }

    fn cons_row(&self, c: usize) -> Option<&SparseRow> {
        c.checked_sub(self.ncols()).map(|r| &self.prob.rows[r])
    }

    fn col_effective_lo(&self, j: usize) -> f64 {
        let lo = self.prob.col_lo[j];
        if lo.is_finite() {
            lo
        } else if self.implied_lo[j].is_finite() {
            self.implied_lo[j]
        } else {
            -BIG
        }
    }

    fn col_effective_hi(&self, j: usize) -> f64 {
        let hi = self.prob.col_hi[j];
        if hi.is_finite() {
            hi
        } else if self.implied_hi[j].is_finite() {
            self.implied_hi[j]
        } else {
            BIG
        }
    }

    fn active_value(&self, pos: usize) -> f64 {
        let c = self.basis[pos];
        let n = self.ncols();
        match (c < n, self.side[pos]) {
            (_, Side::Free) => 0.0,
            (true, Side::Lo) | (true, Side::Fixed) => self.col_effective_lo(c),
            (true, Side::Hi) => self.col_effective_hi(c),
            (false, Side::Lo) | (false, Side::Fixed) => self.prob.row_lo[c - n],
            (false, Side::Hi) => self.prob.row_hi[c - n],
        }
    }

    fn is_big(&self, pos: usize) -> bool {
        let c = self.basis[pos];
        if c >= self.ncols() {
            return false;
        }
        match self.side[pos] {
            Side::Lo => !self.prob.col_lo[c].is_finite() && !self.implied_lo[c].is_finite(),
            Side::Hi => !self.prob.col_hi[c].is_finite() && !self.implied_hi[c].is_finite(),
            _ => false,
        }
    }

    /// Moves `x` so that active constraint `pos` changes by `delta`.
    fn shift_along(&mut self, pos: usize, delta: f64) {
        let n = self.ncols();
        let p: Vec<f64> = (0..n).map(|t| self.binv[t * n + pos]).collect();
        for (xj, pj) in self.x.iter_mut().zip(&p) {
            *xj += delta * pj;
        }
        for (r, row) in self.prob.rows.iter().enumerate() {
            self.act[r] += delta * row.dot(&p);
        }
    }

    fn recompute_primal(&mut self) {
        let n = self.ncols();
        let b: Vec<f64> = (0..n).map(|pos| self.active_value(pos)).collect();
        for t in 0..n {
            let row = &self.binv[t * n..(t + 1) * n];
            self.x[t] = row.iter().zip(&b).map(|(a, v)| a * v).sum();
        }
        self.act = self.prob.rows.iter().map(|r| r.dot(&self.x)).collect();
    }

    fn recompute_dual(&mut self) {
        let n = self.ncols();
        let mut y = vec![0.0; n];
        for (t, &c) in self.prob.cost.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[t * n..(t + 1) * n];
                for (yp, a) in y.iter_mut().zip(row) {
                    *yp += c * a;
                }
            }
        }
        for (pos, yp) in y.iter_mut().enumerate() {
            match self.side[pos] {
                Side::Lo if *yp < 0.0 && *yp > -1e-7 => *yp = 0.0,
                Side::Hi if *yp > 0.0 && *yp < 1e-7 => *yp = 0.0,
                _ => {}
            }
        }
        self.y = y;
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.ncols();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (pos, &c) in self.basis.iter().enumerate() {
            match self.cons_row(c) {
                None => a[(pos, c)] = 1.0,
                Some(row) => {
                    for (&j, &v) in row.idx.iter().zip(&row.val) {
                        a[(pos, j)] = v;
                    }
                }
            }
        }
        let Some(inv) = a.lu().try_inverse() else {
            return self.reset_to_bounds();
        };
        for t in 0..n {
            for pos in 0..n {
                self.binv[t * n + pos] = inv[(t, pos)];
            }
        }
        self.recompute_primal();
        self.recompute_dual();
        self.since_refactor = 0;
        self.since_check = 0;
        Ok(())
    }

    /// Restarts from the all-bounds basis, which is always dual feasible.
    fn reset_to_bounds(&mut self) -> Result<()> {
        let n = self.ncols();
        if self.resets >= MAX_RESETS {
            return Err(OptexError::SingularMatrix);
        }
        self.resets += 1;
        self.pos_of.iter_mut().for_each(|p| *p = NONE);
        self.binv.iter_mut().for_each(|b| *b = 0.0);
        for j in 0..n {
            self.basis[j] = j;
            self.pos_of[j] = j;
            self.binv[j * n + j] = 1.0;
            self.side[j] = Self::initial_side(self.prob.cost[j], self.prob.col_lo[j], self.prob.col_hi[j]);
            self.y[j] = self.prob.cost[j];
        }
        self.recompute_primal();
        self.since_refactor = 0;
        self.since_check = 0;
        Ok(())
    }

    fn initial_side(c: f64, lo: f64, hi: f64) -> Side {
        if lo == hi {
            Side::Fixed
        } else if c > 0.0 {
            Side::Lo
        } else if c < 0.0 {
            Side::Hi
        } else if lo.is_finite() {
            Side::Lo
        } else if hi.is_finite() {
            Side::Hi
        } else {
            Side::Free
        }
    }

    fn primal_residual(&self) -> f64 {
        let n = self.ncols();
        (0..n)
            .map(|pos| {
                let c = self.basis[pos];
                let a = match self.cons_row(c) {
                    None => self.x[c],
                    Some(row) => row.dot(&self.x),
                };
                (a - self.active_value(pos)).abs() / (1.0 + self.active_value(pos).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Picks the entering constraint: `(id, sigma, target)`.
    fn select_entering(&self, bland: bool) -> Option<(usize, f64, f64)> {
        let n = self.ncols();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut best_score = 0.0;
        let rule = if bland { PricingRule::Bland } else { self.options.pricing };
        let mut consider = |id: usize, viol: f64, sigma: f64, target: f64, norm: f64| {
            let score = viol / norm;
            let better = match rule {
                PricingRule::MostViolated => score > best_score,
                PricingRule::Bland => best.is_none(),
                PricingRule::LastIndex => true,
            };
            if better {
                best_score = score;
                best = Some((id, sigma, target));
            }
        };
        for j in 0..n {
            if self.pos_of[j] != NONE {
                continue;
            }
            let (lo, hi, v) = (self.prob.col_lo[j], self.prob.col_hi[j], self.x[j]);
            let tol = PRIMAL_TOL * (1.0 + v.abs().min(1e3));
            if v < lo - tol {
                consider(j, lo - v, 1.0, lo, 1.0);
            } else if v > hi + tol {
                consider(j, v - hi, -1.0, hi, 1.0);
            }
        }
        for (r, &a) in self.act.iter().enumerate() {
            let id = n + r;
            if self.pos_of[id] != NONE {
                continue;
            }
            let (lo, hi) = (self.prob.row_lo[r], self.prob.row_hi[r]);
            let tol = PRIMAL_TOL * (1.0 + lo.abs().min(hi.abs()).min(1e3));
            if a < lo - tol {
                consider(id, lo - a, 1.0, lo, self.prob.row_norm[r]);
            } else if a > hi + tol {
                consider(id, a - hi, -1.0, hi, self.prob.row_norm[r]);
            }
        }
        best
    }

    /// `u = a_s' B^-1` over basis positions.
    fn btran(&self, s: usize) -> Vec<f64> {
        let n = self.ncols();
        match self.cons_row(s) {
            None => self.binv[s * n..(s + 1) * n].to_vec(),
            Some(row) => {
                let mut u = vec![0.0; n];
                for (&j, &v) in row.idx.iter().zip(&row.val) {
                    let brow = &self.binv[j * n..(j + 1) * n];
                    for (ut, b) in u.iter_mut().zip(brow) {
                        *ut += v * b;
                    }
                }
                u
            }
        }
    }

    /// Harris two-pass ratio test; returns the leaving position.
    fn ratio_test(&self, u: &[f64], sigma: f64, bland: bool) -> Option<usize> {
        let mut bound = f64::INFINITY;
        let mut any = false;
        for (t, &ut) in u.iter().enumerate() {
            let su = sigma * ut;
            match self.side[t] {
                Side::Fixed => {}
                Side::Free => {
                    if ut.abs() > PIVOT_TOL {
                        any = true;
                        bound = 0.0;
                    }
                }
                Side::Lo if su > PIVOT_TOL => {
                    any = true;
                    bound = bound.min((self.y[t].max(0.0) + DUAL_TOL) / su);
                }
                Side::Hi if su < -PIVOT_TOL => {
                    any = true;
                    bound = bound.min((self.y[t].min(0.0) - DUAL_TOL) / su);
                }
                _ => {}
            }
        }
        if !any {
            return None;
        }
        let mut choice: Option<usize> = None;
        let mut best = 0.0;
        for (t, &ut) in u.iter().enumerate() {
            let su = sigma * ut;
            let ratio = match self.side[t] {
                Side::Free if ut.abs() > PIVOT_TOL => 0.0,
                Side::Lo if su > PIVOT_TOL => self.y[t].max(0.0) / su,
                Side::Hi if su < -PIVOT_TOL => self.y[t].min(0.0) / su,
                _ => continue,
            };
            if ratio > bound {
                continue;
            }
            let free_bonus = if self.side[t] == Side::Free { 1e6 } else { 0.0 };
            let score = ut.abs() + free_bonus;
            if score > best {
                best = score;
                choice = Some(t);
            }
        }
        if bland {
            // lowest constraint id among well-conditioned candidates
            let floor = 0.1 * best.min(1e6 - 1.0);
            for (t, &ut) in u.iter().enumerate() {
                let su = sigma * ut;
                let ratio = match self.side[t] {
                    Side::Free if ut.abs() > PIVOT_TOL => 0.0,
                    Side::Lo if su > PIVOT_TOL => self.y[t].max(0.0) / su,
                    Side::Hi if su < -PIVOT_TOL => self.y[t].min(0.0) / su,
                    _ => continue,
                };
                if ratio <= bound && ut.abs() >= floor && choice.is_some_and(|c| self.basis[t] < self.basis[c]) {
                    choice = Some(t);
                }
            }
        }
        choice
    }

    fn pivot(&mut self, s: usize, sigma: f64, target: f64, r: usize, u: &[f64]) {
        let n = self.ncols();
        let ur = u[r];
        let tau = match self.side[r] {
            Side::Free => 0.0,
            Side::Lo => self.y[r].max(0.0) / (sigma * ur),
            Side::Hi => self.y[r].min(0.0) / (sigma * ur),
            Side::Fixed => unreachable!("fixed constraints never leave"),
        }
        .max(0.0);
        let theta = sigma * tau;
        for (yt, &ut) in self.y.iter_mut().zip(u) {
            *yt -= theta * ut;
        }
        self.y[r] = theta;

        let cur = match self.cons_row(s) {
            None => self.x[s],
            Some(_) => self.act[s - n],
        };
        let step = (target - cur) / ur;
        let p: Vec<f64> = (0..n).map(|t| self.binv[t * n + r]).collect();
        if step != 0.0 {
            for (xj, pj) in self.x.iter_mut().zip(&p) {
                *xj += step * pj;
            }
            for (k, row) in self.prob.rows.iter().enumerate() {
                self.act[k] += step * row.dot(&p);
            }
        }

        let inv_ur = 1.0 / ur;
        let mut w: Vec<f64> = u.iter().map(|v| v * inv_ur).collect();
        w[r] -= inv_ur;
        for (t, &pt) in p.iter().enumerate() {
            if pt != 0.0 {
                let row = &mut self.binv[t * n..(t + 1) * n];
                for (b, wv) in row.iter_mut().zip(&w) {
                    *b -= pt * wv;
                }
            }
        }

        let old = self.basis[r];
        self.pos_of[old] = NONE;
        self.pos_of[s] = r;
        self.basis[r] = s;
        let (lo, hi) = match self.cons_row(s) {
            None => (self.prob.col_lo[s], self.prob.col_hi[s]),
            Some(_) => (self.prob.row_lo[s - n], self.prob.row_hi[s - n]),
        };
        self.side[r] = if lo == hi {
            Side::Fixed
        } else if sigma > 0.0 {
            Side::Lo
        } else {
            Side::Hi
        };
        self.since_check += 1;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    fn iteration_limit(&self) -> usize {
        self.options
            .iteration_limit
            .unwrap_or(50 * (self.prob.nrows() + self.ncols()))
    }

    /// Runs dual simplex iterations from the current basis.
    pub fn solve(&mut self) -> Result<SolveOutcome> {
        let limit = self.iteration_limit();
        let mut count = 0usize;
        let mut degenerate = 0usize;
        let mut retried = false;
        self.resets = 0;
        loop {
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
            } else if self.since_check >= CHECK_INTERVAL {
                self.since_check = 0;
                if self.primal_residual() > 1e-10 {
                    self.refactor()?;
                }
            }
            if self.objective() > self.cutoff {
                return Ok(SolveOutcome::Cutoff);
            }
            let bland = degenerate >= DEGENERATE_SWITCH;
            let Some((s, sigma, target)) = self.select_entering(bland) else {
                if self.since_refactor > 0 && !retried {
                    retried = true;
                    self.refactor()?;
                    continue;
                }
                let unbounded = (0..self.ncols()).any(|pos| self.is_big(pos) && self.y[pos].abs() > DUAL_TOL);
                return Ok(if unbounded { SolveOutcome::Unbounded } else { SolveOutcome::Optimal });
            };
            if count >= limit {
                return Err(OptexError::IterationLimit(limit));
            }
            let u = self.btran(s);
            let Some(r) = self.ratio_test(&u, sigma, bland) else {
                if self.since_refactor > 0 && !retried {
                    retried = true;
                    self.refactor()?;
                    continue;
                }
                return Ok(SolveOutcome::Infeasible);
            };
            let before = self.objective();
            self.pivot(s, sigma, target, r, &u);
            retried = false;
            count += 1;
            if self.objective() <= before + 1e-12 * (1.0 + before.abs()) {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    /// Solves and packages the result.
    pub fn solution(&mut self) -> Result<LpSolution> {
        self.set_cutoff(f64::INFINITY);
        let start = self.iterations;
        let status = match self.solve()? {
            SolveOutcome::Optimal => LpStatus::Optimal,
            SolveOutcome::Infeasible => LpStatus::Infeasible,
            SolveOutcome::Unbounded => LpStatus::Unbounded,
            SolveOutcome::Cutoff => unreachable!("no cutoff set"),
        };
        let objective = match status {
            LpStatus::Optimal => self.objective(),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        Ok(LpSolution { status, objective, primal: self.x.clone(), iterations: self.iterations - start })
    }
}

/// Solves the continuous relaxation of `model` with `fixings` applied.
pub fn solve_lp(model: &MilpModel, fixings: &[(usize, f64)]) -> Result<LpSolution> {
    solve_lp_with(model, fixings, LpOptions::default())
}

fn fixed_problem(model: &MilpModel, fixings: &[(usize, f64)]) -> Result<LpProblem> {
    let mut prob = LpProblem::from_model(model);
    for &(j, v) in fixings {
        if j >= prob.ncols() {
            return Err(OptexError::DimensionMismatch(format!("fixing of variable {j}")));
        }
        prob.col_lo[j] = v;
        prob.col_hi[j] = v;
    }
    prob.validate()?;
    Ok(prob)
}

/// Like [`solve_lp`], after removing fixed columns and singleton rows.
pub fn solve_lp_with(model: &MilpModel, fixings: &[(usize, f64)], options: LpOptions) -> Result<LpSolution> {
    let full = fixed_problem(model, fixings)?;
    let (prob, kept, mut values) = match full.presolve() {
        Presolved::Infeasible => {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                primal: vec![0.0; model.num_vars()],
                iterations: 0,
            });
        }
        Presolved::Reduced { prob, kept, values } => (prob, kept, values),
    };
    let mut sol = LpSolver::new(prob, options)?.solution()?;
    for (p, &j) in kept.iter().enumerate() {
        values[j] = sol.primal[p];
    }
    if sol.status == LpStatus::Optimal {
        sol.objective = full.cost.iter().zip(&values).map(|(c, x)| c * x).sum();
    }
    sol.primal = values;
    Ok(sol)
}
