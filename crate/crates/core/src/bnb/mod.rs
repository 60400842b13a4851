//! Branch and bound over the design variables of a built model.
//!
//! Each node is bounded by an outer approximation of the model over the
//! design variables and the epigraph variable, refined by tangent cuts of the
//! convex criterion, and by a Frank-Wolfe bound on the continuous relaxation.
//! Integral points are checked against every row of the model, and the full
//! LP of the model is solved at the final design. Interchangeable design
//! points (replicates) are branched on in a fixed order.

mod master;
mod relax;
mod symmetry;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{OptexError, Result};
use crate::linalg::SymMatrix;
use crate::lp::{solve_lp, LpSolution, LpStatus, SolveOutcome};
use crate::milp::{check_feasible, DesignStructure, MilpModel};
use crate::model::ExactDesign;

use master::Master;
use relax::{FwOutcome, Relaxation};

/// A d-variable counts as integral within this distance of 0 or 1.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Relative gap below which a result is certified.
pub const GAP_TOL: f64 = 1e-6;
/// Allowed disagreement between the LP objective and direct evaluation.
pub const LINKAGE_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;
const MAX_CUTS: usize = 20_000;
const ROOT_FW_ITERS: usize = 300;
const NODE_FW_ITERS: usize = 40;
const ROOT_CUT_ROUNDS: usize = 50;
const NODE_CUT_ROUNDS: usize = 5;
/// Master re-solves per node spent on integral points.
const MAX_INTEGRAL_ROUNDS: usize = 200;
const PROGRESS_EVERY: usize = 1000;

#[derive(Debug, Clone, Default)]
pub struct SolveLimits {
    pub time: Option<Duration>,
    pub nodes: Option<usize>,
    /// Print a progress line to stderr every 1000 nodes.
    pub progress: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Certified,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub design: ExactDesign,
    pub criterion_value: f64,
    pub sigma: SymMatrix,
    pub status: SolveStatus,
    pub nodes: usize,
    pub gap: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    /// Position within the d-slice.
    Variable(usize),
    AllIntegral,
}

/// Most fractional d-variable of `values`, ties to the lowest index.
pub fn most_fractional(values: &[f64]) -> Branching {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        let f = (v - v.round()).abs();
        if f > INTEGRALITY_TOL && best.is_none_or(|(_, b)| f > b + 1e-12) {
            best = Some((i, f));
        }
    }
    best.map_or(Branching::AllIntegral, |(i, _)| Branching::Variable(i))
}

/// Branching decision for an LP solution of `model`.
pub fn branching_choice(lp: &LpSolution, model: &MilpModel) -> Result<Branching> {
    let layout = model
        .layout
        .ok_or_else(|| OptexError::Structure("model has no variable layout".into()))?;
    if lp.primal.len() != model.num_vars() {
        return Err(OptexError::DimensionMismatch("LP solution does not match the model".into()));
    }
    Ok(most_fractional(&lp.primal[layout.d_range()]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Zero,
    One,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    fix: Vec<Fix>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: lowest bound, then deepest, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    design: Vec<usize>,
    value: f64,
}

struct Search<'a> {
    model: &'a MilpModel,
    structure: &'a DesignStructure,
    relax: Relaxation<'a>,
    classes: Vec<Vec<usize>>,
    class_of: Vec<Option<(usize, usize)>>,
    master: Master,
    master_fix: Vec<Fix>,
    incumbent: Option<Incumbent>,
}

fn prune_level(inc: &Option<Incumbent>) -> f64 {
    match inc {
        Some(i) => i.value - PRUNE_TOL * i.value.abs().max(1e-12),
        None => f64::INFINITY,
    }
}

impl<'a> Search<'a> {
    fn n(&self) -> usize {
        self.structure.n()
    }

    fn bounds_of(&self, fix: &[Fix]) -> (Vec<f64>, Vec<f64>) {
        fix.iter()
            .map(|f| match f {
                Fix::Free => (0.0, 1.0),
                Fix::Zero => (0.0, 0.0),
                Fix::One => (1.0, 1.0),
            })
            .unzip()
    }

    fn apply_fixings(&mut self, fix: &[Fix]) {
        for i in 0..self.n() {
            if self.master_fix[i] != fix[i] {
                let (lo, hi) = match fix[i] {
                    Fix::Free => (0.0, 1.0),
                    Fix::Zero => (0.0, 0.0),
                    Fix::One => (1.0, 1.0),
                };
                self.master.set_bounds(i, lo, hi);
                self.master_fix[i] = fix[i];
            }
        }
    }

    fn room(&self) -> bool {
        self.master.cuts < MAX_CUTS
    }

    /// Adds violated criterion and covariance tangents at `d`; returns how many.
    fn separate(&mut self, d: &[f64], phi: f64, per_round: usize) -> usize {
        let Some(ev) = self.relax.evaluate(d) else { return 0 };
        let tol = 1e-6 * (1.0 + phi.abs());
        let mut order: Vec<usize> = (0..ev.values.len()).filter(|&l| ev.values[l] > phi + tol).collect();
        order.sort_by(|&a, &b| ev.values[b].total_cmp(&ev.values[a]).then(a.cmp(&b)));
        let mut added = 0;
        for &l in order.iter().take(per_round) {
            if !self.room() {
                break;
            }
            if let Some(cut) = self.relax.tangent(d, &ev, &self.relax.unit_weights(l)) {
                if cut.violation(d, phi) > tol {
                    self.master.add_tangent(&cut);
                    added += 1;
                }
            }
        }
        let mut rows = Vec::new();
        for row in &self.master.convex {
            let h = row.value(&ev);
            if h > row.limit() + 1e-7 * (1.0 + h.abs()) {
                if let Some(t) = row.tangent(self.structure, d, &ev) {
                    rows.push(t);
                }
            }
        }
        for (entries, rhs) in rows {
            if self.room() {
                self.master.add_convex(&entries, rhs);
                added += 1;
            }
        }
        added
    }

    /// Model point of a binary design, if it satisfies every row.
    fn feasible_value(&self, design: &[usize]) -> Option<f64> {
        let w: Vec<f64> = design.iter().map(|&d| d as f64).collect();
        let ev = self.relax.evaluate(&w)?;
        let layout = self.structure.layout;
        let m = layout.m;
        let mut x = vec![0.0; layout.num_vars()];
        for (i, &di) in design.iter().enumerate() {
            x[layout.d(i)] = di as f64;
            if di == 1 {
                for j in 0..m {
                    for k in 0..m {
                        x[layout.z(i, j, k)] = ev.sigma[(j, k)];
                    }
                }
            }
        }
        for j in 0..m {
            for k in 0..m {
                x[layout.c(j, k)] = ev.sigma[(j, k)];
            }
        }
        let value = ev.max();
        x[layout.phi()] = value;
        let scale = 1.0 + ev.sigma.amax();
        (check_feasible(self.model, &x) <= 1e-7 * scale).then_some(value)
    }

    fn offer(&mut self, design: Vec<usize>, value: f64) {
        if self.incumbent.as_ref().is_none_or(|inc| value < inc.value) {
            self.incumbent = Some(Incumbent { design, value });
        }
    }

    /// Top-`budget` rounding of a fractional point.
    fn round(&self, w: &[f64], fix: &[Fix]) -> Vec<usize> {
        let budget = self.structure.run_budget;
        let mut d: Vec<usize> = fix.iter().map(|f| (*f == Fix::One) as usize).collect();
        let ones = d.iter().sum::<usize>();
        let mut free: Vec<usize> = (0..self.n()).filter(|&i| fix[i] == Fix::Free).collect();
        free.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        for &i in free.iter().take(budget.saturating_sub(ones)) {
            d[i] = 1;
        }
        d
    }

    /// Children of `fix` on variable `i`, down branch first.
    fn children(&self, fix: &[Fix], i: usize) -> [Vec<Fix>; 2] {
        let mut down = fix.to_vec();
        let mut up = fix.to_vec();
        down[i] = Fix::Zero;
        up[i] = Fix::One;
        if let Some((c, pos)) = self.class_of[i] {
            let class = &self.classes[c];
            for &t in &class[pos + 1..] {
                down[t] = Fix::Zero;
            }
            for &t in &class[..pos] {
                up[t] = Fix::One;
            }
        }
        [down, up]
    }

    fn consistent(&self, fix: &[Fix]) -> bool {
        let ones = fix.iter().filter(|f| **f == Fix::One).count();
        let open = fix.iter().filter(|f| **f != Fix::Zero).count();
        let budget = self.structure.run_budget;
        ones <= budget && open >= budget
    }

    /// Evaluates a node; returns its bound and branching variable, or
    /// `None` if the node is closed.
    fn process(&mut self, fix: &[Fix], parent_bound: f64, root: bool) -> Result<Option<(f64, usize)>> {
        let (lo, hi) = self.bounds_of(fix);
        let budget = self.structure.run_budget;
        let mut bound = parent_bound;

        let iters = if root { ROOT_FW_ITERS } else { NODE_FW_ITERS };
        match self.relax.frank_wolfe(&lo, &hi, budget, iters, prune_level(&self.incumbent)) {
            FwOutcome::Empty => return Ok(None),
            FwOutcome::Bound(fw) => {
                if fw.single_point {
                    let d: Vec<usize> = fw.w.iter().map(|&v| v.round() as usize).collect();
                    if let Some(v) = self.feasible_value(&d) {
                        self.offer(d, v);
                    }
                    return Ok(None);
                }
                bound = bound.max(fw.bound);
                let d = self.round(&fw.w, fix);
                if let Some(v) = self.feasible_value(&d) {
                    self.offer(d, v);
                }
                if bound >= prune_level(&self.incumbent) {
                    return Ok(None);
                }
                if let Some(ev) = self.relax.evaluate(&fw.w) {
                    if let Some(cut) = self.relax.tangent(&fw.w, &ev, &fw.lambda) {
                        if self.room() {
                            self.master.add_tangent(&cut);
                        }
                    }
                }
            }
        }

        self.apply_fixings(fix);
        let rounds = if root { ROOT_CUT_ROUNDS } else { NODE_CUT_ROUNDS };
        let mut round = 0;
        let mut integral_rounds = 0;
        loop {
            match self.master.solve(prune_level(&self.incumbent))? {
                SolveOutcome::Infeasible | SolveOutcome::Cutoff => return Ok(None),
                SolveOutcome::Unbounded => {
                    let i = (0..self.n()).find(|&i| fix[i] == Fix::Free);
                    return Ok(i.map(|i| (bound, i)));
                }
                SolveOutcome::Optimal => {}
            }
            bound = bound.max(self.master.objective());
            if bound >= prune_level(&self.incumbent) {
                return Ok(None);
            }
            let d: Vec<f64> = self.master.d().iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let phi = self.master.phi();
            if most_fractional(&d) == Branching::AllIntegral {
                let design: Vec<usize> = d.iter().map(|v| v.round() as usize).collect();
                let w: Vec<f64> = design.iter().map(|&v| v as f64).collect();
                integral_rounds += 1;
                if integral_rounds > MAX_INTEGRAL_ROUNDS || !self.room() {
                    let i = (0..self.n()).find(|&i| fix[i] == Fix::Free);
                    return Ok(i.map(|i| (bound, i)));
                }
                match self.feasible_value(&design) {
                    Some(value) if value <= phi + PRUNE_TOL * (1.0 + value.abs()) => {
                        // the node optimum is this design
                        self.offer(design, value);
                        return Ok(None);
                    }
                    Some(value) => {
                        self.offer(design.clone(), value);
                        if self.separate(&w, phi, 1) == 0 {
                            self.master.exclude(&design);
                        }
                    }
                    None => self.master.exclude(&design),
                }
                continue;
            }
            let Branching::Variable(i) = most_fractional(&d) else { unreachable!() };
            if round == rounds || !self.room() {
                return Ok(Some((bound, i)));
            }
            round += 1;
            if self.separate(&d, phi, 3) == 0 {
                return Ok(Some((bound, i)));
            }
        }
    }
}

/// Solves `model` to certified optimality within `limits`.
///
/// `incumbent`, if given, must satisfy every row of the model. Returns
/// [`OptexError::Infeasible`] when no feasible design exists.
pub fn solve(model: &MilpModel, incumbent: Option<&ExactDesign>, limits: &SolveLimits) -> Result<SolveResult> {
    let start = Instant::now();
    let structure = DesignStructure::from_model(model)?;
    let layout = structure.layout;
    let n = layout.n;
    let mut root_fix = vec![Fix::Free; n];
    for i in 0..n {
        let j = layout.d(i);
        let (lo, hi) = (model.var_lower[j], model.var_upper[j]);
        if !model.integrality[j] || !(lo == 0.0 || lo == 1.0) || !(hi == 0.0 || hi == 1.0) || lo > hi {
            return Err(OptexError::Structure(format!("variable {} is not a binary", model.var_names[j])));
        }
        root_fix[i] = match (lo == 1.0, hi == 0.0) {
            (true, _) => Fix::One,
            (_, true) => Fix::Zero,
            _ => Fix::Free,
        };
    }
    let classes = symmetry::interchangeable_points(model, &structure);
    let mut class_of = vec![None; n];
    for (c, class) in classes.iter().enumerate() {
        for (pos, &i) in class.iter().enumerate() {
            class_of[i] = Some((c, pos));
        }
    }
    let master = Master::new(model, &structure)?;
    let mut search = Search {
        model,
        structure: &structure,
        relax: Relaxation::new(&structure),
        classes,
        class_of,
        master,
        master_fix: vec![Fix::Free; n],
        incumbent: None,
    };

    if let Some(d) = incumbent {
        if d.len() != n || !d.is_binary() {
            return Err(OptexError::InvalidDesign("incumbent does not match the model".into()));
        }
        let value = search
            .feasible_value(d.counts())
            .ok_or_else(|| OptexError::InvalidDesign("incumbent violates the model".into()))?;
        search.offer(d.counts().to_vec(), value);
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    if search.consistent(&root_fix) {
        heap.push(Node { bound: f64::NEG_INFINITY, depth: 0, seq, fix: root_fix });
    }
    let mut nodes = 0usize;
    let mut status = SolveStatus::Certified;
    let mut open_bound = f64::INFINITY;

    while let Some(node) = heap.pop() {
        if node.bound >= prune_level(&search.incumbent) {
            continue;
        }
        let out_of_time = limits.time.is_some_and(|t| start.elapsed() >= t);
        let out_of_nodes = limits.nodes.is_some_and(|k| nodes >= k);
        if out_of_time || out_of_nodes {
            status = if out_of_time { SolveStatus::TimeLimit } else { SolveStatus::NodeLimit };
            open_bound = heap.iter().map(|nd| nd.bound).fold(node.bound, f64::min);
            break;
        }
        nodes += 1;
        if limits.progress && nodes.is_multiple_of(PROGRESS_EVERY) {
            let inc = search.incumbent.as_ref().map_or(f64::INFINITY, |i| i.value);
            let lb = heap.iter().map(|nd| nd.bound).fold(node.bound, f64::min);
            eprintln!(
                "nodes {nodes:>9}  incumbent {inc:.10}  bound {lb:.10}  gap {:.3e}  cuts {}  {:.1}s",
                relative_gap(inc, lb),
                search.master.cuts,
                start.elapsed().as_secs_f64()
            );
        }
        let Some((bound, i)) = search.process(&node.fix, node.bound, node.depth == 0)? else {
            continue;
        };
        for child in search.children(&node.fix, i) {
            if search.consistent(&child) {
                seq += 1;
                heap.push(Node { bound, depth: node.depth + 1, seq, fix: child });
            }
        }
    }

    let inc = search.incumbent.take().ok_or(OptexError::Infeasible)?;
    let lower_bound = open_bound.min(inc.value);
    let gap = relative_gap(inc.value, lower_bound);
    if status == SolveStatus::Certified {
        debug_assert!(gap <= GAP_TOL);
    }

    // the model must reproduce the criterion value at the final design
    let fixings: Vec<(usize, f64)> = inc.design.iter().enumerate().map(|(i, &d)| (layout.d(i), d as f64)).collect();
    let lp = solve_lp(model, &fixings)?;
    match lp.status {
        LpStatus::Optimal => {
            let obj = lp.objective;
            if (obj - inc.value).abs() > LINKAGE_TOL * (1.0 + inc.value.abs()) {
                return Err(OptexError::Linkage(format!(
                    "model objective {obj} at the optimal design differs from its criterion value {}",
                    inc.value
                )));
            }
        }
        other => {
            return Err(OptexError::Linkage(format!("model at the optimal design solves as {other:?}")));
        }
    }

    let w: Vec<f64> = inc.design.iter().map(|&d| d as f64).collect();
    let ev = search.relax.evaluate(&w).ok_or(OptexError::SingularMatrix)?;
    let sigma = SymMatrix::symmetrize(ev.sigma.clone());
    Ok(SolveResult {
        design: ExactDesign::new(inc.design),
        criterion_value: ev.max(),
        sigma,
        status,
        nodes,
        gap,
        lower_bound,
    })
}

fn relative_gap(inc: f64, lb: f64) -> f64 {
    if !inc.is_finite() {
        return f64::INFINITY;
    }
    ((inc - lb) / inc.abs().max(1e-12)).max(0.0)
}
