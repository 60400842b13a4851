//! Design problems, designs and the minimax criterion family
//! `Phi_B(M) = max_l tr(B_l' M^-1 B_l)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{OptexError, Result};
use crate::linalg::{invert, DenseMatrix, SymMatrix, SINGULARITY_RATIO};

/// Default relative finite-difference step for [`localize_nonlinear`].
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Candidate regressors `f_1..f_n` in `R^m` and the run budget `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    regressors: Vec<Vec<f64>>,
    run_budget: usize,
    labels: Option<Vec<String>>,
}

impl DesignProblem {
    /// Validates `n >= m >= 2`, `m <= N <= n`, full column rank and
    /// nonzero regressors.
    pub fn new(regressors: Vec<Vec<f64>>, run_budget: usize, labels: Option<Vec<String>>) -> Result<Self> {
        let p = Self::new_unrestricted(regressors, run_budget, labels)?;
        let (n, m) = (p.n(), p.m());
        if m < 2 || n < m {
            return Err(OptexError::InvalidProblem(format!("need n >= m >= 2, got n = {n}, m = {m}")));
        }
        if run_budget < m || run_budget > n {
            return Err(OptexError::InvalidProblem(format!(
                "need m <= N <= n, got N = {run_budget}, m = {m}, n = {n}"
            )));
        }
        Ok(p)
    }

    /// Like [`DesignProblem::new`] but without the size restrictions on
    /// `n`, `m` and `N`; rank and nonzero checks still apply.
    pub fn new_unrestricted(
        regressors: Vec<Vec<f64>>,
        run_budget: usize,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = regressors.len();
        if n == 0 {
            return Err(OptexError::InvalidProblem("no regressors".into()));
        }
        let m = regressors[0].len();
        if m == 0 {
            return Err(OptexError::InvalidProblem("regressors have dimension 0".into()));
        }
        for (i, f) in regressors.iter().enumerate() {
            if f.len() != m {
                return Err(OptexError::DimensionMismatch(format!(
                    "regressor {i} has length {}, expected {m}",
                    f.len()
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(OptexError::InvalidProblem(format!("regressor {i} is not finite")));
            }
            if f.iter().all(|&v| v == 0.0) {
                return Err(OptexError::InvalidProblem(format!("regressor {i} is zero")));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(OptexError::DimensionMismatch(format!("{} labels for {n} points", l.len())));
            }
        }
        if run_budget == 0 {
            return Err(OptexError::InvalidProblem("run budget must be positive".into()));
        }
        let f = DMatrix::from_fn(n, m, |i, j| regressors[i][j]);
        let sv = f.singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
        if rank < m {
            return Err(OptexError::RankDeficient { m, rank });
        }
        Ok(Self { regressors, run_budget, labels })
    }

    /// Number of candidate points.
    pub fn n(&self) -> usize {
        self.regressors.len()
    }

    /// Number of parameters.
    pub fn m(&self) -> usize {
        self.regressors[0].len()
    }

    pub fn run_budget(&self) -> usize {
        self.run_budget
    }

    pub fn regressors(&self) -> &[Vec<f64>] {
        &self.regressors
    }

    pub fn regressor(&self, i: usize) -> &[f64] {
        &self.regressors[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of point `i`, falling back to its index.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    /// Same regressors with a different run budget.
    pub fn with_run_budget(&self, run_budget: usize) -> Result<Self> {
        Self::new_unrestricted(self.regressors.clone(), run_budget, self.labels.clone())
    }

    /// The `m x n` matrix `F = (f_1, ..., f_n)`.
    pub fn f_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m(), self.n(), |j, i| self.regressors[i][j])
    }

    /// Elementary information matrix `M_i = f_i f_i'`.
    pub fn elementary(&self, i: usize) -> DMatrix<f64> {
        let f = nalgebra::DVector::from_column_slice(&self.regressors[i]);
        &f * f.transpose()
    }
}

/// Criterion presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionKind {
    A,
    I,
    MV,
    G,
    Custom,
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriterionKind::A => "A",
            CriterionKind::I => "I",
            CriterionKind::MV => "MV",
            CriterionKind::G => "G",
            CriterionKind::Custom => "Custom",
        };
        f.write_str(s)
    }
}

impl FromStr for CriterionKind {
    type Err = OptexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(CriterionKind::A),
            "I" => Ok(CriterionKind::I),
            "MV" => Ok(CriterionKind::MV),
            "G" => Ok(CriterionKind::G),
            "CUSTOM" => Ok(CriterionKind::Custom),
            other => Err(OptexError::InvalidCriterion(format!("unknown criterion `{other}`"))),
        }
    }
}

/// The block sequence `B_1..B_K` defining `Phi_B`, with the Gram matrices
/// `G_l = B_l B_l'` precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionSpec {
    kind: CriterionKind,
    blocks: Vec<DenseMatrix>,
    grams: Vec<SymMatrix>,
}

impl CriterionSpec {
    /// Builds a preset criterion for `problem`.
    pub fn preset(kind: CriterionKind, problem: &DesignProblem) -> Result<Self> {
        let m = problem.m();
        let blocks = match kind {
            CriterionKind::A => vec![DenseMatrix::new(DMatrix::identity(m, m))?],
            CriterionKind::I => vec![DenseMatrix::new(problem.f_matrix())?],
            CriterionKind::MV => (0..m).map(|l| DenseMatrix::unit(m, l)).collect(),
            CriterionKind::G => problem
                .regressors()
                .iter()
                .map(|f| DenseMatrix::column(f))
                .collect::<Result<_>>()?,
            CriterionKind::Custom => {
                return Err(OptexError::InvalidCriterion("custom criteria need explicit blocks".into()))
            }
        };
        Self::with_kind(kind, blocks)
    }

    /// Custom criterion from explicit blocks.
    pub fn custom(blocks: Vec<DenseMatrix>) -> Result<Self> {
        Self::with_kind(CriterionKind::Custom, blocks)
    }

    fn with_kind(kind: CriterionKind, blocks: Vec<DenseMatrix>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(OptexError::InvalidCriterion("no blocks".into()));
        };
        let m = first.nrows();
        let mut bbt = DMatrix::zeros(m, m);
        let mut grams = Vec::with_capacity(blocks.len());
        for (l, b) in blocks.iter().enumerate() {
            if b.nrows() != m {
                return Err(OptexError::DimensionMismatch(format!(
                    "block {l} has {} rows, expected {m}",
                    b.nrows()
                )));
            }
            let bm = b.as_matrix();
            for c in 0..bm.ncols() {
                if bm.column(c).iter().all(|&v| v == 0.0) {
                    return Err(OptexError::InvalidCriterion(format!("block {l} has a zero column {c}")));
                }
            }
            let g = bm * bm.transpose();
            bbt += &g;
            grams.push(SymMatrix::symmetrize(g));
        }
        let bbt = SymMatrix::symmetrize(bbt);
        if !bbt.is_nonsingular() {
            return Err(OptexError::InvalidCriterion("blocks do not have full row rank".into()));
        }
        Ok(Self { kind, blocks, grams })
    }

    pub fn kind(&self) -> CriterionKind {
        self.kind
    }

    /// Parameter dimension `m`.
    pub fn m(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// Number of blocks `K`.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    /// `G_l = B_l B_l'`.
    pub fn grams(&self) -> &[SymMatrix] {
        &self.grams
    }

    /// The concatenation `B = (B_1, ..., B_K)`.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let cols: usize = self.blocks.iter().map(DenseMatrix::ncols).sum();
        let mut out = DMatrix::zeros(self.m(), cols);
        let mut off = 0;
        for b in &self.blocks {
            out.columns_mut(off, b.ncols()).copy_from(b.as_matrix());
            off += b.ncols();
        }
        out
    }

    /// Column widths `s_l` of the blocks.
    pub fn block_widths(&self) -> Vec<usize> {
        self.blocks.iter().map(DenseMatrix::ncols).collect()
    }

    /// `N(w) = sum_l w_l B_l B_l'`.
    pub fn weighted_gram(&self, w: &[f64]) -> SymMatrix {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (g, &wl) in self.grams.iter().zip(w) {
            if wl != 0.0 {
                out += g.as_matrix() * wl;
            }
        }
        SymMatrix::symmetrize(out)
    }

    /// Values `tr(G_l Sigma)` for every block.
    pub fn block_values(&self, sigma: &SymMatrix) -> Result<Vec<f64>> {
        if sigma.dim() != self.m() {
            return Err(OptexError::DimensionMismatch(format!(
                "Sigma is {0}x{0}, criterion has m = {1}",
                sigma.dim(),
                self.m()
            )));
        }
        let s = sigma.as_matrix();
        Ok(self.grams.iter().map(|g| g.as_matrix().dot(s)).collect())
    }
}

/// Replication counts `d_1..d_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExactDesign {
    d: Vec<usize>,
}

impl ExactDesign {
    pub fn new(d: Vec<usize>) -> Self {
        Self { d }
    }

    /// Binary design selecting `support`.
    pub fn from_support(n: usize, support: &[usize]) -> Self {
        let mut d = vec![0; n];
        for &i in support {
            d[i] += 1;
        }
        Self { d }
    }

    pub fn counts(&self) -> &[usize] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn total(&self) -> usize {
        self.d.iter().sum()
    }

    pub fn is_binary(&self) -> bool {
        self.d.iter().all(|&v| v <= 1)
    }

    /// Indices with `d_i > 0`, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.d.iter().enumerate().filter(|(_, &v)| v > 0).map(|(i, _)| i).collect()
    }

    /// Checks length `n`, total `N` and, if requested, binarity.
    pub fn validate(&self, problem: &DesignProblem, binary: bool) -> Result<()> {
        if self.len() != problem.n() {
            return Err(OptexError::DimensionMismatch(format!(
                "design has length {}, problem has n = {}",
                self.len(),
                problem.n()
            )));
        }
        if self.total() != problem.run_budget() {
            return Err(OptexError::InvalidDesign(format!(
                "design has {} trials, N = {}",
                self.total(),
                problem.run_budget()
            )));
        }
        if binary && !self.is_binary() {
            return Err(OptexError::InvalidDesign("design is not binary".into()));
        }
        Ok(())
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ApproximateDesign {
    w: Vec<f64>,
}

impl ApproximateDesign {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(OptexError::InvalidDesign("empty weight vector".into()));
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(OptexError::InvalidDesign("weights must be finite and nonnegative".into()));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(OptexError::InvalidDesign(format!("weights sum to {s}, not 1")));
        }
        Ok(Self { w })
    }

    /// Normalizes nonnegative weights to sum one.
    pub fn normalized(w: Vec<f64>) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) {
            return Err(OptexError::InvalidDesign("weights sum to zero".into()));
        }
        Self::new(w.into_iter().map(|v| v / s).collect())
    }

    /// Uniform weights on `k` components.
    pub fn uniform(k: usize) -> Self {
        Self { w: vec![1.0 / k as f64; k] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }
}

/// `M(d) = sum_i d_i f_i f_i'`.
pub fn info_matrix(problem: &DesignProblem, design: &ExactDesign) -> Result<SymMatrix> {
    if design.len() != problem.n() {
        return Err(OptexError::DimensionMismatch(format!(
            "design has length {}, problem has n = {}",
            design.len(),
            problem.n()
        )));
    }
    let m = problem.m();
    let mut out = DMatrix::zeros(m, m);
    for (i, &di) in design.counts().iter().enumerate() {
        if di == 0 {
            continue;
        }
        let f = problem.regressor(i);
        let w = di as f64;
        for a in 0..m {
            for b in 0..m {
                out[(a, b)] += w * f[a] * f[b];
            }
        }
    }
    Ok(SymMatrix::symmetrize(out))
}

/// `Phi_B(M)`; fails unless `lambda_min(M) > 1e-10 lambda_max(M)`.
pub fn criterion_value(spec: &CriterionSpec, m: &SymMatrix) -> Result<f64> {
    if m.dim() != spec.m() {
        return Err(OptexError::DimensionMismatch(format!(
            "M is {0}x{0}, criterion has m = {1}",
            m.dim(),
            spec.m()
        )));
    }
    let ratio = m.conditioning_ratio();
    if !(ratio > SINGULARITY_RATIO) {
        return Err(OptexError::SingularInformation { ratio });
    }
    let sigma = invert(m).map_err(|_| OptexError::SingularInformation { ratio })?;
    psi_value(spec, &sigma)
}

/// `Psi_B(Sigma) = max_l tr(B_l' Sigma B_l)` for any symmetric `Sigma`.
pub fn psi_value(spec: &CriterionSpec, sigma: &SymMatrix) -> Result<f64> {
    Ok(spec.block_values(sigma)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Criterion value of an exact design.
pub fn design_value(problem: &DesignProblem, spec: &CriterionSpec, design: &ExactDesign) -> Result<f64> {
    criterion_value(spec, &info_matrix(problem, design)?)
}

/// Regressors `dh/dbeta` at `beta0` by central differences with steps
/// `step * (1 + |beta0_j|)`.
pub fn localize_nonlinear<H>(
    mean_function: H,
    beta0: &[f64],
    points: &[Vec<f64>],
    step: f64,
    run_budget: usize,
    labels: Option<Vec<String>>,
) -> Result<DesignProblem>
where
    H: Fn(&[f64], &[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(OptexError::InvalidProblem("finite-difference step must be positive".into()));
    }
    let m = beta0.len();
    let mut beta = beta0.to_vec();
    let regressors = points
        .iter()
        .map(|x| {
            (0..m)
                .map(|j| {
                    let h = step * (1.0 + beta0[j].abs());
                    beta[j] = beta0[j] + h;
                    let up = mean_function(x, &beta);
                    beta[j] = beta0[j] - h;
                    let down = mean_function(x, &beta);
                    beta[j] = beta0[j];
                    (up - down) / (2.0 * h)
                })
                .collect()
        })
        .collect();
    DesignProblem::new(regressors, run_budget, labels)
}

/// Quadratic regression `f(x) = (1, x, x^2)'` on `n` equispaced points of
/// `[-1, 1]`.
pub fn quadratic_grid(n: usize, run_budget: usize) -> Result<DesignProblem> {
    let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    quadratic_at(&xs, run_budget)
}

/// Quadratic regression at the given points, labelled by `x`.
pub fn quadratic_at(xs: &[f64], run_budget: usize) -> Result<DesignProblem> {
    let regressors = xs.iter().map(|&x| vec![1.0, x, x * x]).collect();
    let labels = xs.iter().map(|x| format_label(*x)).collect();
    DesignProblem::new(regressors, run_budget, Some(labels))
}

pub(crate) fn format_label(x: f64) -> String {
    let r = (x * 1e12).round() / 1e12;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}
