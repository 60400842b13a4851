use nalgebra::DMatrix;

use crate::error::{OptexError, Result};

use super::{MilpModel, RowKind, Sense, VarLayout};

/// Design data recovered from the rows of a built model: the elementary
/// information matrices `M_i`, the criterion Grams `G_l` and the run budget.
#[derive(Debug, Clone)]
pub struct DesignStructure {
    pub layout: VarLayout,
    pub elementary: Vec<DMatrix<f64>>,
    pub grams: Vec<DMatrix<f64>>,
    pub run_budget: usize,
}

impl DesignStructure {
    pub fn from_model(model: &MilpModel) -> Result<Self> {
        let layout = model
            .layout
            .ok_or_else(|| OptexError::Structure("model variables do not follow the z/d/c/phi layout".into()))?;
        let (n, m) = (layout.n, layout.m);
        let mut elementary = vec![DMatrix::zeros(m, m); n];
        let mut seen_eq = vec![false; m * m];
        let mut grams: Vec<Option<DMatrix<f64>>> = Vec::new();
        let mut run_budget = None;
        let phi = layout.phi();
        let z_end = n * m * m;

        for row in &model.rows {
            match row.kind() {
                RowKind::Inverse { p, k } if p < m && k < m => {
                    seen_eq[k * m + p] = true;
                    for &(col, a) in &row.coeffs {
                        if col >= z_end {
                            return Err(OptexError::Structure(format!("row {} touches a non-z variable", row.name)));
                        }
                        let i = col / (m * m);
                        let rem = col % (m * m);
                        let (kk, j) = (rem / m, rem % m);
                        if kk != k {
                            return Err(OptexError::Structure(format!("row {} mixes columns", row.name)));
                        }
                        elementary[i][(p, j)] = a;
                    }
                }
                RowKind::Epigraph { l } => {
                    if row.sense != Sense::Ge || row.rhs != 0.0 {
                        return Err(OptexError::Structure(format!("epigraph row {} is not `>= 0`", row.name)));
                    }
                    let mut g = DMatrix::zeros(m, m);
                    let mut has_phi = false;
                    for &(col, a) in &row.coeffs {
                        if col == phi && a == 1.0 {
                            has_phi = true;
                        } else if layout.c_range().contains(&col) {
                            let off = col - layout.c(0, 0);
                            g[(off % m, off / m)] = -a;
                        } else {
                            return Err(OptexError::Structure(format!("epigraph row {} has foreign terms", row.name)));
                        }
                    }
                    if !has_phi {
                        return Err(OptexError::Structure(format!("epigraph row {} lacks phi", row.name)));
                    }
                    if grams.len() <= l {
                        grams.resize(l + 1, None);
                    }
                    grams[l] = Some(g);
                }
                RowKind::Cardinality => {
                    let ok = row.sense == Sense::Eq
                        && row.coeffs.len() == n
                        && row.coeffs.iter().all(|&(c, a)| layout.d_range().contains(&c) && a == 1.0);
                    if !ok || row.rhs.fract() != 0.0 || row.rhs < 0.0 {
                        return Err(OptexError::Structure("malformed cardinality row".into()));
                    }
                    run_budget = Some(row.rhs as usize);
                }
                _ => {}
            }
        }
        if seen_eq.iter().any(|s| !s) {
            return Err(OptexError::Structure("incomplete inverse-equality block".into()));
        }
        let grams: Vec<DMatrix<f64>> = grams
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| OptexError::Structure("epigraph rows are not numbered consecutively".into()))?;
        if grams.is_empty() {
            return Err(OptexError::Structure("no epigraph rows".into()));
        }
        let run_budget = run_budget.ok_or_else(|| OptexError::Structure("no cardinality row".into()))?;
        if model.objective != vec![(phi, 1.0)] {
            return Err(OptexError::Structure("objective is not `minimize phi`".into()));
        }
        Ok(Self { layout, elementary, grams, run_budget })
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn m(&self) -> usize {
        self.layout.m
    }

    /// `M(w) = sum_i w_i M_i`.
    pub fn info(&self, w: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (mi, &wi) in self.elementary.iter().zip(w) {
            if wi != 0.0 {
                out += mi * wi;
            }
        }
        out
    }
}
