//! The mixed-integer linear program over `x = (z, d, c, phi)`.

mod build;
mod replication;
mod structure;

pub use build::{build, check_feasible, covariance_constraint_from_criterion, embed_design, ExtraConstraint};
pub use replication::{expand_replications, ReplicationMap};
pub use structure::DesignStructure;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Relation of a linear row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

/// Row role, recovered from the row name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// `(I kron M_i)` block, entry `(p, k)` of `sum_i M_i Z_i = I`.
    Inverse { p: usize, k: usize },
    /// McCormick family 1..=4 for `(i, j, k)`.
    McCormick { family: u8, i: usize, j: usize, k: usize },
    Cardinality,
    /// Epigraph row of block `l`.
    Epigraph { l: usize },
    Extra,
}

impl RowKind {
    /// Parses the naming scheme produced by [`build`].
    pub fn from_name(name: &str) -> RowKind {
        let parts: Vec<&str> = name.split('_').collect();
        let nums = |s: &[&str]| -> Option<Vec<usize>> { s.iter().map(|t| t.parse().ok()).collect() };
        match parts.as_slice() {
            ["card"] => RowKind::Cardinality,
            ["eq", rest @ ..] if rest.len() == 2 => match nums(rest) {
                Some(v) => RowKind::Inverse { p: v[0], k: v[1] },
                None => RowKind::Extra,
            },
            ["epi", rest @ ..] if rest.len() == 1 => match nums(rest) {
                Some(v) => RowKind::Epigraph { l: v[0] },
                None => RowKind::Extra,
            },
            [fam, rest @ ..] if rest.len() == 3 && fam.len() == 3 && fam.starts_with("mc") => {
                match (fam[2..].parse::<u8>(), nums(rest)) {
                    (Ok(f @ 1..=4), Some(v)) => RowKind::McCormick { family: f, i: v[0], j: v[1], k: v[2] },
                    _ => RowKind::Extra,
                }
            }
            _ => RowKind::Extra,
        }
    }
}

/// A sparse linear row `sum coeffs (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn kind(&self) -> RowKind {
        RowKind::from_name(&self.name)
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Positions of the variable blocks in `x = (z, d, c, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub n: usize,
    pub m: usize,
}

impl VarLayout {
    pub fn num_vars(&self) -> usize {
        self.n * self.m * self.m + self.n + self.m * self.m + 1
    }

    /// Index of `z_ijk`.
    pub fn z(&self, i: usize, j: usize, k: usize) -> usize {
        i * self.m * self.m + k * self.m + j
    }

    pub fn d(&self, i: usize) -> usize {
        self.n * self.m * self.m + i
    }

    /// Index of `c_jk` (column-major `vec`).
    pub fn c(&self, j: usize, k: usize) -> usize {
        self.n * self.m * self.m + self.n + k * self.m + j
    }

    pub fn phi(&self) -> usize {
        self.num_vars() - 1
    }

    pub fn d_range(&self) -> std::ops::Range<usize> {
        self.d(0)..self.d(0) + self.n
    }

    pub fn c_range(&self) -> std::ops::Range<usize> {
        self.c(0, 0)..self.c(0, 0) + self.m * self.m
    }

    /// Canonical variable names `z_i_j_k`, `d_i`, `c_j_k`, `phi`.
    pub fn names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.num_vars()];
        for i in 0..self.n {
            for j in 0..self.m {
                for k in 0..self.m {
                    names[self.z(i, j, k)] = format!("z_{i}_{j}_{k}");
                }
            }
            names[self.d(i)] = format!("d_{i}");
        }
        for j in 0..self.m {
            for k in 0..self.m {
                names[self.c(j, k)] = format!("c_{j}_{k}");
            }
        }
        names[self.phi()] = "phi".to_string();
        names
    }

    /// Recovers the layout from canonical names, if they match.
    pub fn infer(names: &[String]) -> Option<VarLayout> {
        let nd = names.iter().filter(|s| s.starts_with("d_")).count();
        let nc = names.iter().filter(|s| s.starts_with("c_")).count();
        let m = (nc as f64).sqrt().round() as usize;
        if nd == 0 || m == 0 || m * m != nc {
            return None;
        }
        let layout = VarLayout { n: nd, m };
        (layout.num_vars() == names.len() && layout.names() == names).then_some(layout)
    }
}

/// A sparse MILP in minimization form.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub var_names: Vec<String>,
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<Row>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    pub integrality: Vec<bool>,
    pub layout: Option<VarLayout>,
}

impl MilpModel {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Rows with the given sense.
    pub fn rows_with(&self, sense: Sense) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.sense == sense)
    }

    /// `(row, col, value)` triplets of all rows in order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.coeffs.iter().map(move |&(c, v)| (r, c, v)))
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Sorts every row's coefficients by column and sums duplicates.
    pub fn finalize(&mut self) {
        for row in &mut self.rows {
            compress(&mut row.coeffs);
        }
        compress(&mut self.objective);
    }
}

pub(crate) fn compress(coeffs: &mut Vec<(usize, f64)>) {
    coeffs.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for &(j, v) in coeffs.iter() {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out.retain(|&(_, v)| v != 0.0);
    *coeffs = out;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_kind_parsing() {
        assert_eq!(RowKind::from_name("card"), RowKind::Cardinality);
        assert_eq!(RowKind::from_name("eq_1_2"), RowKind::Inverse { p: 1, k: 2 });
        assert_eq!(RowKind::from_name("epi_7"), RowKind::Epigraph { l: 7 });
        assert_eq!(
            RowKind::from_name("mc3_4_0_1"),
            RowKind::McCormick { family: 3, i: 4, j: 0, k: 1 }
        );
        assert_eq!(RowKind::from_name("mc5_4_0_1"), RowKind::Extra);
        assert_eq!(RowKind::from_name("cost"), RowKind::Extra);
        assert_eq!(RowKind::from_name("eq_a_b"), RowKind::Extra);
    }

    #[test]
    fn layout_roundtrip() {
        let l = VarLayout { n: 31, m: 3 };
        assert_eq!(l.num_vars(), 320);
        assert_eq!(VarLayout::infer(&l.names()), Some(l));
        let mut names = l.names();
        names[0] = "q".into();
        assert_eq!(VarLayout::infer(&names), None);
    }

    #[test]
    fn compress_merges_duplicates() {
        let mut c = vec![(3, 1.0), (1, 2.0), (3, 0.5), (2, 1.0), (2, -1.0)];
        compress(&mut c);
        assert_eq!(c, vec![(1, 2.0), (3, 1.5)]);
    }
}
