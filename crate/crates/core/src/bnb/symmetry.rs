use std::collections::BTreeMap;

use crate::milp::{DesignStructure, MilpModel, RowKind};

/// Classes of design points whose columns are interchangeable in `model`,
/// each sorted by index. Singletons are omitted.
pub(crate) fn interchangeable_points(model: &MilpModel, s: &DesignStructure) -> Vec<Vec<usize>> {
    let layout = s.layout;
    let n = layout.n;
    let mut sig: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            let d = layout.d(i);
            let mut v: Vec<u64> = s.elementary[i].iter().map(|x| x.to_bits()).collect();
            v.push(model.var_lower[d].to_bits());
            v.push(model.var_upper[d].to_bits());
            v.push(model.integrality[d] as u64);
            v
        })
        .collect();
    let z_end = n * layout.m * layout.m;
    let d_range = layout.d_range();
    for (r, row) in model.rows.iter().enumerate() {
        match row.kind() {
            RowKind::McCormick { family, i, j, k } if i < n => {
                sig[i].extend([family as u64, j as u64, k as u64, row.rhs.to_bits(), row.sense as u64]);
                for &(col, a) in &row.coeffs {
                    let tag = if col < z_end {
                        if col != layout.z(i, j, k) {
                            return Vec::new();
                        }
                        0
                    } else if col == layout.d(i) {
                        1
                    } else if layout.c_range().contains(&col) {
                        2 + (col - layout.c(0, 0)) as u64
                    } else {
                        return Vec::new();
                    };
                    sig[i].extend([tag, a.to_bits()]);
                }
            }
            RowKind::Inverse { .. } | RowKind::Epigraph { .. } => {}
            _ => {
                // any other row must treat points alike through d only
                for &(col, a) in &row.coeffs {
                    if col < z_end {
                        return Vec::new();
                    }
                    if d_range.contains(&col) {
                        sig[col - d_range.start].extend([r as u64, a.to_bits()]);
                    }
                }
            }
        }
    }
    let mut classes: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for (i, key) in sig.into_iter().enumerate() {
        classes.entry(key).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = classes.into_values().filter(|c| c.len() > 1).collect();
    out.sort();
    out
}
