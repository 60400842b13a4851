//! Elementwise bounds `L <= Sigma* <= U` on the optimal covariance matrix,
//! derived from a reference design with criterion value `alpha`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{OptexError, Result};
use crate::linalg::{
    column_space_contains, invert, max_eig, pinv_raw, pinv_sym, DenseMatrix, SymMatrix,
};
use crate::model::{design_value, ApproximateDesign, CriterionSpec, DesignProblem, ExactDesign};

/// Covariance bounds together with the `alpha` they were built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovBounds {
    #[serde(rename = "L")]
    pub lower: SymMatrix,
    #[serde(rename = "U")]
    pub upper: SymMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl CovBounds {
    /// Checks shape, finiteness and `L <= U`.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.lower.dim() != m || self.upper.dim() != m {
            return Err(OptexError::InvalidBounds(format!(
                "bounds are {}x{} / {}x{}, expected {m}x{m}",
                self.lower.dim(),
                self.lower.dim(),
                self.upper.dim(),
                self.upper.dim()
            )));
        }
        for j in 0..m {
            for k in 0..m {
                let (l, u) = (self.lower.get(j, k), self.upper.get(j, k));
                if !l.is_finite() || !u.is_finite() {
                    return Err(OptexError::InfiniteBound { row: j, col: k });
                }
                if l > u {
                    return Err(OptexError::InvalidBounds(format!("L > U at ({j}, {k})")));
                }
            }
        }
        Ok(())
    }

    /// Parses and validates a `{"L": [[..]], "U": [[..]]}` document.
    pub fn from_json(text: &str, m: usize) -> Result<Self> {
        let b: CovBounds =
            serde_json::from_str(text).map_err(|e| OptexError::InvalidBounds(e.to_string()))?;
        b.validate(m)?;
        Ok(b)
    }

    /// `L <= sigma <= U` elementwise within `tol`.
    pub fn contains(&self, sigma: &SymMatrix, tol: f64) -> bool {
        let m = sigma.dim();
        (0..m).all(|j| {
            (0..m).all(|k| {
                let c = sigma.get(j, k);
                c >= self.lower.get(j, k) - tol && c <= self.upper.get(j, k) + tol
            })
        })
    }
}

/// `alpha = Phi_B(M(d0))`.
pub fn reference_alpha(problem: &DesignProblem, spec: &CriterionSpec, d0: &ExactDesign) -> Result<f64> {
    design_value(problem, spec, d0)
}

/// Moore-Penrose approximate design for `e_j`: block norms of `B^+ e_j`,
/// normalized to sum one.
pub fn mp_design(spec: &CriterionSpec, j: usize) -> ApproximateDesign {
    mp_designs(spec).swap_remove(j)
}

fn mp_designs(spec: &CriterionSpec) -> Vec<ApproximateDesign> {
    let bp = pinv_raw(&spec.concatenated());
    let widths = spec.block_widths();
    (0..spec.m())
        .map(|j| {
            let h = bp.column(j);
            let mut off = 0;
            let norms: Vec<f64> = widths
                .iter()
                .map(|&s| {
                    let v = h.rows(off, s).norm();
                    off += s;
                    v
                })
                .collect();
            ApproximateDesign::normalized(norms).expect("e_j lies in the column space of B")
        })
        .collect()
}

/// `alpha * lambda_max(X' N^+(w) X)`, valid whenever `C(X)` lies in
/// `C(N(w))`.
pub fn lemma1_bound(spec: &CriterionSpec, alpha: f64, w: &ApproximateDesign, x: &DenseMatrix) -> Result<f64> {
    if w.weights().len() != spec.k() {
        return Err(OptexError::DimensionMismatch(format!(
            "{} weights for {} blocks",
            w.weights().len(),
            spec.k()
        )));
    }
    let n = spec.weighted_gram(w.weights());
    if !column_space_contains(&n, x)? {
        return Err(OptexError::ColumnSpaceViolation);
    }
    Ok(alpha * quad_max_eig(&pinv_sym(&n), x))
}

fn quad_max_eig(np: &SymMatrix, x: &DenseMatrix) -> f64 {
    let xm = x.as_matrix();
    let q = SymMatrix::symmetrize(xm.transpose() * np.as_matrix() * xm);
    max_eig(&q).max(0.0)
}

struct Ingredients {
    k: f64,
    bb_inv: SymMatrix,
    mp: Vec<ApproximateDesign>,
    mp_pinv: Vec<SymMatrix>,
}

fn ingredients(spec: &CriterionSpec) -> Result<Ingredients> {
    let ones = vec![1.0; spec.k()];
    let bb_inv = invert(&spec.weighted_gram(&ones))?;
    let mp = mp_designs(spec);
    let mp_pinv = mp.iter().map(|w| pinv_sym(&spec.weighted_gram(w.weights()))).collect();
    Ok(Ingredients { k: spec.k() as f64, bb_inv, mp, mp_pinv })
}

fn variance_bounds(ing: &Ingredients, alpha: f64) -> Vec<f64> {
    (0..ing.bb_inv.dim())
        .map(|j| {
            let uniform = ing.k * ing.bb_inv.get(j, j);
            let mp = ing.mp_pinv[j].get(j, j);
            alpha * uniform.min(mp)
        })
        .collect()
}

/// Type I bounds `sqrt(D_j D_k)` where `D_j` is the smaller of the
/// uniform-design and Moore-Penrose-design variance bounds.
pub fn type1_bounds(spec: &CriterionSpec, alpha: f64) -> Result<SymMatrix> {
    let ing = ingredients(spec)?;
    Ok(type1_from(&ing, alpha))
}

fn type1_from(ing: &Ingredients, alpha: f64) -> SymMatrix {
    let dv = variance_bounds(ing, alpha);
    let m = dv.len();
    SymMatrix::symmetrize(DMatrix::from_fn(m, m, |j, k| {
        if j == k {
            dv[j]
        } else {
            (dv[j] * dv[k]).sqrt()
        }
    }))
}

/// Type II bounds on the off-diagonal entries; the diagonal is taken from
/// [`type1_bounds`].
pub fn type2_bounds(spec: &CriterionSpec, alpha: f64) -> Result<SymMatrix> {
    let ing = ingredients(spec)?;
    Ok(type2_from(spec, &ing, alpha))
}

fn type2_from(spec: &CriterionSpec, ing: &Ingredients, alpha: f64) -> SymMatrix {
    let dv = variance_bounds(ing, alpha);
    let m = dv.len();
    let mut out = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(dv));
    for j in 0..m {
        for k in (j + 1)..m {
            let e = DenseMatrix::unit_pair(m, j, k);
            let uniform = ing.k * quad_max_eig(&ing.bb_inv, &e);
            let wjk: Vec<f64> = ing.mp[j]
                .weights()
                .iter()
                .zip(ing.mp[k].weights())
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let mp = quad_max_eig(&pinv_sym(&spec.weighted_gram(&wjk)), &e);
            let v = 0.5 * alpha * uniform.min(mp);
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    SymMatrix::symmetrize(out)
}

/// Bounds from an explicit `alpha`: `U = min(type I, type II)`,
/// `L_jj = 0`, `L_jk = -U_jk`.
pub fn bounds_from_alpha(spec: &CriterionSpec, alpha: f64) -> Result<CovBounds> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(OptexError::InvalidBounds(format!("alpha must be positive and finite, got {alpha}")));
    }
    let ing = ingredients(spec)?;
    let t1 = type1_from(&ing, alpha);
    let t2 = type2_from(spec, &ing, alpha);
    let m = spec.m();
    let upper = DMatrix::from_fn(m, m, |j, k| t1.get(j, k).min(t2.get(j, k)));
    let lower = DMatrix::from_fn(m, m, |j, k| if j == k { 0.0 } else { -upper[(j, k)] });
    let b = CovBounds {
        lower: SymMatrix::new(lower)?,
        upper: SymMatrix::new(upper)?,
        alpha: Some(alpha),
    };
    b.validate(m)?;
    Ok(b)
}

/// Bounds from the reference design `d0`.
pub fn combined_bounds(problem: &DesignProblem, spec: &CriterionSpec, d0: &ExactDesign) -> Result<CovBounds> {
    let alpha = reference_alpha(problem, spec, d0)?;
    bounds_from_alpha(spec, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{info_matrix, quadratic_grid, CriterionKind};
    use proptest::prelude::*;

    fn unit_problem(m: usize) -> DesignProblem {
        let regs = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        DesignProblem::new(regs, m, None).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let p = unit_problem(3);
        let a = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let d = ExactDesign::new(vec![1, 1, 1]);
        assert!((reference_alpha(&p, &a, &d).unwrap() - 3.0).abs() < 1e-14);

        let p2 = DesignProblem::new(vec![vec![1.0, 0.0], vec![0.0, 2.0]], 2, None).unwrap();
        let mv = CriterionSpec::preset(CriterionKind::MV, &p2).unwrap();
        let d2 = ExactDesign::new(vec![1, 1]);
        assert_eq!(info_matrix(&p2, &d2).unwrap(), SymMatrix::diagonal(&[1.0, 4.0]));
        assert!((reference_alpha(&p2, &mv, &d2).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mp_design_presets() {
        let p = unit_problem(3);
        let mv = CriterionSpec::preset(CriterionKind::MV, &p).unwrap();
        for j in 0..3 {
            let w = mp_design(&mv, j);
            for (l, &wl) in w.weights().iter().enumerate() {
                assert!((wl - if l == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let a = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        assert_eq!(mp_design(&a, 1).weights(), &[1.0]);
    }

    #[test]
    fn mp_design_g_quadratic() {
        let q = quadratic_grid(5, 3).unwrap();
        let g = CriterionSpec::preset(CriterionKind::G, &q).unwrap();
        let fp = pinv_raw(&q.f_matrix());
        for t in 0..3 {
            let w = mp_design(&g, t);
            let h = fp.column(t);
            let s: f64 = h.iter().map(|v| v.abs()).sum();
            for i in 0..5 {
                assert!((w.weights()[i] - h[i].abs() / s).abs() < 1e-12);
            }
            assert!((w.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let n = g.weighted_gram(w.weights());
            assert!(column_space_contains(&n, &DenseMatrix::unit(3, t)).unwrap());
        }
    }

    #[test]
    fn lemma1_examples() {
        let p = unit_problem(3);
        let alpha = 2.5;
        let a = CriterionSpec::preset(CriterionKind::A, &p).unwrap();
        let b = lemma1_bound(&a, alpha, &ApproximateDesign::uniform(1), &DenseMatrix::unit(3, 1)).unwrap();
        assert!((b - alpha).abs() < 1e-12);

        let mv = CriterionSpec::preset(CriterionKind::MV, &p).unwrap();
        let w = ApproximateDesign::new(vec![0.0, 1.0, 0.0]).unwrap();
        let b = lemma1_bound(&mv, alpha, &w, &DenseMatrix::unit(3, 1)).unwrap();
        assert!((b - alpha).abs() < 1e-12);
        assert_eq!(
            lemma1_bound(&mv, alpha, &w, &DenseMatrix::unit(3, 0)),
            Err(OptexError::ColumnSpaceViolation)
        );

        // uniform weights: N(w) = BB'/K
        let q = quadratic_grid(6, 3).unwrap();
        let g = CriterionSpec::preset(CriterionKind::G, &q).unwrap();
        let f = q.f_matrix();
        let bb_inv = (&f * f.transpose()).try_inverse().unwrap();
        for j in 0..3 {
            let b = lemma1_bound(&g, alpha, &ApproximateDesign::uniform(6), &DenseMatrix::unit(3, j)).unwrap();
            let expected = alpha * 6.0 * bb_inv[(j, j)];
            assert!((b - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn a_and_mv_table_values() {
        let q = quadratic_grid(9, 4).unwrap();
        let alpha = 1.7;
        let a = bounds_from_alpha(&CriterionSpec::preset(CriterionKind::A, &q).unwrap(), alpha).unwrap();
        let mv = bounds_from_alpha(&CriterionSpec::preset(CriterionKind::MV, &q).unwrap(), alpha).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let ea = if j == k { alpha } else { alpha / 2.0 };
                assert!((a.upper.get(j, k) - ea).abs() <= 1e-14 * alpha);
                assert!((mv.upper.get(j, k) - alpha).abs() <= 1e-14 * alpha);
                let el = if j == k { 0.0 } else { -a.upper.get(j, k) };
                assert_eq!(a.lower.get(j, k), el);
            }
        }
        let t1 = type1_bounds(&CriterionSpec::preset(CriterionKind::A, &q).unwrap(), alpha).unwrap();
        assert!((t1.get(0, 1) - alpha).abs() < 1e-14);
    }

    fn i_spec_with_ff_inv(diag: [f64; 2]) -> CriterionSpec {
        // F with FF' = diag(1/d1, 1/d2)
        let f = DenseMatrix::from_rows(&[
            vec![(1.0 / diag[0]).sqrt(), 0.0],
            vec![0.0, (1.0 / diag[1]).sqrt()],
        ])
        .unwrap();
        let p = DesignProblem::new(f.transpose().to_rows(), 2, None).unwrap();
        let spec = CriterionSpec::preset(CriterionKind::I, &p).unwrap();
        assert_eq!(spec.k(), 1);
        spec
    }

    #[test]
    fn i_preset_identity_example() {
        let spec = i_spec_with_ff_inv([1.0, 1.0]);
        let alpha = 3.0;
        let t1 = type1_bounds(&spec, alpha).unwrap();
        let t2 = type2_bounds(&spec, alpha).unwrap();
        assert!((t1.get(0, 1) - alpha).abs() < 1e-12);
        assert!((t2.get(0, 1) - alpha / 2.0).abs() < 1e-12);
    }

    #[test]
    fn i_preset_skewed_example() {
        let spec = i_spec_with_ff_inv([100.0, 1.0]);
        let alpha = 1.0;
        let t1 = type1_bounds(&spec, alpha).unwrap();
        let t2 = type2_bounds(&spec, alpha).unwrap();
        assert!((t1.get(0, 1) - 10.0).abs() < 1e-9);
        assert!((t2.get(0, 1) - 50.0).abs() < 1e-9);
        let c = bounds_from_alpha(&spec, alpha).unwrap();
        assert!((c.upper.get(0, 1) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn override_validation() {
        let ok = r#"{"L": [[0, -1], [-1, 0]], "U": [[2, 1], [1, 2]]}"#;
        assert!(CovBounds::from_json(ok, 2).is_ok());
        let asym = r#"{"L": [[0, -1], [-0.5, 0]], "U": [[2, 1], [1, 2]]}"#;
        assert!(CovBounds::from_json(asym, 2).is_err());
        let crossed = r#"{"L": [[3, -1], [-1, 0]], "U": [[2, 1], [1, 2]]}"#;
        assert!(matches!(CovBounds::from_json(crossed, 2), Err(OptexError::InvalidBounds(_))));
        assert!(CovBounds::from_json(ok, 3).is_err());
    }

    fn random_spec() -> impl Strategy<Value = CriterionSpec> {
        (2usize..5, 0usize..4, 1usize..5, proptest::collection::vec(-2.0f64..2.0, 40), any::<u64>())
            .prop_filter_map("valid spec", |(m, extra, k, vals, cut_seed)| {
                let cols = m + extra;
                let k = k.min(cols);
                let b = DMatrix::from_fn(m, cols, |i, j| vals[(i * 8 + j) % 40]);
                // k contiguous, nonempty column blocks
                let mut cuts: Vec<usize> = (1..cols).collect();
                let mut state = cut_seed;
                while cuts.len() > k - 1 {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    cuts.remove((state >> 33) as usize % cuts.len());
                }
                let mut blocks = Vec::new();
                let mut start = 0;
                for end in cuts.into_iter().chain([cols]) {
                    blocks.push(DenseMatrix::new(b.columns(start, end - start).into_owned()).ok()?);
                    start = end;
                }
                CriterionSpec::custom(blocks).ok()
            })
    }

    proptest! {
        #[test]
        fn lemma_c_column_spaces(spec in random_spec()) {
            let m = spec.m();
            let mp = mp_designs(&spec);
            for j in 0..m {
                let n = spec.weighted_gram(mp[j].weights());
                prop_assert!(column_space_contains(&n, &DenseMatrix::unit(m, j)).unwrap());
                for k in (j + 1)..m {
                    let w: Vec<f64> = mp[j].weights().iter().zip(mp[k].weights()).map(|(a, b)| 0.5 * (a + b)).collect();
                    let n = spec.weighted_gram(&w);
                    prop_assert!(column_space_contains(&n, &DenseMatrix::unit_pair(m, j, k)).unwrap());
                }
            }
        }

        #[test]
        fn type1_geometric_mean_consistency(spec in random_spec(), alpha in 0.1f64..10.0) {
            let t1 = type1_bounds(&spec, alpha).unwrap();
            for j in 0..spec.m() {
                for k in 0..spec.m() {
                    prop_assert!(t1.get(j, k) <= (t1.get(j, j) * t1.get(k, k)).sqrt() * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn bounds_scale_linearly(spec in random_spec(), a1 in 0.1f64..10.0, a2 in 0.1f64..10.0) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let b1 = bounds_from_alpha(&spec, lo).unwrap();
            let b2 = bounds_from_alpha(&spec, hi).unwrap();
            for j in 0..spec.m() {
                for k in 0..spec.m() {
                    prop_assert!(b1.upper.get(j, k) <= b2.upper.get(j, k) * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn psd_matrices_obeying_alpha_lie_inside(spec in random_spec(), raw in proptest::collection::vec(-1.0f64..1.0, 25)) {
            // any PSD Sigma with Psi_B(Sigma) <= alpha satisfies the bounds
            let m = spec.m();
            let g = DMatrix::from_fn(m, m, |i, j| raw[i * 5 + j]);
            let sigma = SymMatrix::symmetrize(&g * g.transpose());
            let alpha = crate::model::psi_value(&spec, &sigma).unwrap();
            prop_assume!(alpha > 1e-6);
            let b = bounds_from_alpha(&spec, alpha).unwrap();
            prop_assert!(b.contains(&sigma, 1e-9 * alpha));
        }
    }
}
