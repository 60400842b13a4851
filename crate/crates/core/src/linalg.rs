//! Dense linear algebra on small matrices: inversion, Moore-Penrose
//! pseudoinverse, extreme eigenvalues and column-space tests.
//!
//! Everything here works on `m x m` matrices with `m` in the tens at most, so
//! plain dense routines from `nalgebra` are used throughout.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{OptexError, Result};

/// Relative eigenvalue threshold under which a matrix counts as singular.
pub const SINGULARITY_RATIO: f64 = 1e-10;

/// Relative singular-value cutoff used by [`pinv`].
pub const PINV_CUTOFF: f64 = 1e-12;

/// A general real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

/// A symmetric real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(OptexError::DimensionMismatch("matrix must be non-empty".into()));
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(OptexError::DimensionMismatch("matrix entries must be finite".into()));
        }
        Ok(Self(inner))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(OptexError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    /// Column vector.
    pub fn column(v: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(v.len(), 1, v))
    }

    /// Unit vector `e_j` in `R^m`.
    pub fn unit(m: usize, j: usize) -> Self {
        let mut e = DMatrix::zeros(m, 1);
        e[(j, 0)] = 1.0;
        Self(e)
    }

    /// The `m x 2` matrix `(e_j, e_k)`.
    pub fn unit_pair(m: usize, j: usize, k: usize) -> Self {
        let mut e = DMatrix::zeros(m, 2);
        e[(j, 0)] = 1.0;
        e[(k, 1)] = 1.0;
        Self(e)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nrows())
            .map(|i| (0..self.ncols()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }
}

impl SymMatrix {
    /// Wraps a square matrix, rejecting asymmetry above `1e-12` relative to
    /// the largest entry (and `1e-12` absolute for small matrices).
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() != inner.ncols() || inner.nrows() == 0 {
            return Err(OptexError::DimensionMismatch(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(OptexError::DimensionMismatch("matrix entries must be finite".into()));
        }
        let scale = inner.amax().max(1.0);
        let n = inner.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (inner[(i, j)] - inner[(j, i)]).abs() >= 1e-12 * scale {
                    return Err(OptexError::DimensionMismatch(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self(inner))
    }

    /// Averages `a` with its transpose.
    pub fn symmetrize(a: DMatrix<f64>) -> Self {
        let t = a.transpose();
        Self((a + t) * 0.5)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?.into_inner())
    }

    pub fn zeros(m: usize) -> Self {
        Self(DMatrix::zeros(m, m))
    }

    pub fn identity(m: usize) -> Self {
        Self(DMatrix::identity(m, m))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `lambda_min / lambda_max`, or `0` for the zero matrix.
    pub fn conditioning_ratio(&self) -> f64 {
        let ev = self.eigenvalues();
        let max = *ev.last().unwrap_or(&0.0);
        if max <= 0.0 {
            return 0.0;
        }
        ev[0] / max
    }

    /// Positive definite in the sense `lambda_min > 1e-10 * lambda_max`.
    pub fn is_nonsingular(&self) -> bool {
        self.conditioning_ratio() > SINGULARITY_RATIO
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        DenseMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Inverse of a positive definite matrix.
pub fn invert(m: &SymMatrix) -> Result<SymMatrix> {
    if !m.is_nonsingular() {
        return Err(OptexError::SingularMatrix);
    }
    let chol = m.0.clone().cholesky().ok_or(OptexError::SingularMatrix)?;
    Ok(SymMatrix::symmetrize(chol.inverse()))
}

/// Moore-Penrose pseudoinverse via the SVD, zeroing singular values below
/// `1e-12 * sigma_max`.
pub fn pinv(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix(pinv_raw(&a.0))
}

pub(crate) fn pinv_raw(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let cutoff = PINV_CUTOFF * smax;
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out += (vt.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

/// Pseudoinverse of a symmetric nonnegative definite matrix through its
/// eigendecomposition.
pub fn pinv_sym(m: &SymMatrix) -> SymMatrix {
    let eig = SymmetricEigen::new(m.0.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let dim = m.dim();
    let mut out = DMatrix::zeros(dim, dim);
    if lmax > 0.0 {
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l.abs() > PINV_CUTOFF * lmax {
                let v = eig.eigenvectors.column(k);
                out += (v * v.transpose()) / l;
            }
        }
    }
    SymMatrix::symmetrize(out)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig(m: &SymMatrix) -> f64 {
    *m.eigenvalues().last().expect("non-empty matrix")
}

/// `true` iff every column of `x` lies in the column space of `m`,
/// i.e. `||(M M^+ - I) X||_F <= 1e-8 ||X||_F`.
pub fn column_space_contains(m: &SymMatrix, x: &DenseMatrix) -> Result<bool> {
    if x.nrows() != m.dim() {
        return Err(OptexError::DimensionMismatch(format!(
            "X has {} rows, M is {}x{}",
            x.nrows(),
            m.dim(),
            m.dim()
        )));
    }
    let proj = &m.0 * pinv_sym(m).0;
    let resid = &proj * &x.0 - &x.0;
    Ok(resid.norm() <= 1e-8 * x.0.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn invert_identity_and_diagonal() {
        let i3 = SymMatrix::identity(3);
        assert_eq!(invert(&i3).unwrap(), i3);
        let d = invert(&SymMatrix::diagonal(&[2.0, 4.0])).unwrap();
        assert!((d.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((d.get(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn invert_random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 2..8 {
            let g = random_dense(&mut rng, m, m);
            let a = SymMatrix::symmetrize(g.transpose() * &g + DMatrix::identity(m, m));
            let inv = invert(&a).unwrap();
            let resid = (a.as_matrix() * inv.as_matrix() - DMatrix::<f64>::identity(m, m)).norm();
            assert!(resid < 1e-8 * a.as_matrix().norm());
        }
    }

    #[test]
    fn invert_rejects_singular() {
        let s = SymMatrix::diagonal(&[1.0, 0.0]);
        assert_eq!(invert(&s), Err(OptexError::SingularMatrix));
    }

    #[test]
    fn pinv_identity_and_rank_one_column() {
        let i = DenseMatrix::new(DMatrix::identity(4, 4)).unwrap();
        assert!((pinv(&i).as_matrix() - i.as_matrix()).norm() < 1e-14);

        let v = [3.0, -4.0, 12.0];
        let p = pinv(&DenseMatrix::column(&v).unwrap());
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        assert_eq!(p.nrows(), 1);
        for (j, vj) in v.iter().enumerate() {
            assert!((p.get(0, j) - vj / norm2).abs() < 1e-15);
        }
    }

    #[test]
    fn pinv_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_dense(&mut rng, 4, 6);
            let ap = pinv_raw(&a);
            let scale = a.norm();
            let rel = |x: DMatrix<f64>, s: f64| x.norm() / s.max(1e-300);
            assert!(rel(&a * &ap * &a - &a, scale) < 1e-8);
            assert!(rel(&ap * &a * &ap - &ap, ap.norm()) < 1e-8);
            let aap = &a * &ap;
            assert!(rel(&aap - aap.transpose(), aap.norm()) < 1e-8);
            let apa = &ap * &a;
            assert!(rel(&apa - apa.transpose(), apa.norm()) < 1e-8);
            // involution
            assert!(rel(pinv_raw(&ap) - &a, scale) < 1e-7);
        }
    }

    #[test]
    fn pinv_rank_deficient() {
        // rank-2 product of 5x2 and 2x4 factors
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_dense(&mut rng, 5, 2) * random_dense(&mut rng, 2, 4);
        let ap = pinv_raw(&a);
        assert!((&a * &ap * &a - &a).norm() < 1e-8 * a.norm());
        assert!((pinv_raw(&ap) - &a).norm() < 1e-7 * a.norm());
    }

    #[test]
    fn invert_agrees_with_pinv_on_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_dense(&mut rng, 5, 5);
        let a = SymMatrix::symmetrize(g.transpose() * &g + DMatrix::identity(5, 5) * 0.1);
        let inv = invert(&a).unwrap();
        let p = pinv_raw(a.as_matrix());
        assert!((inv.as_matrix() - &p).norm() < 1e-8 * p.norm());
    }

    #[test]
    fn max_eig_examples() {
        assert!((max_eig(&SymMatrix::diagonal(&[1.0, 3.0])) - 3.0).abs() < 1e-14);
        assert!((max_eig(&SymMatrix::identity(4)) - 1.0).abs() < 1e-14);
        // closed form for 2x2 symmetric
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (a, b, c): (f64, f64, f64) =
                (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let m = SymMatrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
            let expected = (a + c) / 2.0 + (((a - c) / 2.0).powi(2) + b * b).sqrt();
            let got = max_eig(&m);
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn max_eig_has_eigenvector_and_bounds_rayleigh_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = random_dense(&mut rng, 4, 4);
        let m = SymMatrix::symmetrize(&g + g.transpose());
        let lmax = max_eig(&m);
        let eig = SymmetricEigen::new(m.as_matrix().clone());
        let k = eig.eigenvalues.imax();
        let v = eig.eigenvectors.column(k);
        assert!((m.as_matrix() * v - v * lmax).norm() <= 1e-7 * v.norm());
        for _ in 0..100 {
            let x = random_dense(&mut rng, 4, 1);
            let rq = (x.transpose() * m.as_matrix() * &x)[(0, 0)] / (x.transpose() * &x)[(0, 0)];
            assert!(lmax >= rq - 1e-9);
        }
    }

    #[test]
    fn column_space_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = DenseMatrix::new(random_dense(&mut rng, 3, 2)).unwrap();
        assert!(column_space_contains(&SymMatrix::identity(3), &x).unwrap());

        let e1e1 = SymMatrix::diagonal(&[1.0, 0.0]);
        assert!(!column_space_contains(&e1e1, &DenseMatrix::unit(2, 1)).unwrap());
        assert!(column_space_contains(&e1e1, &DenseMatrix::unit(2, 0)).unwrap());
    }

    #[test]
    fn sym_matrix_rejects_asymmetry() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_ok());
    }
}
