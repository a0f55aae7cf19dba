//! Small dense matrices, generic over the scalar mode.
//!
//! The recovery procedures only ever manipulate matrices with a handful of
//! rows, so everything here is written for clarity over asymptotics:
//! Gauss-Jordan elimination with magnitude pivoting (exact in rational mode),
//! closed-form 2x2 eigendecompositions, and a thin float-only layer over
//! nalgebra for singular values and Schur eigenvalues.


use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    nrows: usize,
    ncols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn new(nrows: usize, ncols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "matrix data length mismatch");
        Matrix { nrows, ncols, data }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix::new(nrows, ncols, vec![S::zero(); nrows * ncols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = S::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged rows");
            data.extend(row);
        }
        Matrix { nrows, ncols, data }
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                data.push(f(r, c));
            }
        }
        Matrix { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn at(&self, r: usize, c: usize) -> &S {
        &self.data[r * self.ncols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut S {
        &mut self.data[r * self.ncols + c]
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn col(&self, c: usize) -> Vec<S> {
        (0..self.nrows).map(|r| self.at(r, c).clone()).collect()
    }

    pub fn rows_vec(&self) -> Vec<Vec<S>> {
        (0..self.nrows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.ncols, self.nrows, |r, c| self.at(c, r).clone())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        Matrix::from_fn(self.nrows, other.ncols, |r, c| {
            let mut acc = S::zero();
            for k in 0..self.ncols {
                acc = acc + self.at(r, k).clone() * other.at(k, c).clone();
            }
            acc
        })
    }

    pub fn scale(&self, s: &S) -> Self {
        Matrix::new(
            self.nrows,
            self.ncols,
            self.data.iter().map(|x| x.clone() * s.clone()).collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Matrix::new(
            self.nrows,
            self.ncols,
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Matrix::new(
            self.nrows,
            self.ncols,
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        )
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Matrix::from_fn(rows.len(), self.ncols, |r, c| self.at(rows[r], c).clone())
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        Matrix::from_fn(self.nrows, cols.len(), |r, c| self.at(r, cols[c]).clone())
    }

    pub fn row_sums(&self) -> Vec<S> {
        (0..self.nrows)
            .map(|r| {
                let mut acc = S::zero();
                for c in 0..self.ncols {
                    acc = acc + self.at(r, c).clone();
                }
                acc
            })
            .collect()
    }

    pub fn col_sums(&self) -> Vec<S> {
        (0..self.ncols)
            .map(|c| {
                let mut acc = S::zero();
                for r in 0..self.nrows {
                    acc = acc + self.at(r, c).clone();
                }
                acc
            })
            .collect()
    }

    /// Divide every row by its sum. Fails on a zero (or float-negligible) sum.
    pub fn normalized_rows(&self, context: &str) -> Result<Self> {
        let sums = self.row_sums();
        for s in &sums {
            if s.eq_within(&S::zero(), 1e-300) {
                return Err(Error::ExceptionalInput(format!(
                    "zero row sum while normalizing in {context}"
                )));
            }
        }
        Ok(Matrix::from_fn(self.nrows, self.ncols, |r, c| {
            self.at(r, c).clone() / sums[r].clone()
        }))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(Scalar::abs_f64).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a.clone() - b.clone()).abs_f64())
            .fold(0.0, f64::max)
    }

    /// Gauss-Jordan inverse with magnitude pivoting. Exact in rational mode.
    pub fn inverse(&self, context: &str) -> Result<Self> {
        assert_eq!(self.nrows, self.ncols, "inverse of non-square matrix");
        let n = self.nrows;
        let mut a = self.clone();
        let mut inv = Matrix::<S>::identity(n);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| {
                    a.at(r1, col)
                        .abs_f64()
                        .partial_cmp(&a.at(r2, col).abs_f64())
                        .unwrap()
                })
                .unwrap();
            if a.at(pivot_row, col).is_zero() || a.at(pivot_row, col).abs_f64() == 0.0 {
                return Err(Error::Singular {
                    context: context.to_string(),
                });
            }
            if pivot_row != col {
                for c in 0..n {
                    a.data.swap(pivot_row * n + c, col * n + c);
                    inv.data.swap(pivot_row * n + c, col * n + c);
                }
            }
            let pivot = a.at(col, col).clone();
            for c in 0..n {
                *a.at_mut(col, c) = a.at(col, c).clone() / pivot.clone();
                *inv.at_mut(col, c) = inv.at(col, c).clone() / pivot.clone();
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.at(r, col).clone();
                if factor.is_zero() {
                    continue;
                }
                for c in 0..n {
                    *a.at_mut(r, c) = a.at(r, c).clone() - factor.clone() * a.at(col, c).clone();
                    *inv.at_mut(r, c) =
                        inv.at(r, c).clone() - factor.clone() * inv.at(col, c).clone();
                }
            }
        }
        Ok(inv)
    }

    pub fn determinant(&self) -> S {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut a = self.clone();
        let mut det = S::one();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| {
                    a.at(r1, col)
                        .abs_f64()
                        .partial_cmp(&a.at(r2, col).abs_f64())
                        .unwrap()
                })
                .unwrap();
            if a.at(pivot_row, col).is_zero() || a.at(pivot_row, col).abs_f64() == 0.0 {
                return S::zero();
            }
            if pivot_row != col {
                for c in 0..n {
                    a.data.swap(pivot_row * n + c, col * n + c);
                }
                det = -det;
            }
            let pivot = a.at(col, col).clone();
            det = det * pivot.clone();
            for r in (col + 1)..n {
                let factor = a.at(r, col).clone() / pivot.clone();
                if factor.is_zero() {
                    continue;
                }
                for c in col..n {
                    *a.at_mut(r, c) = a.at(r, c).clone() - factor.clone() * a.at(col, c).clone();
                }
            }
        }
        det
    }

    /// Row rank by Gauss elimination. In float mode a pivot is considered
    /// zero when its magnitude drops below `rel_tol` times the largest entry
    /// of the input; rational mode tests exact zeros.
    pub fn rank_with_tol(&self, rel_tol: f64) -> usize {
        let thresh = match S::mode() {
            Mode::Rational => 0.0,
            Mode::Float => rel_tol * self.max_abs().max(1e-300),
        };
        let mut a = self.clone();
        let (nr, nc) = (a.nrows, a.ncols);
        let mut rank = 0;
        let mut row = 0;
        for col in 0..nc {
            if row >= nr {
                break;
            }
            let pivot_row = (row..nr)
                .max_by(|&r1, &r2| {
                    a.at(r1, col)
                        .abs_f64()
                        .partial_cmp(&a.at(r2, col).abs_f64())
                        .unwrap()
                })
                .unwrap();
            let negligible = match S::mode() {
                Mode::Rational => a.at(pivot_row, col).is_zero(),
                Mode::Float => a.at(pivot_row, col).abs_f64() <= thresh,
            };
            if negligible {
                continue;
            }
            if pivot_row != row {
                for c in 0..nc {
                    a.data.swap(pivot_row * nc + c, row * nc + c);
                }
            }
            let pivot = a.at(row, col).clone();
            for r in (row + 1)..nr {
                let factor = a.at(r, col).clone() / pivot.clone();
                if factor.is_zero() {
                    continue;
                }
                for c in col..nc {
                    *a.at_mut(r, c) = a.at(r, c).clone() - factor.clone() * a.at(row, c).clone();
                }
            }
            rank += 1;
            row += 1;
        }
        rank
    }

    /// One vector spanning the nullspace of a square matrix expected to have
    /// rank `n - 1`. Used for eigenvector extraction; returns `None` when no
    /// pivot-free column is found (rank n) or the deficiency exceeds one.
    pub fn null_vector(&self, rel_tol: f64) -> Option<Vec<S>> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let thresh = match S::mode() {
            Mode::Rational => 0.0,
            Mode::Float => rel_tol * self.max_abs().max(1e-300),
        };
        let mut a = self.clone();
        let mut pivot_cols = Vec::new();
        let mut row = 0;
        for col in 0..n {
            if row >= n {
                break;
            }
            let pivot_row = (row..n)
                .max_by(|&r1, &r2| {
                    a.at(r1, col)
                        .abs_f64()
                        .partial_cmp(&a.at(r2, col).abs_f64())
                        .unwrap()
                })
                .unwrap();
            let negligible = match S::mode() {
                Mode::Rational => a.at(pivot_row, col).is_zero(),
                Mode::Float => a.at(pivot_row, col).abs_f64() <= thresh,
            };
            if negligible {
                continue;
            }
            if pivot_row != row {
                for c in 0..n {
                    a.data.swap(pivot_row * n + c, row * n + c);
                }
            }
            let pivot = a.at(row, col).clone();
            for c in 0..n {
                *a.at_mut(row, c) = a.at(row, c).clone() / pivot.clone();
            }
            for r in 0..n {
                if r == row {
                    continue;
                }
                let factor = a.at(r, col).clone();
                if factor.is_zero() {
                    continue;
                }
                for c in 0..n {
                    *a.at_mut(r, c) = a.at(r, c).clone() - factor.clone() * a.at(row, c).clone();
                }
            }
            pivot_cols.push(col);
            row += 1;
        }
        if pivot_cols.len() != n - 1 {
            return None;
        }
        let free_col = (0..n).find(|c| !pivot_cols.contains(c))?;
        let mut v = vec![S::zero(); n];
        v[free_col] = S::one();
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -a.at(r, free_col).clone();
        }
        Some(v)
    }
}

/// Outcome of a 2x2 eigendecomposition attempt.
pub enum Eigen2<S> {
    /// Two separated eigenvalues with left eigenvectors.
    Distinct([(S, Vec<S>); 2]),
    /// Eigenvalues collide within the separation threshold (or the matrix is
    /// a multiple of the identity); the caller should try another slice.
    Repeated,
}

/// Closed-form eigendecomposition of a 2x2 matrix, returning left
/// eigenvectors. `gap_tol` is the relative separation threshold below which
/// the spectrum is declared repeated (float mode; rational mode compares
/// exactly). Complex spectra are an error in both modes.
pub fn left_eigen_2x2<S: Scalar>(m: &Matrix<S>, gap_tol: f64, context: &str) -> Result<Eigen2<S>> {
    assert_eq!((m.nrows(), m.ncols()), (2, 2));
    let (a, b, c, d) = (
        m.at(0, 0).clone(),
        m.at(0, 1).clone(),
        m.at(1, 0).clone(),
        m.at(1, 1).clone(),
    );
    let tr = a.clone() + d.clone();
    let det = a.clone() * d.clone() - b.clone() * c.clone();
    let four = S::from_int(4);
    let disc = tr.clone() * tr.clone() - four * det;
    let scale = m.max_abs().max(1.0);
    if S::mode() == Mode::Float {
        let dv = disc.to_f64();
        let gap_floor = gap_tol * scale;
        if dv < 0.0 {
            if dv.abs() <= gap_floor * gap_floor {
                return Ok(Eigen2::Repeated);
            }
            return Err(Error::ComplexEigenvalues {
                context: context.to_string(),
            });
        }
        if dv.sqrt() < gap_floor {
            return Ok(Eigen2::Repeated);
        }
    } else if disc < S::zero() {
        return Err(Error::ComplexEigenvalues {
            context: context.to_string(),
        });
    } else if disc.is_zero() {
        return Ok(Eigen2::Repeated);
    }
    let root = disc.sqrt_checked(context)?;
    let two = S::from_int(2);
    let l1 = (tr.clone() + root.clone()) / two.clone();
    let l2 = (tr - root) / two;
    let vec_for = |l: &S| -> Option<Vec<S>> {
        // Left eigenvector of [[a,b],[c,d]] at l: (c, l-a) or (l-d, b).
        let v1 = vec![c.clone(), l.clone() - a.clone()];
        let v2 = vec![l.clone() - d.clone(), b.clone()];
        let n1 = v1[0].abs_f64().max(v1[1].abs_f64());
        let n2 = v2[0].abs_f64().max(v2[1].abs_f64());
        let floor = match S::mode() {
            Mode::Rational => 0.0,
            Mode::Float => 1e-14 * scale,
        };
        if n1 > n2 && n1 > floor {
            Some(v1)
        } else if n2 > floor && (v2[0].abs_f64() > 0.0 || v2[1].abs_f64() > 0.0) {
            Some(v2)
        } else if n1 > floor {
            Some(v1)
        } else {
            None
        }
    };
    match (vec_for(&l1), vec_for(&l2)) {
        (Some(u1), Some(u2)) => Ok(Eigen2::Distinct([(l1, u1), (l2, u2)])),
        _ => Ok(Eigen2::Repeated),
    }
}

/// Left eigendecomposition of a small square matrix with separated spectrum.
/// Sizes 1 and 2 are closed-form in both modes; larger sizes require float
/// mode. Returns `Ok(None)` when eigenvalues collide within `gap_tol`.
pub fn left_eigen<S: Scalar>(
    m: &Matrix<S>,
    gap_tol: f64,
    context: &str,
) -> Result<Option<Vec<(S, Vec<S>)>>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    match n {
        0 => Ok(Some(Vec::new())),
        1 => Ok(Some(vec![(m.at(0, 0).clone(), vec![S::one()])])),
        2 => match left_eigen_2x2(m, gap_tol, context)? {
            Eigen2::Distinct(pairs) => Ok(Some(pairs.into_vec())),
            Eigen2::Repeated => Ok(None),
        },
        _ => {
            let eigvals = S::general_eigenvalues(n, m.data(), context)?;
            let scale = m.max_abs().max(1.0);
            for i in 0..n {
                for j in (i + 1)..n {
                    let gap = (eigvals[i].clone() - eigvals[j].clone()).abs_f64();
                    if gap < gap_tol * scale {
                        return Ok(None);
                    }
                }
            }
            let mt = m.transpose();
            let mut pairs = Vec::with_capacity(n);
            for l in eigvals {
                let shifted = mt.sub(&Matrix::identity(n).scale(&l));
                let v = shifted.null_vector(1e-9).ok_or_else(|| {
                    Error::ExceptionalInput(format!(
                        "eigenvector extraction failed in {context}"
                    ))
                })?;
                pairs.push((l, v));
            }
            Ok(Some(pairs))
        }
    }
}

trait IntoVecExt<S> {
    fn into_vec(self) -> Vec<(S, Vec<S>)>;
}

impl<S> IntoVecExt<S> for [(S, Vec<S>); 2] {
    fn into_vec(self) -> Vec<(S, Vec<S>)> {
        let [a, b] = self;
        vec![a, b]
    }
}

// Float-only helpers backed by nalgebra.

fn to_dmatrix(nrows: usize, ncols: usize, data: &[f64]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(nrows, ncols, data)
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix<f64>) -> Vec<f64> {
    let dm = to_dmatrix(m.nrows(), m.ncols(), m.data());
    let mut sv: Vec<f64> = dm.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Minimum-norm least-squares solution of `m x = rhs`, with singular
/// directions below `rel_cutoff` times the top singular value discarded.
/// Returns zeros for a zero matrix.
pub fn svd_solve(m: &Matrix<f64>, rhs: &[f64], rel_cutoff: f64) -> Vec<f64> {
    let dm = to_dmatrix(m.nrows(), m.ncols(), m.data());
    let svd = nalgebra::SVD::new(dm, true, true);
    let top = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if top == 0.0 {
        return vec![0.0; m.ncols()];
    }
    let b = nalgebra::DVector::from_row_slice(rhs);
    match svd.solve(&b, rel_cutoff * top) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; m.ncols()],
    }
}

/// Numerical rank: count of singular values above `rel_cutoff` times the
/// largest singular value.
pub fn svd_rank(m: &Matrix<f64>, rel_cutoff: f64) -> usize {
    let sv = singular_values(m);
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_cutoff * top).count()
}

/// Ratio of smallest to largest singular value (0 for a zero matrix).
pub fn sigma_min_ratio(m: &Matrix<f64>) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&top), Some(&bot)) if top > 0.0 => bot / top,
        _ => 0.0,
    }
}

/// Real eigenvalues of a square row-major f64 matrix via its Schur form.
/// Fails if any eigenvalue has a non-negligible imaginary part.
pub fn float_eigenvalues(n: usize, data: &[f64], context: &str) -> Result<Vec<f64>> {
    let dm = to_dmatrix(n, n, data);
    let scale = data.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let eig = dm.complex_eigenvalues();
    let mut out = Vec::with_capacity(n);
    for z in eig.iter() {
        if z.im.abs() > 1e-8 * scale {
            return Err(Error::ComplexEigenvalues {
                context: context.to_string(),
            });
        }
        out.push(z.re);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        <BigRational as Scalar>::from_ratio(n, d)
    }

    #[test]
    fn rational_inverse_is_exact() {
        let m = Matrix::from_rows(vec![
            vec![rat(1, 2), rat(1, 3)],
            vec![rat(1, 4), rat(1, 1)],
        ]);
        let inv = m.inverse("test").unwrap();
        let prod = m.matmul(&inv);
        assert_eq!(prod, Matrix::identity(2));
    }

    #[test]
    fn singular_matrix_detected() {
        let m = Matrix::from_rows(vec![
            vec![rat(1, 1), rat(2, 1)],
            vec![rat(2, 1), rat(4, 1)],
        ]);
        assert!(m.inverse("test").is_err());
        assert_eq!(m.rank_with_tol(1e-10), 1);
    }

    #[test]
    fn eigen_2x2_recovers_conjugated_diagonal() {
        // M = P^-1 D P with D = diag(1/5, 4/5) has left eigenvectors equal
        // to the rows of P (up to scale).
        let p = Matrix::from_rows(vec![
            vec![rat(2, 3), rat(1, 3)],
            vec![rat(1, 4), rat(3, 4)],
        ]);
        let d = Matrix::from_rows(vec![
            vec![rat(1, 5), rat(0, 1)],
            vec![rat(0, 1), rat(4, 5)],
        ]);
        let m = p.inverse("test").unwrap().matmul(&d).matmul(&p);
        match left_eigen_2x2(&m, 1e-8, "test").unwrap() {
            Eigen2::Distinct(pairs) => {
                for (l, v) in pairs {
                    // v M = l v
                    let vm = Matrix::new(1, 2, v.clone()).matmul(&m);
                    let lv = Matrix::new(1, 2, v).scale(&l);
                    assert_eq!(vm, lv);
                }
            }
            Eigen2::Repeated => panic!("expected distinct eigenvalues"),
        }
    }

    #[test]
    fn scalar_matrix_reports_repeated() {
        let m = Matrix::identity(2).scale(&rat(3, 7));
        assert!(matches!(
            left_eigen_2x2(&m, 1e-8, "test").unwrap(),
            Eigen2::Repeated
        ));
    }

    #[test]
    fn float_null_vector() {
        let m = Matrix::<f64>::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        let v = m.null_vector(1e-9).unwrap();
        let prod = m.matmul(&Matrix::new(2, 1, v));
        assert!(prod.max_abs() < 1e-12);
    }

    #[test]
    fn svd_rank_detects_deficiency() {
        let m = Matrix::<f64>::from_rows(vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 1.0, 1.0],
        ]);
        assert_eq!(svd_rank(&m, 1e-10), 2);
    }
}
