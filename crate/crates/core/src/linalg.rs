//! Dense kernels shared by the extraction algorithms.
//!
//! Matrices are stored column-major: column `j` of an `m x n` matrix is the
//! contiguous slice `values[j*m..(j+1)*m]`, which makes per-data-point access
//! (the hot path of every algorithm here) a plain slice borrow.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Default number of subspace power iterations for [`truncated_svd_basis`].
pub const DEFAULT_POWER_ITERS: usize = 10;

/// Relative residual below which [`OrthoBasis::extend`] reports rank deficiency.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense `m x n` real matrix; columns are data points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from column-major values. Rejects empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at row {}, column {}",
                pos % rows,
                pos / rows
            )));
        }
        Ok(DataMatrix { rows, cols, values })
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut values = Vec::with_capacity(rows * cols);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::Dimension(format!(
                    "column {j} has length {}, expected {rows}",
                    c.len()
                )));
            }
            values.extend_from_slice(c);
        }
        Self::new(rows, cols, values)
    }

    /// Builds a matrix from row-major nested rows (convenient for literals).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = vec![0.0; m * n];
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::Dimension(format!(
                    "row {i} has length {}, expected {n}",
                    r.len()
                )));
            }
            for (j, &v) in r.iter().enumerate() {
                values[j * m + i] = v;
            }
        }
        Self::new(m, n, values)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        DataMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.values[i * n + i] = 1.0;
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.rows + i]
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.values[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.rows)
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns().map(|c| c[i]).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn transpose(&self) -> DataMatrix {
        let mut out = DataMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.values[i * self.cols + j] = self.get(i, j);
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &DataMatrix) -> Result<DataMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DataMatrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.values[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in rhs.col(j).iter().enumerate() {
                if b != 0.0 {
                    axpy(b, self.col(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// `self^T * rhs`, without forming the transpose.
    pub fn tr_matmul(&self, rhs: &DataMatrix) -> Result<DataMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DataMatrix::zeros(self.cols, rhs.cols);
        for j in 0..rhs.cols {
            let b = rhs.col(j);
            for i in 0..self.cols {
                out.values[j * self.cols + i] = dot(self.col(i), b);
            }
        }
        Ok(out)
    }

    /// `self^T * x` for a vector `x` of length `rows`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        self.columns().map(|c| dot(c, x)).collect()
    }

    /// Entry-wise `self - rhs`.
    pub fn sub(&self, rhs: &DataMatrix) -> Result<DataMatrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::Dimension(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let values = self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect();
        Ok(DataMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }

    /// Columns `indices` of `self`, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<DataMatrix> {
        let mut values = Vec::with_capacity(self.rows * indices.len());
        for &j in indices {
            if j >= self.cols {
                return Err(Error::Dimension(format!(
                    "column index {j} out of range for {} columns",
                    self.cols
                )));
            }
            values.extend_from_slice(self.col(j));
        }
        DataMatrix::new(self.rows, indices.len(), values)
    }
}

/// Matrix with orthonormal columns `v_1..v_k` (k may be zero).
///
/// Also represents the orthogonal-complement projector `I - V V^T`, which is
/// only ever applied, never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    rows: usize,
    values: Vec<f64>,
}

impl OrthoBasis {
    /// The empty basis of `R^rows`; its projector is the identity.
    pub fn empty(rows: usize) -> Self {
        OrthoBasis {
            rows,
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.values.len().checked_div(self.rows).unwrap_or(0)
    }

    pub fn col(&self, k: usize) -> &[f64] {
        &self.values[k * self.rows..(k + 1) * self.rows]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.rows.max(1))
    }

    /// Returns `x - V (V^T x)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector of length {} against basis of {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    // Modified Gram-Schmidt sweep.
    fn project_in_place(&self, x: &mut [f64]) {
        for v in self.columns() {
            let c = dot(v, x);
            axpy(-c, v, x);
        }
    }

    /// Appends the normalized residual of `w`. Fails with
    /// [`Error::RankDeficient`] when the residual norm is at most
    /// `DEGENERATE_TOL * ‖w‖`.
    pub fn extend(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector of length {} against basis of {} rows",
                w.len(),
                self.rows
            )));
        }
        let tolerance = DEGENERATE_TOL * norm2(w);
        let mut res = w.to_vec();
        self.project_in_place(&mut res);
        let residual = norm2(&res);
        if residual <= tolerance || residual == 0.0 {
            return Err(Error::RankDeficient {
                residual,
                tolerance,
            });
        }
        // second pass restores orthogonality lost to cancellation
        self.project_in_place(&mut res);
        let nrm = norm2(&res);
        res.iter_mut().for_each(|v| *v /= nrm);
        self.values.extend_from_slice(&res);
        Ok(())
    }

    /// Copies the basis into an `m x k` matrix. Fails for `k = 0`.
    pub fn to_matrix(&self) -> Result<DataMatrix> {
        DataMatrix::new(self.rows, self.cols(), self.values.clone())
    }

    /// Entry-wise maximum of `|V^T V - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.cols();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(self.col(i), self.col(j)) - target).abs());
            }
        }
        worst
    }
}

/// `x - V (V^T x)`; see [`OrthoBasis::apply`].
pub fn projector_apply(basis: &OrthoBasis, x: &[f64]) -> Result<Vec<f64>> {
    basis.apply(x)
}

/// Returns a copy of `basis` extended by the normalized residual of `w`.
pub fn projector_extend(basis: &OrthoBasis, w: &[f64]) -> Result<OrthoBasis> {
    let mut out = basis.clone();
    out.extend(w)?;
    Ok(out)
}

/// Orthonormalizes the `k` columns (each of length `m`) of `block` in place
/// by two passes of modified Gram-Schmidt. A column that collapses is
/// replaced by the first canonical vector outside the current span.
fn orthonormalize(block: &mut [f64], m: usize) {
    let k = block.len() / m;
    for j in 0..k {
        let (done, rest) = block.split_at_mut(j * m);
        let col = &mut rest[..m];
        let scale = norm2(col);
        for _ in 0..2 {
            for prev in done.chunks_exact(m) {
                let c = dot(prev, col);
                axpy(-c, prev, col);
            }
        }
        let mut nrm = norm2(col);
        if nrm <= 1e-13 * scale || nrm == 0.0 {
            for e in 0..m {
                col.iter_mut().for_each(|v| *v = 0.0);
                col[e] = 1.0;
                for _ in 0..2 {
                    for prev in done.chunks_exact(m) {
                        let c = dot(prev, col);
                        axpy(-c, prev, col);
                    }
                }
                nrm = norm2(col);
                if nrm > 1e-8 {
                    break;
                }
            }
        }
        col.iter_mut().for_each(|v| *v /= nrm);
    }
}

/// Orthonormal `m x r` basis approximating the span of the top-`r` left
/// singular vectors of `x`, by randomized subspace iteration.
///
/// Starts from `X Ω` with a seeded Gaussian `n x r` block `Ω`, then performs
/// `power_iters` rounds of `Y <- orth(X orth(X^T Y))`.
pub fn truncated_svd_basis(
    x: &DataMatrix,
    r: usize,
    power_iters: usize,
    seed: u64,
) -> Result<OrthoBasis> {
    let (m, n) = x.shape();
    if r == 0 || r > m.min(n) {
        return Err(Error::Dimension(format!(
            "rank {r} must lie in [1, min({m}, {n})]"
        )));
    }
    if power_iters == 0 {
        return Err(Error::Parameter("power_iters must be at least 1".into()));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("matrix contains non-finite values".into()));
    }

    let mut rng = rng::stream(seed, rng::tag::SVD_START, 0);
    let omega: Vec<f64> = (0..n * r).map(|_| StandardNormal.sample(&mut rng)).collect();

    let mut y = vec![0.0; m * r];
    let mut z = omega;
    orthonormalize(&mut z, n);
    mul_block(x, &z, &mut y, r);
    orthonormalize(&mut y, m);

    for _ in 0..power_iters {
        tr_mul_block(x, &y, &mut z, r);
        orthonormalize(&mut z, n);
        mul_block(x, &z, &mut y, r);
        orthonormalize(&mut y, m);
    }

    Ok(OrthoBasis { rows: m, values: y })
}

/// `out (m x r) = X (m x n) * z (n x r)`
fn mul_block(x: &DataMatrix, z: &[f64], out: &mut [f64], r: usize) {
    let (m, n) = x.shape();
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..r {
        let dst = &mut out[k * m..(k + 1) * m];
        for (j, &c) in z[k * n..(k + 1) * n].iter().enumerate() {
            if c != 0.0 {
                axpy(c, x.col(j), dst);
            }
        }
    }
}

/// `out (n x r) = X^T (n x m) * y (m x r)`
fn tr_mul_block(x: &DataMatrix, y: &[f64], out: &mut [f64], r: usize) {
    let (m, n) = x.shape();
    for k in 0..r {
        let yk = &y[k * m..(k + 1) * m];
        for (j, o) in out[k * n..(k + 1) * n].iter_mut().enumerate() {
            *o = dot(x.col(j), yk);
        }
    }
}

/// Eigenvalues of a symmetric `k x k` matrix (column-major), ascending,
/// by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &[f64], k: usize) -> Vec<f64> {
    assert_eq!(a.len(), k * k);
    let mut a = a.to_vec();
    let idx = |i: usize, j: usize| j * k + i;
    for _sweep in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[idx(i, j)] * a[idx(i, j)])
            .sum();
        let diag: f64 = (0..k).map(|i| a[idx(i, i)] * a[idx(i, i)]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = a[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[idx(q, q)] - a[idx(p, p)]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..k {
                    let aip = a[idx(i, p)];
                    let aiq = a[idx(i, q)];
                    a[idx(i, p)] = c * aip - s * aiq;
                    a[idx(i, q)] = s * aip + c * aiq;
                }
                for j in 0..k {
                    let apj = a[idx(p, j)];
                    let aqj = a[idx(q, j)];
                    a[idx(p, j)] = c * apj - s * aqj;
                    a[idx(q, j)] = s * apj + c * aqj;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..k).map(|i| a[idx(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

/// Singular values of `w`, descending, from the eigenvalues of `W^T W`.
/// Accurate to roughly `sqrt(eps) * σ_max` for the smallest values, which is
/// plenty for condition-number gating.
pub fn singular_values(w: &DataMatrix) -> Vec<f64> {
    let g = w.tr_matmul(w).expect("W^T W is always defined");
    let mut sv: Vec<f64> = symmetric_eigenvalues(g.as_slice(), w.cols())
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    sv.reverse();
    sv
}

/// `σ_max / σ_min`; infinite for rank-deficient input.
pub fn condition_number(w: &DataMatrix) -> f64 {
    let sv = singular_values(w);
    let min = *sv.last().unwrap();
    if min == 0.0 {
        f64::INFINITY
    } else {
        sv[0] / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(x: &DataMatrix, y: &OrthoBasis) -> f64 {
        x.columns()
            .map(|c| {
                let p = y.apply(c).unwrap();
                dot(&p, &p)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn identity_residual_is_one() {
        let x = DataMatrix::identity(3);
        let y = truncated_svd_basis(&x, 2, DEFAULT_POWER_ITERS, 1).unwrap();
        assert_eq!(y.cols(), 2);
        assert!(y.orthonormality_error() < 1e-12);
        assert!((residual(&x, &y) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exact_rank_two_is_captured() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [0.3, 1.0, -1.0, 2.0, 0.0];
        let c = [2.0, 0.0, 1.0, -1.0];
        let d = [1.0, 1.0, 1.0, -4.0, 0.7];
        let mut vals = vec![0.0; 20];
        for j in 0..5 {
            for i in 0..4 {
                vals[j * 4 + i] = a[i] * b[j] + c[i] * d[j];
            }
        }
        let x = DataMatrix::new(4, 5, vals).unwrap();
        let y = truncated_svd_basis(&x, 2, DEFAULT_POWER_ITERS, 3).unwrap();
        assert!(residual(&x, &y) <= 1e-8);
    }

    #[test]
    fn svd_rejects_bad_rank() {
        let x = DataMatrix::identity(3);
        assert!(matches!(
            truncated_svd_basis(&x, 4, 5, 0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            truncated_svd_basis(&x, 0, 5, 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn svd_is_deterministic() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.5], [0.1, -1.0, 2.0]]).unwrap();
        let a = truncated_svd_basis(&x, 2, 4, 11).unwrap();
        let b = truncated_svd_basis(&x, 2, 4, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projector_apply_examples() {
        let empty = OrthoBasis::empty(3);
        assert_eq!(empty.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let mut e1 = OrthoBasis::empty(3);
        e1.extend(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(e1.apply(&[3.0, 4.0, 5.0]).unwrap(), vec![0.0, 4.0, 5.0]);

        let mut v = OrthoBasis::empty(3);
        v.extend(&[0.3, -1.2, 2.0]).unwrap();
        let z = v.apply(v.col(0)).unwrap();
        assert!(norm2(&z) <= 1e-12);

        assert!(matches!(e1.apply(&[1.0, 2.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn projector_extend_examples() {
        let v = projector_extend(&OrthoBasis::empty(3), &[0.0, 2.0, 0.0]).unwrap();
        assert_eq!(v.col(0), &[0.0, 1.0, 0.0]);

        let e1 = projector_extend(&OrthoBasis::empty(3), &[1.0, 0.0, 0.0]).unwrap();
        let v = projector_extend(&e1, &[5.0, 3.0, 0.0]).unwrap();
        assert_eq!(v.cols(), 2);
        assert_eq!(v.col(1), &[0.0, 1.0, 0.0]);

        assert!(matches!(
            projector_extend(&e1, &[7.0, 0.0, 0.0]),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            projector_extend(&e1, &[0.0, 0.0, 0.0]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn constructor_rejects_nan_and_empty() {
        assert!(matches!(
            DataMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            DataMatrix::new(0, 2, vec![]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            DataMatrix::new(2, 2, vec![1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3
        let e = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
        let d = DataMatrix::from_rows(&[[3.0, 0.0], [0.0, 0.5], [0.0, 0.0]]).unwrap();
        assert!((condition_number(&d) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = DataMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = DataMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, DataMatrix::from_rows(&[[2.0, 1.0], [4.0, 3.0]]).unwrap());
        let t = a.tr_matmul(&b).unwrap();
        assert_eq!(t, DataMatrix::from_rows(&[[3.0, 1.0], [4.0, 2.0]]).unwrap());
        assert_eq!(a.transpose().transpose(), a);
    }
}
