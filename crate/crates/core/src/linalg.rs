//! Sparse storage and a banded Cholesky factorization.
//!
//! Every operator assembled on the tensor meshes in this crate is banded once
//! nodes are numbered lexicographically (x₁ fastest), so a dense band
//! factorization is both simple and fast at desk-scale sizes.

use crate::error::{Error, Result};

/// Compressed sparse row matrix, square.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.into_iter();
            if let Some((mut cj, mut cv)) = iter.next() {
                for (j, v) in iter {
                    if j == cj {
                        cv += v;
                    } else {
                        col_idx.push(cj);
                        values.push(cv);
                        cj = j;
                        cv = v;
                    }
                }
                col_idx.push(cj);
                values.push(cv);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Row `i` of `A x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row_dot(i, x)).sum()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row_dot(i, y)).sum()
    }

    /// Restriction to the rows/columns listed in `keep` (in that order).
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            position[i] = k;
        }
        let mut triplets = Vec::new();
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                let pj = position[j];
                if pj != usize::MAX {
                    triplets.push((k, pj, v));
                }
            }
        }
        Self::from_triplets(keep.len(), &triplets)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &CsrMatrix, b: f64) -> Self {
        assert_eq!(self.n, other.n);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        Self::from_triplets(self.n, &triplets)
    }

    /// Largest `|a_ij − a_ji|` relative to the largest `|a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut scale = 0.0_f64;
        let mut defect = 0.0_f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                scale = scale.max(v.abs());
                defect = defect.max((v - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    /// Half bandwidth: `max |i − j|` over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite band matrix.
///
/// Row `i` of `L` is stored in `data[i * (bw + 1) ..]`, entry `L[i][i - bw + k]`
/// at offset `k`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = a.half_bandwidth();
        let width = bw + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[i * width + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let first = i.saturating_sub(bw);
            for j in first..=i {
                let jfirst = j.saturating_sub(bw).max(first);
                let mut sum = data[i * width + (j + bw - i)];
                for k in jfirst..j {
                    sum -= data[i * width + (k + bw - i)] * data[j * width + (k + bw - j)];
                }
                if j == i {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: sum });
                    }
                    data[i * width + bw] = sum.sqrt();
                } else {
                    data[i * width + (j + bw - i)] = sum / data[j * width + bw];
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, bw, width) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut sum = b[i];
            for k in first..i {
                sum -= self.data[i * width + (k + bw - i)] * b[k];
            }
            b[i] = sum / self.data[i * width + bw];
        }
        for i in (0..n).rev() {
            b[i] /= self.data[i * width + bw];
            let bi = b[i];
            let first = i.saturating_sub(bw);
            for k in first..i {
                b[k] -= self.data[i * width + (k + bw - i)] * bi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplacian(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = BandCholesky::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-11);
        }
    }

    #[test]
    fn cholesky_solves_wide_band() {
        // 2D five-point Laplacian on a 7x7 grid, bandwidth 7
        let m = 7;
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let k = i + m * j;
                t.push((k, k, 4.0));
                if i + 1 < m {
                    t.push((k, k + 1, -1.0));
                    t.push((k + 1, k, -1.0));
                }
                if j + 1 < m {
                    t.push((k, k + m, -1.0));
                    t.push((k + m, k, -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(m * m, &t);
        assert_eq!(a.half_bandwidth(), m);
        let x_true: Vec<f64> = (0..m * m).map(|i| 1.0 + i as f64 / 10.0).collect();
        let x = BandCholesky::factor(&a).unwrap().solve(&a.mul_vec(&x_true));
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-11);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(BandCholesky::factor(&a), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn restrict_and_combine() {
        let a = laplacian(4);
        let r = a.restrict(&[1, 2]);
        assert_eq!(r.get(0, 0), 2.0);
        assert_eq!(r.get(0, 1), -1.0);
        let c = a.combine(2.0, &a, -1.0);
        assert_eq!(c.get(3, 3), 2.0);
        assert_eq!(a.symmetry_defect(), 0.0);
    }
}
