//! Sparse symmetric matrices and the eigenvalue machinery built on them.
//!
//! [`SparseSym`] stores the upper triangle only. Extremal eigenvalues come from
//! a restarted Lanczos iteration ([`lambda_min`], [`smallest_eigenpairs`]);
//! [`eig_dense`] is the dense reference used to check it.

mod lanczos;
mod market;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lanczos::{lambda_min, lambda_min_with, smallest_eigenpairs, EigenPairs, LanczosOptions};
pub use market::{read_matrix_market, write_matrix_market};

/// Largest dimension accepted by [`eig_dense`].
pub const DENSE_CAP: usize = 2000;

/// Real symmetric matrix stored as its upper triangle.
///
/// Entries are kept sorted by `(i, j)` with `i <= j` and no duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self { n: values.len(), entries }
    }

    /// Builds a matrix from triplets. Lower-triangle triplets are mirrored to
    /// the upper triangle and duplicates are summed.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { i, j, n });
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
            }
            entries.push(if i <= j { (i, j, v) } else { (j, i, v) });
        }
        entries.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        Ok(Self { n, entries: merged })
    }

    /// Builds from a dense matrix, rejecting asymmetric input.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {} x {}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
                if a != 0.0 {
                    entries.push((i, j, a));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz_upper(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mul_vec(&vec![1.0; self.n])
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            if i == j {
                d[i] = v;
            }
        }
        d
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|e| e.0 == e.1)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let entries = if alpha == 0.0 {
            Vec::new()
        } else {
            self.entries.iter().map(|&(i, j, v)| (i, j, alpha * v)).collect()
        };
        Self { n: self.n, entries }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, other: &SparseSym, alpha: f64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.n, other.n)));
        }
        let iter = self
            .entries
            .iter()
            .copied()
            .chain(other.entries.iter().map(|&(i, j, v)| (i, j, alpha * v)));
        Self::from_triplets(self.n, iter)
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        self.add_scaled(&Self::identity(self.n), shift)
            .expect("identity has matching dimension")
    }

    pub fn principal_submatrix(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &v) in keep.iter().enumerate() {
            if v >= self.n {
                return Err(Error::IndexOutOfRange { i: v, j: v, n: self.n });
            }
            pos[v] = k;
        }
        let trip = self
            .entries
            .iter()
            .filter(|&&(i, j, _)| pos[i] != usize::MAX && pos[j] != usize::MAX)
            .map(|&(i, j, v)| (pos[i], pos[j], v));
        Self::from_triplets(keep.len(), trip)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Largest absolute row sum; an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.n];
        for &(i, j, v) in &self.entries {
            rows[i] += v.abs();
            if i != j {
                rows[j] += v.abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

/// Sorted eigenvalues together with the absolute resolution they were computed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub tolerance: f64,
}

impl Spectrum {
    pub fn min(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn max(&self) -> Option<f64> {
        self.eigenvalues.last().copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn count_below(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|&&v| v < threshold).count()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Full spectrum of a symmetric matrix via dense Householder/QR.
pub fn eig_dense(m: &SparseSym) -> Result<Spectrum> {
    dense_symmetric_spectrum(&m.to_dense())
}

/// Full spectrum of a dense symmetric matrix.
pub fn dense_symmetric_spectrum(m: &DMatrix<f64>) -> Result<Spectrum> {
    let n = m.nrows();
    if n > DENSE_CAP {
        return Err(Error::TooLarge { n, cap: DENSE_CAP });
    }
    if n == 0 {
        return Ok(Spectrum { eigenvalues: Vec::new(), tolerance: 0.0 });
    }
    let eig = m.clone().symmetric_eigen();
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let scale = eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    Ok(Spectrum { eigenvalues, tolerance: 1e-12 * scale })
}

/// Rank and kernel dimension; eigenvalues with `|λ| < tol` count as zero.
pub fn rank_and_kernel(m: &SparseSym, tol: f64) -> Result<(usize, usize)> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("rank tolerance must be positive, got {tol}")));
    }
    let spec = eig_dense(m)?;
    let kernel = spec.eigenvalues.iter().filter(|v| v.abs() < tol).count();
    Ok((m.n() - kernel, kernel))
}

/// Scale-free zero threshold: `1e-8 * max|λ|`, floored so that an all-zero
/// spectrum still has a positive threshold.
pub fn default_kernel_tol(spec: &Spectrum) -> f64 {
    (1e-8 * spec.max_abs()).max(1e-12)
}

/// [`rank_and_kernel`] with [`default_kernel_tol`].
pub fn rank_and_kernel_default(m: &SparseSym) -> Result<(usize, usize)> {
    let spec = eig_dense(m)?;
    let tol = default_kernel_tol(&spec);
    let kernel = spec.eigenvalues.iter().filter(|v| v.abs() < tol).count();
    Ok((m.n() - kernel, kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path_adjacency(n: usize) -> SparseSym {
        SparseSym::from_triplets(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap()
    }

    fn laplacian(a: &SparseSym) -> SparseSym {
        SparseSym::diagonal(&a.row_sums()).add_scaled(a, -1.0).unwrap()
    }

    #[test]
    fn triplets_are_normalised() {
        let m = SparseSym::from_triplets(3, [(2, 0, 1.0), (0, 2, 2.0), (1, 1, 4.0)]).unwrap();
        assert_eq!(m.entries(), &[(0, 2, 3.0), (1, 1, 4.0)]);
        assert_eq!(m.get(2, 0), 3.0);
        assert!(SparseSym::from_triplets(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn dense_diagonal() {
        let s = eig_dense(&SparseSym::diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn dense_path_adjacency_closed_form() {
        let s = eig_dense(&path_adjacency(4)).unwrap();
        // 2 cos(k pi / 5), k = 4..1
        let expect: Vec<f64> = (1..=4)
            .rev()
            .map(|k| 2.0 * (k as f64 * std::f64::consts::PI / 5.0).cos())
            .collect();
        for (a, b) in s.eigenvalues.iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.eigenvalues[0], -1.618, epsilon = 1e-3);
    }

    #[test]
    fn dense_path_laplacian_closed_form() {
        let s = eig_dense(&laplacian(&path_adjacency(4))).unwrap();
        // 2 - 2 cos(k pi / 4), k = 0..3
        for (k, v) in s.eigenvalues.iter().enumerate() {
            let expect = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 4.0).cos();
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_and_kernel(&SparseSym::zeros(4), 1e-8).unwrap(), (0, 4));
        assert_eq!(rank_and_kernel(&laplacian(&path_adjacency(4)), 1e-8).unwrap(), (3, 1));
        let two_edges = SparseSym::from_triplets(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(rank_and_kernel(&laplacian(&two_edges), 1e-8).unwrap(), (2, 2));
        assert!(rank_and_kernel(&SparseSym::zeros(2), 0.0).is_err());
        assert_eq!(rank_and_kernel_default(&SparseSym::zeros(3)).unwrap(), (0, 3));
    }

    #[test]
    fn dense_cap_enforced() {
        let big = SparseSym::identity(DENSE_CAP + 1);
        assert!(matches!(eig_dense(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn submatrix_and_shift() {
        let a = path_adjacency(4);
        let sub = a.principal_submatrix(&[1, 2]).unwrap();
        assert_eq!(sub.entries(), &[(0, 1, 1.0)]);
        let s = a.shifted(2.0);
        assert_eq!(s.diag(), vec![2.0; 4]);
    }
}
