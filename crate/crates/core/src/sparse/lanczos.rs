//! Thick-restart Lanczos with full reorthogonalisation.
//!
//! The basis `V` and its image `A V` are both stored, so the Rayleigh–Ritz
//! matrix `Vᵀ A V` and the Ritz residuals are computed exactly from stored
//! vectors. The iteration starts from the all-ones vector; whenever the Krylov
//! sequence collapses (e.g. all-ones is an eigenvector of a regular graph) a
//! fixed-seed pseudo-random direction is injected so results stay reproducible.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SparseSym;
use crate::error::{Error, Result};

const INJECTION_SEED: u64 = 0x5EED_1A2C_2057;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Residual-norm tolerance; the returned eigenvalues are within `tol` of
    /// true eigenvalues.
    pub tol: f64,
    /// Basis size before a thick restart. `None` picks `max(2k + 30, 40)`.
    pub max_basis: Option<usize>,
    /// Cap on matrix-vector products.
    pub max_matvecs: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_basis: None, max_matvecs: 200_000 }
    }
}

impl LanczosOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, `vectors[j]` belongs to `values[j]`.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

/// Smallest eigenvalue of `m`, accurate to `tol`.
pub fn lambda_min(m: &SparseSym, tol: f64) -> Result<f64> {
    lambda_min_with(m, &LanczosOptions::with_tol(tol))
}

pub fn lambda_min_with(m: &SparseSym, opts: &LanczosOptions) -> Result<f64> {
    Ok(smallest_eigenpairs(m, 1, opts)?.values[0])
}

/// The `k` smallest eigenpairs of `m`.
pub fn smallest_eigenpairs(m: &SparseSym, k: usize, opts: &LanczosOptions) -> Result<EigenPairs> {
    let n = m.n();
    if n == 0 {
        return Err(Error::Empty("matrix has dimension 0"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("requested {k} eigenpairs of a {n} x {n} matrix")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }

    let max_basis = opts.max_basis.unwrap_or((2 * k + 30).max(40)).max(k + 1).min(n);
    let keep = ((k + max_basis) / 2).max(k).min(max_basis.saturating_sub(1)).max(1);
    let tol = opts.tol.max(64.0 * f64::EPSILON * m.norm_inf());

    let mut rng = ChaCha8Rng::seed_from_u64(INJECTION_SEED);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut image: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut candidate = vec![1.0; n];
    let mut matvecs = 0usize;

    loop {
        while basis.len() < max_basis {
            let Some(v) = next_direction(candidate, &basis, &mut rng) else {
                break;
            };
            let w = m.mul_vec(&v);
            matvecs += 1;
            if matvecs > opts.max_matvecs {
                return Err(Error::NonConvergence { cap: opts.max_matvecs });
            }
            candidate = w.clone();
            basis.push(v);
            image.push(w);
        }

        let d = basis.len();
        let mut h = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = 0.5 * (dot(&basis[i], &image[j]) + dot(&basis[j], &image[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let combine = |vs: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (i, v) in vs.iter().enumerate() {
                let c = eig.eigenvectors[(i, col)];
                if c != 0.0 {
                    axpy(&mut out, c, v);
                }
            }
            out
        };

        let wanted = k.min(d);
        let mut values = Vec::with_capacity(wanted);
        let mut vectors = Vec::with_capacity(wanted);
        let mut residuals = Vec::with_capacity(wanted);
        let mut first_unconverged: Option<Vec<f64>> = None;
        for &col in order.iter().take(wanted) {
            let theta = eig.eigenvalues[col];
            let x = combine(&basis, col);
            let mut r = combine(&image, col);
            axpy(&mut r, -theta, &x);
            let rn = norm(&r);
            if rn > tol && first_unconverged.is_none() {
                first_unconverged = Some(r);
            }
            values.push(theta);
            vectors.push(x);
            residuals.push(rn);
        }

        let exhausted = d == n || d < max_basis;
        if first_unconverged.is_none() || exhausted {
            if first_unconverged.is_some() {
                log::debug!("lanczos: accepting exhausted subspace, residuals {residuals:?}");
            }
            return Ok(EigenPairs { values, vectors, residuals, matvecs });
        }

        let keep_now = keep.min(d - 1);
        let new_basis: Vec<Vec<f64>> =
            order.iter().take(keep_now).map(|&c| combine(&basis, c)).collect();
        let new_image: Vec<Vec<f64>> =
            order.iter().take(keep_now).map(|&c| combine(&image, c)).collect();
        basis = new_basis;
        image = new_image;
        candidate = first_unconverged.expect("checked above");
    }
}

/// Orthonormalises `candidate` against `basis` (two Gram–Schmidt passes);
/// substitutes seeded random directions when it lies in the span.
fn next_direction(mut candidate: Vec<f64>, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let n = candidate.len();
    if basis.len() >= n {
        return None;
    }
    for _ in 0..32 {
        let before = norm(&candidate);
        for _ in 0..2 {
            for b in basis {
                let c = dot(&candidate, b);
                axpy(&mut candidate, -c, b);
            }
        }
        let after = norm(&candidate);
        if before > 0.0 && after > 1e-8 * before && after > 1e-300 {
            candidate.iter_mut().for_each(|x| *x /= after);
            return Some(candidate);
        }
        candidate = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    }
    None
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
