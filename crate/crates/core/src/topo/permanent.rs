//! Exact permanents, the permanent bound on code distance, and the Bethe
//! permanent.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest order accepted by [`permanent`].
pub const PERMANENT_CAP: usize = 20;
/// Largest order accepted by [`bethe_permanent`].
pub const BETHE_CAP: usize = 12;

fn check_square<T>(m: &[Vec<T>], cap: usize) -> Result<usize> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!("permanent needs a square matrix, got {n} rows")));
    }
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    Ok(n)
}

/// Ryser's formula with Gray-code subset updates. The empty matrix has
/// permanent 1.
pub fn permanent(m: &[Vec<u64>]) -> Result<BigUint> {
    let n = check_square(m, PERMANENT_CAP)?;
    if n == 0 {
        return Ok(BigUint::one());
    }
    let mut row_sums = vec![0i128; n];
    let mut total = BigInt::zero();
    let mut gray: u32 = 0;
    for k in 1u32..(1u32 << n) {
        let next = k ^ (k >> 1);
        let col = (gray ^ next).trailing_zeros() as usize;
        let add = next & (1 << col) != 0;
        for (r, s) in row_sums.iter_mut().enumerate() {
            let v = i128::from(m[r][col]);
            *s += if add { v } else { -v };
        }
        gray = next;
        if row_sums.contains(&0) {
            continue;
        }
        let prod = row_sums.iter().fold(BigInt::one(), |acc, &s| acc * BigInt::from(s));
        // sign (-1)^(n - |subset|)
        if (n - next.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total.to_biguint().ok_or_else(|| Error::invalid("negative permanent of a non-negative matrix"))
}

/// Permanent bound on the minimum distance: over all `(v + 1)`-subsets `S`
/// of columns, `Σ_{i∈S} perm(A_{S∖i})`, minimised over the nonzero sums.
/// The minors must be square, so the weight matrix needs exactly `v` rows.
/// Returns `None` when every sum is zero.
pub fn dmin_upper_bound(weights: &[Vec<u64>], v: usize) -> Result<Option<BigUint>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if weights.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("ragged weight matrix".into()));
    }
    if rows != v {
        return Err(Error::invalid(format!("minors of {v} columns are not square with {rows} rows")));
    }
    if v + 1 > cols {
        return Err(Error::invalid(format!("subset size {} exceeds {cols} columns", v + 1)));
    }
    let mut best: Option<BigUint> = None;
    let mut subset: Vec<usize> = (0..=v).collect();
    loop {
        let mut sum = BigUint::zero();
        for skip in 0..subset.len() {
            let minor: Vec<Vec<u64>> = weights
                .iter()
                .map(|row| subset.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &c)| row[c]).collect())
                .collect();
            sum += permanent(&minor)?;
        }
        if !sum.is_zero() && best.as_ref().is_none_or(|b| sum < *b) {
            best = Some(sum);
        }
        // next combination in lexicographic order
        let k = subset.len();
        let Some(i) = (0..k).rev().find(|&i| subset[i] < cols - k + i) else {
            break;
        };
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BethePermanent {
    pub value: f64,
    /// Bethe free energy at the returned point; `value = exp(-free_energy)`.
    pub free_energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Doubly stochastic minimiser `γ`.
    pub marginals: Vec<Vec<f64>>,
}

/// Bethe free energy `Σ γ ln(γ / w) - Σ (1 - γ) ln(1 - γ)`.
pub fn bethe_free_energy(gamma: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
    let mut f = 0.0;
    for (gr, wr) in gamma.iter().zip(w) {
        for (&g, &x) in gr.iter().zip(wr) {
            if g > 0.0 {
                f += g * (g / x).ln();
            }
            if g < 1.0 {
                f -= (1.0 - g) * (1.0 - g).ln();
            }
        }
    }
    f
}

fn sinkhorn(m: &mut [Vec<f64>], sweeps: usize) -> Result<()> {
    let n = m.len();
    for _ in 0..sweeps {
        for row in m.iter_mut() {
            let s: f64 = row.iter().sum();
            if s <= 0.0 {
                return Err(Error::invalid("matrix has no perfect matching support"));
            }
            row.iter_mut().for_each(|x| *x /= s);
        }
        for c in 0..n {
            let s: f64 = m.iter().map(|r| r[c]).sum();
            if s <= 0.0 {
                return Err(Error::invalid("matrix has no perfect matching support"));
            }
            m.iter_mut().for_each(|r| r[c] /= s);
        }
    }
    Ok(())
}

/// Minimises the Bethe free energy over doubly stochastic `γ` supported on
/// the nonzero entries of `m`. At a stationary point `γ (1 - γ) = w u_i v_j`,
/// so `γ` is the Sinkhorn scaling of `w / (1 - γ)`; the iteration is damped
/// by `damping ∈ [0, 1)`. Zero entries stay zero.
pub fn bethe_permanent(m: &[Vec<f64>], iters: usize, damping: f64) -> Result<BethePermanent> {
    let n = check_square(m, BETHE_CAP)?;
    if n == 0 {
        return Ok(BethePermanent { value: 1.0, free_energy: 0.0, converged: true, iterations: 0, marginals: Vec::new() });
    }
    if m.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("Bethe permanent needs finite non-negative entries"));
    }
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::invalid(format!("damping must lie in [0, 1), got {damping}")));
    }
    let mut gamma: Vec<Vec<f64>> = m.to_vec();
    sinkhorn(&mut gamma, 200)?;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..iters {
        iterations = it + 1;
        let mut next: Vec<Vec<f64>> = m
            .iter()
            .zip(&gamma)
            .map(|(wr, gr)| wr.iter().zip(gr).map(|(&w, &g)| if w == 0.0 { 0.0 } else { w / (1.0 - g).max(1e-300) }).collect())
            .collect();
        sinkhorn(&mut next, 50)?;
        let mut change: f64 = 0.0;
        for (gr, nr) in gamma.iter_mut().zip(&next) {
            for (g, &x) in gr.iter_mut().zip(nr) {
                let updated = damping * *g + (1.0 - damping) * x;
                change = change.max((updated - *g).abs());
                *g = updated;
            }
        }
        if change < 1e-13 {
            converged = true;
            break;
        }
    }
    sinkhorn(&mut gamma, 50)?;
    let free_energy = bethe_free_energy(&gamma, m);
    Ok(BethePermanent { value: (-free_energy).exp(), free_energy, converged, iterations, marginals: gamma })
}
