//! Random-bond Ising model: couplings, energies, exact small-system
//! thermodynamics and a ±J sampler on the Nishimori line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::SparseSym;

/// Largest system handled by [`exact_thermo`].
pub const EXACT_CAP: usize = 20;
/// Smallest flip probability accepted by [`sample_nishimori_pm`].
pub const MIN_FLIP: f64 = 1e-6;

/// Symmetric couplings `J_ij` on the edges `i < j` of a graph on `n` spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl CouplingGraph {
    /// Endpoints are normalised to `i < j` and sorted; rejects loops,
    /// repeated pairs and zero or non-finite couplings.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut out: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { i, j, n });
            }
            if i == j {
                return Err(Error::NotSimple(format!("self-coupling on spin {i}")));
            }
            if !w.is_finite() || w == 0.0 {
                return Err(Error::invalid(format!("coupling on ({i}, {j}) must be finite and nonzero, got {w}")));
            }
            out.push((i.min(j), i.max(j), w));
        }
        out.sort_by_key(|a| (a.0, a.1));
        if let Some(w) = out.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::NotSimple(format!("repeated coupling ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self { n, edges: out })
    }

    /// Same coupling `j` on every edge of `g`.
    pub fn uniform(g: &Graph, j: f64) -> Result<Self> {
        Self::new(g.n(), g.edges().iter().map(|&(u, v)| (u, v, j)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn graph(&self) -> Graph {
        Graph::new(self.n, self.edges.iter().map(|e| (e.0, e.1))).expect("couplings are simple")
    }

    /// Coupling matrix with zero diagonal.
    pub fn to_sparse(&self) -> SparseSym {
        SparseSym::from_triplets(self.n, self.edges.iter().copied()).expect("indices in range")
    }

    /// Inverse of [`CouplingGraph::to_sparse`]; diagonal entries are rejected.
    pub fn from_sparse(m: &SparseSym) -> Result<Self> {
        if !m.diag().iter().all(|&d| d == 0.0) {
            return Err(Error::invalid("coupling matrix has a nonzero diagonal"));
        }
        Self::new(m.n(), m.entries().iter().copied())
    }

    /// Restriction to the spins in `keep`, relabelled in the given order.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &v) in keep.iter().enumerate() {
            if v >= self.n {
                return Err(Error::IndexOutOfRange { i: v, j: v, n: self.n });
            }
            pos[v] = k;
        }
        Self::new(
            keep.len(),
            self.edges
                .iter()
                .filter(|e| pos[e.0] != usize::MAX && pos[e.1] != usize::MAX)
                .map(|&(i, j, w)| (pos[i], pos[j], w)),
        )
    }
}

/// `H(s) = -Σ J_ij s_i s_j`. Spins must be ±1.
pub fn hamiltonian(s: &[i8], j: &CouplingGraph) -> Result<f64> {
    if s.len() != j.n() {
        return Err(Error::DimensionMismatch(format!("{} spins for {} sites", s.len(), j.n())));
    }
    if let Some(k) = s.iter().position(|&x| x != 1 && x != -1) {
        return Err(Error::invalid(format!("spin {k} is {}, expected +1 or -1", s[k])));
    }
    Ok(-j.edges().iter().map(|&(a, b, w)| w * f64::from(s[a]) * f64::from(s[b])).sum::<f64>())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thermo {
    pub log_z: f64,
    pub magnetizations: Vec<f64>,
}

/// Log partition function and `<s_i>` by enumerating all `2^n` states.
pub fn exact_thermo(j: &CouplingGraph, beta: f64) -> Result<Thermo> {
    let n = j.n();
    if n > EXACT_CAP {
        return Err(Error::TooLarge { n, cap: EXACT_CAP });
    }
    if !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be finite, got {beta}")));
    }
    // running log-sum-exp with a shared shift for the magnetisation sums
    let mut shift = f64::NEG_INFINITY;
    let mut total = 0.0;
    let mut mag = vec![0.0; n];
    let mut spins = vec![0f64; n];
    for state in 0u32..(1u32 << n) {
        for (k, s) in spins.iter_mut().enumerate() {
            *s = if state >> k & 1 == 1 { -1.0 } else { 1.0 };
        }
        let energy: f64 = -j.edges().iter().map(|&(a, b, w)| w * spins[a] * spins[b]).sum::<f64>();
        let x = -beta * energy;
        if x > shift {
            let r = (shift - x).exp();
            total *= r;
            mag.iter_mut().for_each(|m| *m *= r);
            shift = x;
        }
        let w = (x - shift).exp();
        total += w;
        for (m, s) in mag.iter_mut().zip(&spins) {
            *m += w * s;
        }
    }
    Ok(Thermo { log_z: shift + total.ln(), magnetizations: mag.into_iter().map(|m| m / total).collect() })
}

/// `J_ij = +1` when the endpoint labels agree, `-1` otherwise.
pub fn label_couplings(labels: &[usize], edges: &[(usize, usize)]) -> Result<CouplingGraph> {
    CouplingGraph::new(
        labels.len(),
        edges.iter().map(|&(u, v)| {
            let same = labels.get(u).zip(labels.get(v)).map(|(a, b)| a == b);
            (u, v, if same.unwrap_or(false) { 1.0 } else { -1.0 })
        }),
    )
}

/// Inverse Nishimori temperature of the ±J family with flip probability `p`:
/// `P(+1) / P(-1) = e^{2 β_N}`.
pub fn nishimori_beta_pm(p_flip: f64) -> Result<f64> {
    if !(MIN_FLIP..0.5).contains(&p_flip) {
        return Err(Error::invalid(format!("flip probability must lie in [{MIN_FLIP}, 0.5), got {p_flip}")));
    }
    Ok(0.5 * ((1.0 - p_flip) / p_flip).ln())
}

/// Draws `J = -1` with probability `p_flip` and `+1` otherwise on every edge
/// of `g`. Returns the couplings and the true `β_N`.
pub fn sample_nishimori_pm(g: &Graph, p_flip: f64, seed: u64) -> Result<(CouplingGraph, f64)> {
    let beta_n = nishimori_beta_pm(p_flip)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = CouplingGraph::new(
        g.n(),
        g.edges().iter().map(|&(u, v)| (u, v, if rng.random::<f64>() < p_flip { -1.0 } else { 1.0 })),
    )?;
    Ok((j, beta_n))
}
