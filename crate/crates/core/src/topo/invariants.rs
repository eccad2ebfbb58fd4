//! Spectral and homological invariants of a trapping set.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::trapping::TrappingSet;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nishimori::bethe_hessian_weighted;
use crate::rbim::CouplingGraph;
use crate::sparse::{dense_symmetric_spectrum, eig_dense, rank_and_kernel, SparseSym, Spectrum};

/// Eigenvalues below `-NEGATIVE_TOL` count as negative modes.
pub const NEGATIVE_TOL: f64 = 1e-8;
/// Eigenvalues with `|λ| < ZERO_TOL` are treated as zero in Betti numbers and
/// the genus.
pub const ZERO_TOL: f64 = 1e-9;

/// `A_vn = Hᵀ H` with zeroed diagonal (entries count shared checks),
/// `D_vn = diag(A_vn 1)` and `L = D_vn - A_vn`.
pub fn variable_adjacency(ts: &TrappingSet) -> (SparseSym, SparseSym, SparseSym) {
    let h = ts.incidence();
    let a = ts.a();
    let mut trip = Vec::new();
    for i in 0..a {
        for j in i + 1..a {
            let shared = h.iter().filter(|row| row[i] == 1 && row[j] == 1).count();
            if shared > 0 {
                trip.push((i, j, shared as f64));
            }
        }
    }
    let adj = SparseSym::from_triplets(a, trip).expect("indices below a");
    let deg = SparseSym::diagonal(&adj.row_sums());
    let lap = deg.add_scaled(&adj, -1.0).expect("same dimension");
    (adj, deg, lap)
}

/// Simple graph on the variables: `i ~ j` when they share a check.
pub fn variable_graph(ts: &TrappingSet) -> Graph {
    let (adj, _, _) = variable_adjacency(ts);
    Graph::new(ts.a(), adj.entries().iter().filter(|e| e.0 != e.1).map(|e| (e.0, e.1))).expect("upper triangle")
}

/// Largest `|λ|` of `A_vn` and its square root.
pub fn spectral_radius(ts: &TrappingSet) -> Result<(f64, f64)> {
    let rho = eig_dense(&variable_adjacency(ts).0)?.max_abs();
    Ok((rho, rho.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Betti {
    /// `dim ker L` on the variable graph.
    pub betti0: usize,
    /// `n - rank L - β₀`; zero by rank–nullity.
    pub betti1_formula: usize,
    /// `|E| - |V| + c` of the bipartite Tanner subgraph.
    pub cycle_rank: usize,
}

pub fn betti(ts: &TrappingSet, tol: f64) -> Result<Betti> {
    let (_, _, lap) = variable_adjacency(ts);
    let (rank, kernel) = rank_and_kernel(&lap, tol)?;
    Ok(Betti {
        betti0: kernel,
        betti1_formula: ts.a() - rank - kernel,
        cycle_rank: ts.tanner().to_graph().cycle_rank(),
    })
}

/// Negative eigenvalues of the weighted Bethe–Hessian at `β = r` with unit
/// couplings on the variable graph.
pub fn negative_modes(ts: &TrappingSet, r: f64) -> Result<usize> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("r must be positive, got {r}")));
    }
    let j = CouplingGraph::uniform(&variable_graph(ts), 1.0)?;
    Ok(eig_dense(&bethe_hessian_weighted(&j, r)?)?.count_below(-NEGATIVE_TOL))
}

/// `(Σ_{λ>0} √λ - Σ_{λ<0} √-λ) / (2 √n)` over the Laplacian spectrum of the
/// variable graph.
pub fn continuous_genus(ts: &TrappingSet) -> Result<f64> {
    let spec = eig_dense(&variable_adjacency(ts).2)?;
    Ok(genus_of_spectrum(&spec.eigenvalues))
}

pub fn genus_of_spectrum(eigenvalues: &[f64]) -> f64 {
    let n = eigenvalues.len();
    if n == 0 {
        return 0.0;
    }
    let pos: f64 = eigenvalues.iter().filter(|&&l| l > ZERO_TOL).map(|l| l.sqrt()).sum();
    let neg: f64 = eigenvalues.iter().filter(|&&l| l < -ZERO_TOL).map(|l| (-l).sqrt()).sum();
    (pos - neg) / (2.0 * (n as f64).sqrt())
}

/// Spectrum of `[[0, A_vn], [A_vnᵀ, 0]]`.
pub fn dirac_spectrum(ts: &TrappingSet) -> Result<Spectrum> {
    let (adj, _, _) = variable_adjacency(ts);
    let a = adj.to_dense();
    let n = a.nrows();
    let mut d = DMatrix::<f64>::zeros(2 * n, 2 * n);
    d.view_mut((0, n), (n, n)).copy_from(&a);
    d.view_mut((n, 0), (n, n)).copy_from(&a.transpose());
    dense_symmetric_spectrum(&d)
}

/// `K₀ = dim ker D²` and `K₁ = rank D mod 2` for
/// `D = [[0, S, T], [Sᵀ, 0, 0], [Tᵀ, 0, 0]]`.
pub fn kasparov_k(s: &[Vec<u8>], t: &[Vec<u8>]) -> Result<(usize, usize)> {
    if s.len() != t.len() {
        return Err(Error::DimensionMismatch(format!("S has {} rows, T has {}", s.len(), t.len())));
    }
    let r = s.len();
    let sc = s.first().map_or(0, Vec::len);
    let tc = t.first().map_or(0, Vec::len);
    if s.iter().any(|row| row.len() != sc) || t.iter().any(|row| row.len() != tc) {
        return Err(Error::DimensionMismatch("ragged S or T".into()));
    }
    let n = r + sc + tc;
    if n == 0 {
        return Ok((0, 0));
    }
    let mut trip = Vec::new();
    for i in 0..r {
        for j in 0..sc {
            if s[i][j] != 0 {
                trip.push((i, r + j, f64::from(s[i][j])));
            }
        }
        for j in 0..tc {
            if t[i][j] != 0 {
                trip.push((i, r + sc + j, f64::from(t[i][j])));
            }
        }
    }
    let d = SparseSym::from_triplets(n, trip)?;
    let spec = eig_dense(&d)?;
    let tol = (1e-8 * spec.max_abs()).max(1e-12);
    // ker D² = ker D for symmetric D
    let kernel = spec.eigenvalues.iter().filter(|l| l.abs() < tol).count();
    Ok((kernel, (n - kernel) % 2))
}

/// Vertex–edge incidence (variables × forest edges) of a BFS spanning forest
/// of the variable graph.
pub fn spanning_forest_incidence(ts: &TrappingSet) -> Vec<Vec<u8>> {
    let forest = variable_graph(ts).spanning_forest();
    let mut t = vec![vec![0u8; forest.len()]; ts.a()];
    for (k, &(u, v)) in forest.iter().enumerate() {
        t[u][k] = 1;
        t[v][k] = 1;
    }
    t
}

/// Transpose of the incidence: variables × checks.
pub fn variable_check_incidence(ts: &TrappingSet) -> Vec<Vec<u8>> {
    (0..ts.a()).map(|v| ts.incidence().iter().map(|row| row[v]).collect()).collect()
}

/// The invariant panel of one trapping set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub rho: f64,
    pub r_crit: f64,
    pub neg_modes_r1: usize,
    pub genus: f64,
    pub k0: usize,
    pub k1: usize,
    pub kervaire: usize,
    pub betti0: usize,
    pub betti1_mod2: usize,
    pub cycle_rank: usize,
}

/// Assembles the panel. `K₀`/`K₁` use `S` = variables × checks incidence and
/// `T` = spanning-forest incidence of the variable graph.
pub fn invariant_report(ts: &TrappingSet) -> Result<InvariantReport> {
    let (rho, r_crit) = spectral_radius(ts)?;
    let b = betti(ts, ZERO_TOL)?;
    let (k0, k1) = kasparov_k(&variable_check_incidence(ts), &spanning_forest_incidence(ts))?;
    Ok(InvariantReport {
        rho,
        r_crit,
        neg_modes_r1: negative_modes(ts, 1.0)?,
        genus: continuous_genus(ts)?,
        k0,
        k1,
        kervaire: k1,
        betti0: b.betti0,
        betti1_mod2: b.betti1_formula,
        cycle_rank: b.cycle_rank,
    })
}

/// `β₀ - cycle rank`, the homological stand-in for the Dirac index.
pub fn homological_index(ts: &TrappingSet) -> Result<i64> {
    let b = betti(ts, ZERO_TOL)?;
    Ok(b.betti0 as i64 - b.cycle_rank as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ts42() -> TrappingSet {
        TrappingSet::parse("1000\n1100\n0110\n0011\n0001\n").unwrap()
    }

    #[test]
    fn path_adjacency() {
        let (a, d, l) = variable_adjacency(&ts42());
        assert_eq!(a.entries(), &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        assert_eq!(d.diag(), vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(l.get(1, 1), 2.0);
        let single = TrappingSet::parse("1\n1\n").unwrap();
        let (a, _, l) = variable_adjacency(&single);
        assert_eq!((a.nnz_upper(), l.nnz_upper()), (0, 0));
        let pair = TrappingSet::parse("11\n11\n").unwrap();
        assert_eq!(variable_adjacency(&pair).0.get(0, 1), 2.0);
    }

    #[test]
    fn genus_of_path() {
        let lam: Vec<f64> = (0..4).map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 4.0).cos()).collect();
        let expected = lam.iter().skip(1).map(|l| l.sqrt()).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(continuous_genus(&ts42()).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 1.007, epsilon = 5e-4);
        assert_eq!(continuous_genus(&TrappingSet::parse("1\n").unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn betti_examples() {
        let b = betti(&ts42(), 1e-9).unwrap();
        assert_eq!((b.betti0, b.betti1_formula, b.cycle_rank), (1, 0, 0));
        let two = TrappingSet::parse("10\n01\n").unwrap();
        assert_eq!(betti(&two, 1e-9).unwrap().betti0, 2);
        assert!(betti(&two, 0.0).is_err());
    }

    #[test]
    fn dirac_symmetric() {
        let spec = dirac_spectrum(&ts42()).unwrap();
        let p4: Vec<f64> = (1..=4).map(|k| 2.0 * (k as f64 * std::f64::consts::PI / 5.0).cos()).collect();
        let mut expected: Vec<f64> = p4.iter().flat_map(|&x| [x.abs(), -x.abs()]).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in spec.eigenvalues.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let zero = dirac_spectrum(&TrappingSet::parse("10\n01\n").unwrap()).unwrap();
        assert!(zero.eigenvalues.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn kasparov_examples() {
        let z = vec![vec![0u8; 3]; 3];
        assert_eq!(kasparov_k(&z, &z).unwrap(), (9, 0));
        let id: Vec<Vec<u8>> = (0..3).map(|i| (0..3).map(|j| u8::from(i == j)).collect()).collect();
        assert_eq!(kasparov_k(&id, &z).unwrap(), (3, 0));
        assert_eq!(kasparov_k(&[vec![1]], &[vec![1]]).unwrap(), (1, 0));
        assert!(kasparov_k(&[vec![1]], &[]).is_err());
    }

    #[test]
    fn negative_modes_guard() {
        assert!(negative_modes(&ts42(), 0.0).is_err());
        assert!(negative_modes(&ts42(), 1.0).is_ok());
    }
}
