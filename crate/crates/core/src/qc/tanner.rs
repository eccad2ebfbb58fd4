//! Bipartite Tanner graphs and circulant lifting.

use serde::{Deserialize, Serialize};

use super::protograph::{Family, MetProtograph};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sparse::SparseSym;

/// Check/variable incidence. In the unified vertex numbering used by
/// [`TannerGraph::to_graph`] and [`TannerGraph::bipartite_adjacency`],
/// variables come first (`0..n_vars`) and check `c` is `n_vars + c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TannerGraph {
    n_checks: usize,
    n_vars: usize,
    /// `(check, var)`, sorted, unique.
    edges: Vec<(usize, usize)>,
    family: Family,
}

impl TannerGraph {
    pub fn new(n_checks: usize, n_vars: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(c, v) in &edges {
            if c >= n_checks || v >= n_vars {
                return Err(Error::invalid(format!(
                    "edge (check {c}, var {v}) outside a {n_checks} x {n_vars} incidence"
                )));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::NotSimple(format!("duplicate edge (check {}, var {})", w[0].0, w[0].1)));
        }
        Ok(Self { n_checks, n_vars, edges, family: Family::Generic })
    }

    /// From a dense 0/1 parity-check matrix (rows are checks).
    pub fn from_incidence(h: &[Vec<u8>]) -> Result<Self> {
        let n_vars = h.first().map_or(0, Vec::len);
        let mut edges = Vec::new();
        for (c, row) in h.iter().enumerate() {
            if row.len() != n_vars {
                return Err(Error::DimensionMismatch(format!("row {c} has {} entries, expected {n_vars}", row.len())));
            }
            for (v, &x) in row.iter().enumerate() {
                match x {
                    0 => {}
                    1 => edges.push((c, v)),
                    other => return Err(Error::invalid(format!("entry ({c}, {v}) = {other} is not binary"))),
                }
            }
        }
        Self::new(h.len(), n_vars, edges)
    }

    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn var_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_vars];
        for &(_, v) in &self.edges {
            d[v] += 1;
        }
        d
    }

    pub fn check_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_checks];
        for &(c, _) in &self.edges {
            d[c] += 1;
        }
        d
    }

    /// Unified vertex index of check `c`.
    pub fn check_vertex(&self, c: usize) -> usize {
        self.n_vars + c
    }

    pub fn is_var_vertex(&self, u: usize) -> bool {
        u < self.n_vars
    }

    /// The bipartite graph as a simple graph on `n_vars + n_checks` vertices.
    pub fn to_graph(&self) -> Graph {
        Graph::new(self.n_vars + self.n_checks, self.edges.iter().map(|&(c, v)| (v, self.n_vars + c)))
            .expect("tanner edges are unique")
    }

    /// `A = [[0, Hᵀ], [H, 0]]` and `D = diag(A 1)`.
    pub fn bipartite_adjacency(&self) -> (SparseSym, SparseSym) {
        let g = self.to_graph();
        (g.adjacency(), g.degree_matrix())
    }

    /// Dense 0/1 parity-check matrix.
    pub fn incidence(&self) -> Vec<Vec<u8>> {
        let mut h = vec![vec![0u8; self.n_vars]; self.n_checks];
        for &(c, v) in &self.edges {
            h[c][v] = 1;
        }
        h
    }
}

/// Expands every circulant: shift `k` in cell `(r, c)` joins check `r L + i`
/// to variable `c L + (i + k) mod L`.
pub fn lift(proto: &MetProtograph) -> TannerGraph {
    let l = proto.circulant_size();
    let mut edges = Vec::new();
    for r in 0..proto.rows() {
        for c in 0..proto.cols() {
            for &k in proto.cell(r, c) {
                edges.extend((0..l).map(|i| (r * l + i, c * l + (i + k) % l)));
            }
        }
    }
    let mut g = TannerGraph::new(proto.rows() * l, proto.cols() * l, edges)
        .expect("validated protograph lifts to a simple graph");
    g.family = proto.family();
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_shift() {
        let g = lift(&MetProtograph::parse("L=3\n0\n").unwrap());
        assert_eq!(g.edges(), &[(0, 0), (1, 1), (2, 2)]);
        let g = lift(&MetProtograph::parse("L=7\n2\n").unwrap());
        assert_eq!(g.edges().len(), 7);
        for i in 0..7 {
            assert!(g.edges().contains(&(i, (i + 2) % 7)));
        }
    }

    #[test]
    fn two_ring_example_degrees() {
        let g = lift(&MetProtograph::parse("L=7\n1 2 4\n6 5 3\n").unwrap());
        assert_eq!((g.n_checks(), g.n_vars()), (14, 21));
        assert!(g.var_degrees().iter().all(|&d| d == 2));
        assert!(g.check_degrees().iter().all(|&d| d == 3));
        let (a, d) = g.bipartite_adjacency();
        assert_eq!(a.n(), 35);
        assert!(a.diag().iter().all(|&x| x == 0.0));
        let diag = d.diag();
        assert_eq!(diag.iter().filter(|&&x| x == 2.0).count(), 21);
        assert_eq!(diag.iter().filter(|&&x| x == 3.0).count(), 14);
    }

    #[test]
    fn single_edge_and_empty() {
        let g = TannerGraph::new(1, 1, [(0, 0)]).unwrap();
        let (a, d) = g.bipartite_adjacency();
        assert_eq!(a.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(d, SparseSym::identity(2));
        let (a, d) = TannerGraph::new(2, 3, []).unwrap().bipartite_adjacency();
        assert_eq!((a.nnz_upper(), d.nnz_upper(), a.n()), (0, 0, 5));
    }

    #[test]
    fn row_permutation_permutes_check_blocks() {
        let p = MetProtograph::parse("L=5\n1 -1 3\n0 2,4 1\n").unwrap();
        let q = MetProtograph::parse("L=5\n0 2,4 1\n1 -1 3\n").unwrap();
        let (gp, gq) = (lift(&p), lift(&q));
        let mapped: Vec<(usize, usize)> = {
            let mut e: Vec<_> = gp.edges().iter().map(|&(c, v)| ((c + 5) % 10, v)).collect();
            e.sort_unstable();
            e
        };
        assert_eq!(mapped, gq.edges());
    }
}
