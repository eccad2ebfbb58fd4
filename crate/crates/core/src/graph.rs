//! Simple undirected graphs and a few generators used by the tests and the CLI.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseSym;

/// Simple undirected graph. Edges are stored once as `(u, v)` with `u < v`,
/// sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Rejects self-loops, repeated edges and out-of-range endpoints.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::IndexOutOfRange { i: u, j: v, n });
            }
            if u == v {
                return Err(Error::NotSimple(format!("self-loop at vertex {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::NotSimple(format!("repeated edge ({u}, {v})")));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Self { n, edges, adj })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path is simple")
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid(format!("a simple cycle needs 3 vertices, got {n}")));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Self {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).expect("complete graph is simple")
    }

    /// Rebuilds the adjacency lists after deserialisation.
    pub fn rebuild(self) -> Result<Self> {
        Self::new(self.n, self.edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    /// Component label per vertex, labels numbered in order of first vertex.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adj[u] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components().0 == 1
    }

    /// Edges of a BFS spanning forest, in discovery order.
    pub fn spanning_forest(&self) -> Vec<(usize, usize)> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        out.push((u.min(w), u.max(w)));
                        queue.push_back(w);
                    }
                }
            }
        }
        out
    }

    /// `|E| - |V| + c`, the number of independent cycles.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + self.components().0 - self.n
    }

    /// Length of the shortest cycle, `None` for forests.
    pub fn girth(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; self.n];
        let mut parent = vec![usize::MAX; self.n];
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[s] = 0;
            parent[s] = usize::MAX;
            queue.clear();
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                if let Some(b) = best {
                    if 2 * dist[u] + 1 >= b {
                        break;
                    }
                }
                for &w in &self.adj[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        queue.push_back(w);
                    } else if parent[u] != w {
                        let len = dist[u] + dist[w] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }

    /// Unweighted adjacency `A` as a sparse symmetric matrix.
    pub fn adjacency(&self) -> SparseSym {
        SparseSym::from_triplets(self.n, self.edges.iter().map(|&(u, v)| (u, v, 1.0)))
            .expect("edges are in range")
    }

    /// `D = diag(A 1)`.
    pub fn degree_matrix(&self) -> SparseSym {
        SparseSym::diagonal(&self.degrees().iter().map(|&d| d as f64).collect::<Vec<_>>())
    }

    /// Subgraph induced by `keep`, relabelled `0..keep.len()` in the given order.
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &v) in keep.iter().enumerate() {
            if v >= self.n {
                return Err(Error::IndexOutOfRange { i: v, j: v, n: self.n });
            }
            pos[v] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|(u, v)| pos[*u] != usize::MAX && pos[*v] != usize::MAX)
            .map(|&(u, v)| (pos[u], pos[v]));
        Self::new(keep.len(), edges)
    }
}

/// Uniform-ish random `d`-regular simple graph by the pairing model with
/// rejection. Needs `n * d` even and `d < n`.
pub fn random_regular<R: Rng>(n: usize, d: usize, rng: &mut R) -> Result<Graph> {
    if d >= n || (n * d) % 2 == 1 {
        return Err(Error::invalid(format!("no simple {d}-regular graph on {n} vertices")));
    }
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..10_000 {
        stubs.shuffle(rng);
        let mut set = BTreeSet::new();
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !set.insert((u, v)) {
                continue 'attempt;
            }
        }
        return Graph::new(n, set);
    }
    Err(Error::invalid(format!("failed to sample a simple {d}-regular graph on {n} vertices")))
}

/// Connected random graph: a random labelled tree plus each remaining pair
/// independently with probability `p_extra`.
pub fn random_connected<R: Rng>(n: usize, p_extra: f64, rng: &mut R) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Empty("graph with no vertices"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut set = BTreeSet::new();
    for k in 1..n {
        let u = order[k];
        let v = order[rng.random_range(0..k)];
        set.insert((u.min(v), u.max(v)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !set.contains(&(i, j)) && rng.random::<f64>() < p_extra {
                set.insert((i, j));
            }
        }
    }
    Graph::new(n, set)
}
