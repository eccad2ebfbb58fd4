//! Cycle enumeration, girth, ACE and the block-cycle shift condition.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::tanner::TannerGraph;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Longest cycle length accepted by [`enumerate_cycles`].
pub const MAX_CYCLE_LEN: usize = 12;
/// Cycle count at which enumeration gives up.
pub const MAX_CYCLES: usize = 2_000_000;

/// Closed walk without repeated vertices, stored once without the closing
/// vertex. In a Tanner graph the vertices alternate variable/check using the
/// unified numbering of [`TannerGraph::to_graph`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cycle {
    pub vertices: Vec<usize>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Consecutive vertex pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }
}

/// `true` iff the alternating sum of `shifts` vanishes mod `l`.
pub fn block_cycle_consistent(shifts: &[usize], l: usize) -> Result<bool> {
    if shifts.len() % 2 == 1 || shifts.len() < 4 {
        return Err(Error::invalid(format!("block cycle needs an even length >= 4, got {}", shifts.len())));
    }
    if l == 0 {
        return Err(Error::invalid("circulant size L must be at least 1"));
    }
    let l = l as i64;
    let sum: i64 = shifts
        .iter()
        .enumerate()
        .map(|(i, &a)| if i % 2 == 0 { a as i64 } else { -(a as i64) })
        .sum();
    Ok(sum.rem_euclid(l) == 0)
}

/// All simple cycles of length `<= max_len`, each once. The cycle starts at
/// its smallest vertex and its second vertex is smaller than its last.
pub fn enumerate_graph_cycles(g: &Graph, max_len: usize) -> Result<Vec<Cycle>> {
    if max_len > MAX_CYCLE_LEN {
        return Err(Error::TooLarge { n: max_len, cap: MAX_CYCLE_LEN });
    }
    let n = g.n();
    let mut out = Vec::new();
    let mut dist = vec![usize::MAX; n];
    let mut on_path = vec![false; n];
    for s in 0..n {
        // distances back to s inside the vertices >= s, for pruning
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if 2 * dist[u] > max_len {
                break;
            }
            for &w in g.neighbors(u) {
                if w > s && dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        let mut path = vec![s];
        on_path[s] = true;
        let mut iters: Vec<usize> = vec![0];
        while let Some(&u) = path.last() {
            let depth = path.len() - 1;
            let pos = iters.last_mut().expect("parallel to path");
            let nbrs = g.neighbors(u);
            if *pos >= nbrs.len() {
                on_path[u] = false;
                path.pop();
                iters.pop();
                continue;
            }
            let w = nbrs[*pos];
            *pos += 1;
            if w == s {
                if path.len() >= 3 && path[1] < path[path.len() - 1] {
                    out.push(Cycle { vertices: path.clone() });
                    if out.len() > MAX_CYCLES {
                        return Err(Error::TooLarge { n: out.len(), cap: MAX_CYCLES });
                    }
                }
                continue;
            }
            if w < s || on_path[w] || dist[w] == usize::MAX || depth + 1 + dist[w] > max_len {
                continue;
            }
            on_path[w] = true;
            path.push(w);
            iters.push(0);
        }
    }
    Ok(out)
}

/// Cycles of a Tanner graph up to `max_len` (even, at most 12).
pub fn enumerate_cycles(g: &TannerGraph, max_len: usize) -> Result<Vec<Cycle>> {
    if max_len % 2 == 1 {
        return Err(Error::invalid(format!("maximum cycle length must be even, got {max_len}")));
    }
    enumerate_graph_cycles(&g.to_graph(), max_len)
}

/// Shortest cycle length of the Tanner graph.
pub fn girth(g: &TannerGraph) -> Option<usize> {
    g.to_graph().girth()
}

/// Sum of `deg(v) - 2` over the variable nodes of `c`.
pub fn ace(c: &Cycle, g: &TannerGraph) -> Result<usize> {
    check_cycle(c, g)?;
    let deg = g.var_degrees();
    Ok(c.vertices.iter().filter(|&&u| g.is_var_vertex(u)).map(|&u| deg[u] - 2).sum())
}

fn check_cycle(c: &Cycle, g: &TannerGraph) -> Result<()> {
    let graph = g.to_graph();
    if c.len() < 4 || c.len() % 2 == 1 {
        return Err(Error::invalid(format!("cycle of length {} in a bipartite graph", c.len())));
    }
    let mut seen = c.vertices.clone();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("cycle repeats a vertex"));
    }
    for (u, v) in c.edges() {
        if !graph.has_edge(u, v) {
            return Err(Error::invalid(format!("cycle edge ({u}, {v}) is not in the graph")));
        }
    }
    Ok(())
}

/// Circulant shift carried by each edge of a cycle in a lifted graph, in
/// traversal order. Check `r L + i` joined to variable `c L + j` carries
/// shift `(j - i) mod L`.
pub fn cycle_shifts(c: &Cycle, g: &TannerGraph, l: usize) -> Result<Vec<usize>> {
    check_cycle(c, g)?;
    Ok(c.edges()
        .map(|(a, b)| {
            let (var, check) = if g.is_var_vertex(a) { (a, b - g.n_vars()) } else { (b, a - g.n_vars()) };
            (var % l + l - check % l) % l
        })
        .collect())
}

/// Histogram `ace -> count` over the given cycles.
pub fn ace_histogram(cycles: &[Cycle], g: &TannerGraph) -> Result<Vec<(usize, usize)>> {
    let mut hist = std::collections::BTreeMap::new();
    for c in cycles {
        *hist.entry(ace(c, g)?).or_insert(0) += 1;
    }
    Ok(hist.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qc::{lift, MetProtograph};
    use std::collections::HashSet;

    /// Independent oracle: unrestricted DFS from every vertex, canonicalised
    /// by rotation and reflection.
    fn brute_force_cycles(g: &Graph, max_len: usize) -> HashSet<Vec<usize>> {
        fn canonical(p: &[usize]) -> Vec<usize> {
            let n = p.len();
            let mut best: Option<Vec<usize>> = None;
            for start in 0..n {
                for dir in [1isize, -1] {
                    let v: Vec<usize> =
                        (0..n).map(|k| p[((start as isize + dir * k as isize).rem_euclid(n as isize)) as usize]).collect();
                    if best.as_ref().is_none_or(|b| v < *b) {
                        best = Some(v);
                    }
                }
            }
            best.unwrap()
        }
        fn dfs(g: &Graph, s: usize, path: &mut Vec<usize>, max_len: usize, out: &mut HashSet<Vec<usize>>) {
            let u = *path.last().unwrap();
            for &w in g.neighbors(u) {
                if w == s && path.len() >= 3 {
                    out.insert(canonical(path));
                } else if !path.contains(&w) && path.len() < max_len {
                    path.push(w);
                    dfs(g, s, path, max_len, out);
                    path.pop();
                }
            }
        }
        let mut out = HashSet::new();
        for s in 0..g.n() {
            dfs(g, s, &mut vec![s], max_len, &mut out);
        }
        out
    }

    fn two_ring() -> TannerGraph {
        lift(&MetProtograph::parse("L=7\n1 2 4\n6 5 3\n").unwrap())
    }

    #[test]
    fn consistency_examples() {
        assert!(block_cycle_consistent(&[0, 0, 0, 0], 9).unwrap());
        assert!(!block_cycle_consistent(&[1, 2, 5, 6], 7).unwrap());
        assert!(block_cycle_consistent(&[1, 3, 4, 2], 5).unwrap());
        assert!(block_cycle_consistent(&[1, 2, 3], 5).is_err());
    }

    #[test]
    fn tree_and_square() {
        let tree = TannerGraph::new(2, 3, [(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        assert!(enumerate_cycles(&tree, 12).unwrap().is_empty());
        let sq = TannerGraph::new(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let cycles = enumerate_cycles(&sq, 12).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 4);
        assert!(enumerate_cycles(&sq, 14).is_err());
        assert!(enumerate_cycles(&sq, 7).is_err());
    }

    #[test]
    fn lifted_two_ring_matches_brute_force() {
        let g = two_ring();
        let found = enumerate_cycles(&g, 8).unwrap();
        let oracle = brute_force_cycles(&g.to_graph(), 8);
        assert_eq!(found.len(), oracle.len());
        let canon: HashSet<Vec<usize>> = found
            .iter()
            .map(|c| {
                let mut v = c.vertices.clone();
                let k = v.iter().enumerate().min_by_key(|(_, x)| **x).unwrap().0;
                v.rotate_left(k);
                if v[1] > v[v.len() - 1] {
                    v[1..].reverse();
                }
                v
            })
            .collect();
        assert_eq!(canon, oracle);
    }

    #[test]
    fn lifted_cycles_are_block_consistent() {
        let g = lift(&MetProtograph::parse("L=5\n0 1 2,3\n0 4 1\n").unwrap());
        let cycles = enumerate_cycles(&g, 10).unwrap();
        assert!(!cycles.is_empty());
        for c in &cycles {
            assert!(block_cycle_consistent(&cycle_shifts(c, &g, 5).unwrap(), 5).unwrap());
        }
    }

    #[test]
    fn ace_values() {
        // variable degrees all 2
        let g = two_ring();
        let cycles = enumerate_cycles(&g, 12).unwrap();
        let girth_len = cycles.iter().map(Cycle::len).min().unwrap();
        assert_eq!(Some(girth_len), girth(&g));
        let deg = g.var_degrees();
        let girth_cycles: Vec<Cycle> = cycles.into_iter().filter(|c| c.len() == girth_len).collect();
        let hist = ace_histogram(&girth_cycles, &g).unwrap();
        let mut recomputed = std::collections::BTreeMap::new();
        for c in &girth_cycles {
            let a: usize = c.vertices.iter().filter(|&&u| u < g.n_vars()).map(|&u| deg[u] - 2).sum();
            *recomputed.entry(a).or_insert(0) += 1;
        }
        assert_eq!(hist, recomputed.into_iter().collect::<Vec<_>>());
        // both variables of degree 3
        let k = TannerGraph::new(3, 2, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]).unwrap();
        let c = Cycle { vertices: vec![0, 2, 1, 3] };
        assert_eq!(ace(&c, &k).unwrap(), 2);
        assert!(ace(&Cycle { vertices: vec![0, 2, 1, 5] }, &k).is_err());
    }

    #[test]
    fn girth_bounded_by_protograph() {
        let p = MetProtograph::parse("L=7\n1 2 4\n6 5 3\n").unwrap();
        let proto = TannerGraph::from_incidence(&[vec![1, 1, 1], vec![1, 1, 1]]).unwrap();
        assert!(girth(&lift(&p)).unwrap() >= girth(&proto).unwrap());
    }
}
