//! Trapping-set incidence matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qc::TannerGraph;

/// Binary incidence of a trapping set: rows are checks, columns variables.
/// `a` is the number of variables and `b` the number of odd-weight rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrappingSet {
    h: Vec<Vec<u8>>,
    a: usize,
    b: usize,
}

impl TrappingSet {
    pub fn new(h: Vec<Vec<u8>>) -> Result<Self> {
        let cols = h.first().map_or(0, Vec::len);
        if h.is_empty() || cols == 0 {
            return Err(Error::Empty("trapping-set incidence matrix"));
        }
        for (r, row) in h.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!("row {r} has {} entries, expected {cols}", row.len())));
            }
            if let Some(c) = row.iter().position(|&x| x > 1) {
                return Err(Error::invalid(format!("entry ({r}, {c}) = {} is not binary", row[c])));
            }
        }
        let b = h.iter().filter(|row| row.iter().map(|&x| x as usize).sum::<usize>() % 2 == 1).count();
        Ok(Self { a: cols, b, h })
    }

    /// Parses a 0/1 grid, one check per line. Entries may be separated by
    /// whitespace or commas or written contiguously; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for ch in line.chars() {
                match ch {
                    '0' => row.push(0u8),
                    '1' => row.push(1u8),
                    ' ' | '\t' | ',' => {}
                    other => return Err(Error::parse(idx + 1, format!("unexpected character '{other}'"))),
                }
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::parse(idx + 1, format!("row has {} entries, expected {w}", row.len())))
                }
                _ => {}
            }
            rows.push(row);
        }
        Self::new(rows)
    }

    /// The subgraph of `g` induced by the variables `vars` and every check
    /// adjacent to them, in ascending check order.
    pub fn from_tanner(g: &TannerGraph, vars: &[usize]) -> Result<Self> {
        let mut col = vec![usize::MAX; g.n_vars()];
        for (k, &v) in vars.iter().enumerate() {
            if v >= g.n_vars() {
                return Err(Error::invalid(format!("variable {v} outside 0..{}", g.n_vars())));
            }
            col[v] = k;
        }
        let mut checks: Vec<usize> = g.edges().iter().filter(|e| col[e.1] != usize::MAX).map(|e| e.0).collect();
        checks.dedup();
        let mut h = vec![vec![0u8; vars.len()]; checks.len()];
        for &(c, v) in g.edges() {
            if col[v] != usize::MAX {
                let r = checks.binary_search(&c).expect("collected above");
                h[r][col[v]] = 1;
            }
        }
        Self::new(h)
    }

    pub fn incidence(&self) -> &[Vec<u8>] {
        &self.h
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn n_checks(&self) -> usize {
        self.h.len()
    }

    pub fn tanner(&self) -> TannerGraph {
        TannerGraph::from_incidence(&self.h).expect("validated binary matrix")
    }

    pub fn to_text(&self) -> String {
        self.h
            .iter()
            .map(|row| row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ") + "\n")
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_counts() {
        let ts = TrappingSet::parse("1000\n1 1 0 0\n0,1,1,0\n0011\n0001\n").unwrap();
        assert_eq!((ts.a(), ts.b(), ts.n_checks()), (4, 2, 5));
        assert_eq!(TrappingSet::parse(&ts.to_text()).unwrap(), ts);
        assert!(TrappingSet::parse("10\n1\n").is_err());
        assert!(TrappingSet::parse("12\n").is_err());
        assert!(TrappingSet::parse("").is_err());
    }

    #[test]
    fn extracted_from_tanner() {
        let g = TannerGraph::from_incidence(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]).unwrap();
        let ts = TrappingSet::from_tanner(&g, &[0, 1]).unwrap();
        assert_eq!(ts.incidence(), &[vec![1, 1], vec![0, 1], vec![1, 0]]);
        assert_eq!(ts.b(), 2);
    }
}
