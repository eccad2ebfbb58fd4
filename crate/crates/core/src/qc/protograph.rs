//! Exponent matrices of (multi-edge type) quasi-cyclic codes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural family of a quasi-cyclic construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// One circulant ring (a single block row).
    Spherical,
    /// Two independent rings (two or more block rows).
    Toroidal,
    #[default]
    Generic,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Spherical => "spherical",
            Family::Toroidal => "toroidal",
            Family::Generic => "generic",
        }
    }

    fn infer(rows: usize) -> Self {
        match rows {
            1 => Family::Spherical,
            _ => Family::Toroidal,
        }
    }
}

/// Block description of a QC-LDPC parity-check matrix. Each cell holds the
/// list of circulant shifts summed in that block; an empty cell is the zero
/// block and more than one shift makes it a multi-edge cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetProtograph {
    rows: usize,
    cols: usize,
    /// Row-major, `rows * cols` cells.
    cells: Vec<Vec<usize>>,
    l: usize,
    family: Family,
}

impl MetProtograph {
    /// Validates shifts (`< l`, no repeats within a cell) and requires at least
    /// one nonempty cell. The family is inferred from the number of block rows.
    pub fn new(l: usize, cells: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("circulant size L must be at least 1"));
        }
        let rows = cells.len();
        let cols = cells.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("exponent matrix"));
        }
        let mut flat = Vec::with_capacity(rows * cols);
        for (r, row) in cells.into_iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!("block row {r} has {} cells, expected {cols}", row.len())));
            }
            for (c, cell) in row.into_iter().enumerate() {
                check_cell(&cell, l).map_err(|msg| Error::invalid(format!("cell ({r}, {c}): {msg}")))?;
                flat.push(cell);
            }
        }
        if flat.iter().all(Vec::is_empty) {
            return Err(Error::invalid("every cell is a zero block"));
        }
        Ok(Self { rows, cols, cells: flat, l, family: Family::infer(rows) })
    }

    /// Single-shift protograph from a plain exponent matrix; `None` is a zero block.
    pub fn from_exponents(l: usize, exps: &[Vec<Option<usize>>]) -> Result<Self> {
        Self::new(l, exps.iter().map(|row| row.iter().map(|e| e.iter().copied().collect()).collect()).collect())
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn circulant_size(&self) -> usize {
        self.l
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn cell(&self, r: usize, c: usize) -> &[usize] {
        &self.cells[r * self.cols + c]
    }

    /// Protograph (base) matrix: the number of circulants in each cell.
    pub fn base_matrix(&self) -> Vec<Vec<usize>> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.cell(r, c).len()).collect()).collect()
    }

    /// Parses the exponent text format:
    ///
    /// ```text
    /// L=7
    /// 1 2 4
    /// 6 5 3
    /// ```
    ///
    /// Cells are whitespace separated; `-1` is the zero block and `1,2,7` is a
    /// sum of circulants. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut l: Option<usize> = None;
        let mut rows: Vec<Vec<Vec<usize>>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if l.is_none() {
                let value = line
                    .strip_prefix("L=")
                    .or_else(|| line.strip_prefix("L ="))
                    .ok_or_else(|| Error::parse(line_no, "expected header 'L=<int>'"))?;
                let v: usize = value
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(line_no, format!("bad circulant size '{}': {e}", value.trim())))?;
                if v == 0 {
                    return Err(Error::parse(line_no, "circulant size L must be at least 1"));
                }
                l = Some(v);
                continue;
            }
            let lv = l.expect("header parsed");
            let mut row = Vec::new();
            for (c, tok) in line.split_whitespace().enumerate() {
                let cell_err = |msg: String| Error::parse(line_no, format!("cell {} '{tok}': {msg}", c + 1));
                if tok == "-1" {
                    row.push(Vec::new());
                    continue;
                }
                let mut cell = Vec::new();
                for part in tok.split(',') {
                    let s: usize = part.parse().map_err(|e| cell_err(format!("bad shift '{part}': {e}")))?;
                    cell.push(s);
                }
                check_cell(&cell, lv).map_err(cell_err)?;
                row.push(cell);
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::parse(
                        line_no,
                        format!("row has {} cells, expected {}", row.len(), first.len()),
                    ));
                }
            }
            rows.push(row);
        }
        let l = l.ok_or_else(|| Error::parse(1, "missing header 'L=<int>'"))?;
        if rows.is_empty() {
            return Err(Error::parse(text.lines().count().max(1), "no block rows"));
        }
        Self::new(l, rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("L={}\n", self.l);
        for r in 0..self.rows {
            let cells: Vec<String> = (0..self.cols)
                .map(|c| {
                    let cell = self.cell(r, c);
                    if cell.is_empty() {
                        "-1".to_string()
                    } else {
                        cell.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }
}

fn check_cell(cell: &[usize], l: usize) -> std::result::Result<(), String> {
    if let Some(&s) = cell.iter().find(|&&s| s >= l) {
        return Err(format!("shift {s} is not below L = {l}"));
    }
    let mut sorted = cell.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err("repeated shift in a multi-edge cell".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let p = MetProtograph::parse("L=41\n# comment\n1,2,7 9 23 -1 -1\n12,37 19 -1 32 11,12\n-1 -1 33 -1 -1\n").unwrap();
        assert_eq!(p.rows(), 3);
        assert_eq!(p.cols(), 5);
        assert_eq!(p.cell(0, 0), &[1, 2, 7]);
        assert_eq!(p.base_matrix()[1], vec![2, 1, 0, 1, 2]);
        assert_eq!(p.family(), Family::Toroidal);
        assert_eq!(MetProtograph::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn parse_errors_name_line_and_cell() {
        let err = MetProtograph::parse("L=7\n1 2 4\n6 9 3\n").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("cell 2"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(MetProtograph::parse("1 2\n").is_err());
        assert!(MetProtograph::parse("L=5\n1,1\n").is_err());
        assert!(MetProtograph::parse("L=5\n-1 -1\n").is_err());
        assert!(MetProtograph::parse("L=5\n1 2\n3\n").is_err());
    }

    #[test]
    fn single_row_is_spherical() {
        let p = MetProtograph::parse("L=1\n0\n").unwrap();
        assert_eq!(p.family(), Family::Spherical);
    }
}
