//! Matrix Market coordinate I/O (symmetric kind, 1-based indices).

use std::io::{BufRead, Write};

use super::SparseSym;
use crate::error::{Error, Result};

/// Writes `m` as `coordinate real symmetric`, lower triangle, 1-based.
pub fn write_matrix_market<W: Write>(m: &SparseSym, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", m.n(), m.n(), m.nnz_upper())?;
    for &(i, j, v) in m.entries() {
        // upper (i <= j) stored; symmetric MM files list the lower triangle
        writeln!(out, "{} {} {}", j + 1, i + 1, fmt_value(v))?;
    }
    Ok(())
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// Reads a coordinate Matrix Market file with `symmetric` (or `general`,
/// symmetric-valued) structure and `real`, `integer` or `pattern` field.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<SparseSym> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Empty("matrix market file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::parse(1, format!("unsupported format '{}'", tokens[2])));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(Error::parse(1, format!("unsupported field '{other}'"))),
    };
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(Error::parse(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut upper: Vec<(usize, usize, f64)> = Vec::new();
    let mut lower: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(Error::parse(line_no, "expected 'rows cols nnz'"));
                }
                let rows = parse_usize(parts[0], line_no)?;
                let cols = parse_usize(parts[1], line_no)?;
                if rows != cols {
                    return Err(Error::parse(line_no, format!("matrix is {rows} x {cols}, expected square")));
                }
                size = Some((rows, parse_usize(parts[2], line_no)?));
            }
            Some((n, _)) => {
                let need = if pattern { 2 } else { 3 };
                if parts.len() < need {
                    return Err(Error::parse(line_no, "truncated entry"));
                }
                let i = parse_usize(parts[0], line_no)?;
                let j = parse_usize(parts[1], line_no)?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(Error::parse(line_no, format!("index ({i}, {j}) outside 1..={n}")));
                }
                let v = if pattern {
                    1.0
                } else {
                    parts[2]
                        .parse::<f64>()
                        .map_err(|e| Error::parse(line_no, format!("bad value '{}': {e}", parts[2])))?
                };
                let (i, j) = (i - 1, j - 1);
                if symmetric || i == j {
                    upper.push((i.min(j), i.max(j), v));
                } else if i < j {
                    upper.push((i, j, v));
                } else {
                    lower.push((j, i, v));
                }
            }
        }
    }
    let (n, nnz) = size.ok_or(Error::Empty("matrix market size line"))?;
    let seen = upper.len() + lower.len();
    if seen != nnz {
        return Err(Error::parse(0, format!("header declares {nnz} entries, found {seen}")));
    }
    if !symmetric {
        // a general file must mirror every off-diagonal entry
        let strict = SparseSym::from_triplets(n, upper.iter().copied().filter(|e| e.0 != e.1))?;
        let mirrored = SparseSym::from_triplets(n, lower.iter().copied())?;
        if strict != mirrored {
            return Err(Error::invalid("general matrix market input is not symmetric"));
        }
        return SparseSym::from_triplets(n, upper);
    }
    SparseSym::from_triplets(n, upper)
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|e| Error::parse(line, format!("bad integer '{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let m = SparseSym::from_triplets(3, [(0, 1, 2.5), (2, 2, -1.0), (1, 2, 3.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n"));
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), m);
    }

    #[test]
    fn pattern_general_input() {
        let text = "%%MatrixMarket matrix coordinate pattern general\n% c\n2 2 2\n1 2\n2 1\n";
        let m = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.entries(), &[(0, 1, 1.0)]);
        let bad = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n";
        assert!(read_matrix_market(bad.as_bytes()).is_err());
    }

    #[test]
    fn bad_index_reports_line() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n";
        match read_matrix_market(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
