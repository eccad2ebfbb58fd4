//! File formats private to the command line: edge lists and posterior tables.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qcising::embed::{FeatureTable, RawSidecar};

/// Edge list: one `u v` or `u v w` per line, whitespace or comma separated.
/// `#` starts a comment; an optional `n=<count>` line fixes the vertex count.
pub struct EdgeList {
    pub n: usize,
    pub edges: Vec<(usize, usize, Option<f64>)>,
}

pub fn read_edge_list(path: &Path) -> Result<EdgeList> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut n_decl = None;
    let mut edges: Vec<(usize, usize, Option<f64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(v) = line.strip_prefix("n=") {
            n_decl = Some(v.trim().parse::<usize>().with_context(|| format!("{}:{}: bad vertex count", path.display(), idx + 1))?);
            continue;
        }
        let parts: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let bad = || format!("{}:{}: expected 'u v' or 'u v w', got '{line}'", path.display(), idx + 1);
        match parts.as_slice() {
            [u, v] => edges.push((u.parse().with_context(bad)?, v.parse().with_context(bad)?, None)),
            [u, v, w] => edges.push((u.parse().with_context(bad)?, v.parse().with_context(bad)?, Some(w.parse().with_context(bad)?))),
            _ => bail!(bad()),
        }
    }
    let n_seen = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
    let n = match n_decl {
        Some(n) if n < n_seen => bail!("{}: n={n} but vertex {} appears", path.display(), n_seen - 1),
        Some(n) => n,
        None => n_seen,
    };
    Ok(EdgeList { n, edges })
}

/// CSV features, or raw float32 when the file ends in `.f32`/`.bin` (the
/// sidecar defaults to the same path with `.json`).
pub fn read_features(path: &Path, sidecar: Option<&Path>) -> Result<FeatureTable> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext == "f32" || ext == "bin" {
        let side_path = sidecar.map(Path::to_path_buf).unwrap_or_else(|| path.with_extension("json"));
        let side: RawSidecar = serde_json::from_str(
            &fs::read_to_string(&side_path).with_context(|| format!("reading {}", side_path.display()))?,
        )
        .with_context(|| format!("parsing {}", side_path.display()))?;
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(FeatureTable::read_raw(file, &side).with_context(|| format!("reading {}", path.display()))?)
    } else {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(FeatureTable::read_csv(file).with_context(|| format!("reading {}", path.display()))?)
    }
}

/// One row of a posterior table.
pub struct PosteriorRow {
    pub row: usize,
    pub split: String,
    pub label: Option<usize>,
    pub probs: Vec<f64>,
}

pub fn write_posteriors(path: &Path, rows: &[PosteriorRow]) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.probs.len());
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["row".to_string(), "split".into(), "label".into()];
    header.extend((0..k).map(|c| format!("p{c}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.row.to_string(), r.split.clone(), r.label.map_or(String::new(), |l| l.to_string())];
        rec.extend(r.probs.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_posteriors(path: &Path) -> Result<Vec<PosteriorRow>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: record {}", path.display(), i + 1))?;
        if rec.len() < 4 {
            bail!("{}: record {} has {} fields, expected row,split,label,p0..", path.display(), i + 1, rec.len());
        }
        let ctx = || format!("{}: record {}", path.display(), i + 1);
        out.push(PosteriorRow {
            row: rec[0].parse().with_context(ctx)?,
            split: rec[1].to_string(),
            label: if rec[2].is_empty() { None } else { Some(rec[2].parse().with_context(ctx)?) },
            probs: rec.iter().skip(3).map(|p| p.parse::<f64>()).collect::<std::result::Result<_, _>>().with_context(ctx)?,
        });
    }
    Ok(out)
}

pub struct OutDir(pub PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}
