//! Feature tables, similarity graphs and Bethe–Hessian spectral embeddings.

mod classify;
mod pipeline;

pub use classify::*;
pub use pipeline::*;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nishimori::{bethe_hessian_weighted, estimate_beta_n, EstimatorConfig, System};
use crate::rbim::CouplingGraph;
use crate::sparse::{smallest_eigenpairs, LanczosOptions};

/// Dense sample-by-feature matrix with optional integer labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    labels: Option<Vec<usize>>,
    binarized: bool,
}

/// JSON sidecar of the raw float32 format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSidecar {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl FeatureTable {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("feature table"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!("{} values for a {rows}x{cols} table", data.len())));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature at row {}, column {}", i / cols, i % cols)));
        }
        if let Some(l) = &labels {
            if l.len() != rows {
                return Err(Error::DimensionMismatch(format!("{} labels for {rows} rows", l.len())));
            }
        }
        Ok(Self { rows, cols, data, labels, binarized: false })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!("row {r} has {} entries, expected {cols}", rows[r].len())));
        }
        Self::new(rows.len(), cols, rows.concat(), labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn is_binarized(&self) -> bool {
        self.binarized
    }

    /// `max label + 1`, or 0 without labels.
    pub fn num_classes(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |m| m + 1)
    }

    fn require_labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or_else(|| Error::invalid("feature table has no labels"))
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&i) = idx.iter().find(|&&i| i >= self.rows) {
            return Err(Error::IndexOutOfRange { i, j: 0, n: self.rows });
        }
        let data = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let labels = self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect());
        let mut out = Self::new(idx.len(), self.cols, data, labels)?;
        out.binarized = self.binarized;
        Ok(out)
    }

    /// Subset of columns, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&j) = idx.iter().find(|&&j| j >= self.cols) {
            return Err(Error::IndexOutOfRange { i: 0, j, n: self.cols });
        }
        let data = (0..self.rows).flat_map(|i| idx.iter().map(move |&j| self.data[i * self.cols + j])).collect();
        let mut out = Self::new(self.rows, idx.len(), data, self.labels.clone())?;
        out.binarized = self.binarized;
        Ok(out)
    }

    /// Per-class mean vectors, one row per class `0..K`.
    pub fn class_means(&self) -> Result<Self> {
        let labels = self.require_labels()?;
        let k = self.num_classes();
        let mut sums = vec![0.0; k * self.cols];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c * self.cols..(c + 1) * self.cols].iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InsufficientData(format!("class {c} has no samples")));
        }
        for (c, &n) in counts.iter().enumerate() {
            sums[c * self.cols..(c + 1) * self.cols].iter_mut().for_each(|s| *s /= n as f64);
        }
        Self::new(k, self.cols, sums, Some((0..k).collect()))
    }

    /// CSV with a header row; a column named `label` holds class labels.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let label_col = headers.iter().position(|h| h == "label");
        let cols = headers.len() - usize::from(label_col.is_some());
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut rows = 0;
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = r + 2;
            for (j, field) in rec.iter().enumerate() {
                if Some(j) == label_col {
                    labels.push(field.parse::<usize>().map_err(|e| Error::parse(line, format!("label '{field}': {e}")))?);
                } else {
                    data.push(field.parse::<f64>().map_err(|e| Error::parse(line, format!("column {}: {e}", &headers[j])))?);
                }
            }
            rows += 1;
        }
        Self::new(rows, cols, data, label_col.map(|_| labels))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.cols).map(|j| format!("f{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for i in 0..self.rows {
            let mut rec: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Row-major little-endian float32 values described by `sidecar`.
    pub fn read_raw<R: Read>(mut reader: R, sidecar: &RawSidecar) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let want = sidecar.rows * sidecar.cols * 4;
        if bytes.len() != want {
            return Err(Error::DimensionMismatch(format!("raw file has {} bytes, sidecar implies {want}", bytes.len())));
        }
        let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
        Self::new(sidecar.rows, sidecar.cols, data, sidecar.labels.clone())
    }

    /// Writes the values as float32 and returns the matching sidecar.
    pub fn write_raw<W: Write>(&self, mut writer: W) -> Result<RawSidecar> {
        for x in &self.data {
            writer.write_all(&(*x as f32).to_le_bytes())?;
        }
        Ok(RawSidecar { rows: self.rows, cols: self.cols, labels: self.labels.clone() })
    }
}

/// Entries mapped to ±1, with `sign(0) = +1`.
pub fn binarize(ft: &FeatureTable) -> FeatureTable {
    let mut out = ft.clone();
    out.data.iter_mut().for_each(|x| *x = if *x < 0.0 { -1.0 } else { 1.0 });
    out.binarized = true;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    /// One set per class, scored by `|mean_c - mean_rest|`.
    PerClass,
    /// A single set scored by the sum of the per-class scores.
    Global,
}

/// Most discriminative feature indices, in selection order. Returns one set
/// per class (`PerClass`) or a single set (`Global`); ties go to the lower
/// index.
pub fn select_indices(ft: &FeatureTable, s: usize, mode: IndexMode) -> Result<Vec<Vec<usize>>> {
    let labels = ft.require_labels()?;
    if s == 0 || s > ft.cols() {
        return Err(Error::invalid(format!("need 1 <= s <= {}, got {s}", ft.cols())));
    }
    let k = ft.num_classes();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&c| counts[c] += 1);
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::InsufficientData(format!("class {c} has {} samples, need at least 2", counts[c])));
    }
    if k < 2 {
        return Err(Error::InsufficientData("index selection needs at least two classes".into()));
    }
    let d = ft.cols();
    let mut sums = vec![0.0; k * d];
    for (i, &c) in labels.iter().enumerate() {
        for (acc, x) in sums[c * d..(c + 1) * d].iter_mut().zip(ft.row(i)) {
            *acc += x;
        }
    }
    let total: Vec<f64> = (0..d).map(|j| (0..k).map(|c| sums[c * d + j]).sum()).collect();
    let n = ft.rows() as f64;
    let scores: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let nc = counts[c] as f64;
            (0..d).map(|j| (sums[c * d + j] / nc - (total[j] - sums[c * d + j]) / (n - nc)).abs()).collect()
        })
        .collect();
    let top = |score: &[f64]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        idx.truncate(s);
        idx
    };
    Ok(match mode {
        IndexMode::PerClass => scores.iter().map(|sc| top(sc)).collect(),
        IndexMode::Global => {
            let summed: Vec<f64> = (0..d).map(|j| scores.iter().map(|sc| sc[j]).sum()).collect();
            vec![top(&summed)]
        }
    })
}

/// Sorted union of index sets.
pub fn union_indices(sets: &[Vec<usize>]) -> Vec<usize> {
    let mut all: Vec<usize> = sets.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// `exp(-γ (1 - cos)²)`.
pub fn cosine_kernel(cos: f64, gamma: f64) -> f64 {
    let d = 1.0 - cos.clamp(-1.0, 1.0);
    (-gamma * d * d).exp()
}

fn unit_rows(ft: &FeatureTable) -> Result<Vec<Vec<f64>>> {
    (0..ft.rows())
        .map(|i| {
            let row = ft.row(i);
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::invalid(format!("row {i} has zero norm; cosine distance undefined")));
            }
            Ok(row.iter().map(|x| x / norm).collect())
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kernel weights for explicit sample pairs.
pub fn kernel_weights(ft: &FeatureTable, gamma: f64, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let unit = unit_rows(ft)?;
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= ft.rows() || j >= ft.rows() {
                return Err(Error::IndexOutOfRange { i, j, n: ft.rows() });
            }
            Ok(cosine_kernel(dot(&unit[i], &unit[j]), gamma))
        })
        .collect()
}

/// Cosine-kernel graph keeping the union of every vertex's `p` strongest
/// edges. Ties among candidates go to the lower index.
pub fn similarity_graph(ft: &FeatureTable, gamma: f64, p: usize) -> Result<CouplingGraph> {
    if !(gamma > 0.0 && gamma.is_finite()) || p == 0 {
        return Err(Error::invalid(format!("need gamma > 0 and p >= 1, got gamma = {gamma}, p = {p}")));
    }
    let n = ft.rows();
    let unit = unit_rows(ft)?;
    let mut kept: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (cosine_kernel(dot(&unit[i], &unit[j]), gamma), j)));
        let by_strength = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        let keep = p.min(cand.len());
        if keep < cand.len() {
            cand.select_nth_unstable_by(keep, by_strength);
        }
        for &(w, j) in &cand[..keep] {
            kept.insert((i.min(j), i.max(j)), w);
        }
    }
    CouplingGraph::new(n, kept.into_iter().map(|((i, j), w)| (i, j, w)))
}

/// Bethe–Hessian eigenvector coordinates at the estimated `β_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// `coords[i]` is the `r`-dimensional coordinate of sample `i`.
    pub coords: Vec<Vec<f64>>,
    pub beta_n_used: f64,
    pub graph_id: String,
}

impl Embedding {
    pub fn r(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    /// CSV with columns `e0..e{r-1}` and an optional `label` column.
    pub fn write_csv<W: Write>(&self, writer: W, labels: Option<&[usize]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.r()).map(|j| format!("e{j}")).collect();
        if labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for (i, row) in self.coords.iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            if let Some(l) = labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub r: usize,
    /// Drop the eigenvector of the smallest eigenvalue.
    pub skip_first: bool,
    pub lanczos_tol: f64,
}

impl EmbedOptions {
    pub fn new(r: usize) -> Self {
        Self { r, skip_first: false, lanczos_tol: 1e-8 }
    }
}

/// Flips `v` so that its first entry above `1e-12` in magnitude is positive.
pub fn fix_sign(v: &mut [f64]) {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-12) {
        if *x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

/// Runs the estimator on `j`, then returns the `r` eigenvectors of smallest
/// eigenvalue of the Bethe–Hessian at `β_N`.
pub fn spectral_embed(j: &CouplingGraph, cfg: &EstimatorConfig, opts: &EmbedOptions) -> Result<Embedding> {
    let n = j.n();
    let want = opts.r + usize::from(opts.skip_first);
    if opts.r == 0 || want >= n {
        return Err(Error::invalid(format!("need 1 <= r < n = {n} (r = {}, skip_first = {})", opts.r, opts.skip_first)));
    }
    let (components, _) = j.graph().components();
    if components > 1 {
        log::warn!("embedding a graph with {components} components as one block-diagonal system");
    }
    let trace = estimate_beta_n(&System::Weighted(j.clone()), cfg)?;
    if !trace.converged {
        log::warn!("estimator did not converge; using best beta {}", trace.beta_n);
    }
    let h = bethe_hessian_weighted(j, trace.beta_n)?;
    let pairs = smallest_eigenpairs(&h, want, &LanczosOptions::with_tol(opts.lanczos_tol))?;
    let mut vectors: Vec<Vec<f64>> = pairs.vectors.into_iter().skip(usize::from(opts.skip_first)).collect();
    for v in &mut vectors {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        fix_sign(v);
    }
    let coords = (0..n).map(|i| vectors.iter().map(|v| v[i]).collect()).collect();
    Ok(Embedding { coords, beta_n_used: trace.beta_n, graph_id: String::new() })
}
