//! Softmax classifier, pairwise MLP arbiter, three-way ensemble and metrics.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Format version written into model JSON.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 300, learning_rate: 0.5, l2: 1e-4, seed: 0 }
    }
}

/// Per-feature standardisation fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let d = check_rows(x)?;
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 1e-24 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) * s).collect()
    }
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map(Vec::len).ok_or(Error::Empty("training rows"))?;
    if d == 0 {
        return Err(Error::Empty("feature dimension"));
    }
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(format!("row {i} has {} entries, expected {d}", x[i].len())));
    }
    Ok(d)
}

/// Multinomial logistic regression on standardised inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub version: u32,
    pub n_classes: usize,
    pub dim: usize,
    pub standardizer: Standardizer,
    /// `n_classes × dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    z.iter_mut().for_each(|v| *v = (*v - m).exp());
    let s: f64 = z.iter().sum();
    z.iter_mut().for_each(|v| *v /= s);
}

impl LinearModel {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| self.bias[c] + self.weights[c * self.dim..(c + 1) * self.dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Class posterior of a raw (unstandardised) row.
    pub fn predict(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("row has {} entries, model expects {}", row.len(), self.dim)));
        }
        let mut z = self.logits(&self.standardizer.apply(row));
        softmax_in_place(&mut z);
        Ok(z)
    }
}

/// Full-batch gradient descent on the mean cross-entropy with L2 penalty.
pub fn train_linear(x: &[Vec<f64>], labels: &[usize], opts: &TrainOptions) -> Result<LinearModel> {
    let d = check_rows(x)?;
    if labels.len() != x.len() {
        return Err(Error::DimensionMismatch(format!("{} labels for {} rows", labels.len(), x.len())));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; k];
    labels.iter().for_each(|&c| seen[c] = true);
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::InsufficientData("training data covers a single class".into()));
    }
    let standardizer = Standardizer::fit(x)?;
    let xs: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply(r)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = LinearModel {
        version: MODEL_VERSION,
        n_classes: k,
        dim: d,
        standardizer,
        weights: (0..k * d).map(|_| rng.random_range(-0.01..0.01)).collect(),
        bias: vec![0.0; k],
    };
    let n = xs.len() as f64;
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    for _ in 0..opts.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (row, &y) in xs.iter().zip(labels) {
            let mut p = model.logits(row);
            softmax_in_place(&mut p);
            p[y] -= 1.0;
            for c in 0..k {
                gb[c] += p[c];
                for (g, v) in gw[c * d..(c + 1) * d].iter_mut().zip(row) {
                    *g += p[c] * v;
                }
            }
        }
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= opts.learning_rate * (g / n + opts.l2 * *w);
        }
        for (b, g) in model.bias.iter_mut().zip(&gb) {
            *b -= opts.learning_rate * g / n;
        }
    }
    Ok(model)
}

/// One-hidden-layer binary classifier between classes `a` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub a: usize,
    pub b: usize,
    pub dim: usize,
    pub hidden: usize,
    pub standardizer: Standardizer,
    /// `hidden × dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl PairModel {
    fn forward(&self, x: &[f64], h: &mut [f64]) -> f64 {
        for (k, hk) in h.iter_mut().enumerate() {
            *hk = (self.b1[k] + self.w1[k * self.dim..(k + 1) * self.dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh();
        }
        let z = self.b2 + self.w2.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }

    /// Probability that a raw row belongs to class `b`.
    pub fn prob_b(&self, row: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.forward(&self.standardizer.apply(row), &mut h)
    }

    pub fn decide(&self, row: &[f64]) -> usize {
        if self.prob_b(row) > 0.5 {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arbiter {
    pub version: u32,
    pub pairs: Vec<PairModel>,
}

impl Arbiter {
    /// Pairwise decision between `c1` and `c2`, if a model for the pair exists.
    pub fn decide(&self, row: &[f64], c1: usize, c2: usize) -> Option<usize> {
        let key = (c1.min(c2), c1.max(c2));
        self.pairs.iter().find(|m| (m.a, m.b) == key).map(|m| m.decide(row))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ArbiterOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_per_class: usize,
}

impl Default for ArbiterOptions {
    fn default() -> Self {
        Self { epochs: 300, learning_rate: 0.01, seed: 0, min_per_class: 10 }
    }
}

/// Trains one MLP (hidden width `2 × dim`) per pair with full-batch Adam on
/// the binary cross-entropy.
pub fn arbiter_train(x: &[Vec<f64>], labels: &[usize], pairs: &[(usize, usize)], opts: &ArbiterOptions) -> Result<Arbiter> {
    let d = check_rows(x)?;
    if labels.len() != x.len() {
        return Err(Error::DimensionMismatch(format!("{} labels for {} rows", labels.len(), x.len())));
    }
    let mut models = Vec::new();
    for (idx, &(p, q)) in pairs.iter().enumerate() {
        let (a, b) = (p.min(q), p.max(q));
        if a == b {
            return Err(Error::invalid(format!("pair ({p}, {q}) repeats a class")));
        }
        let rows: Vec<(&Vec<f64>, f64)> =
            x.iter().zip(labels).filter(|(_, &y)| y == a || y == b).map(|(r, &y)| (r, if y == b { 1.0 } else { 0.0 })).collect();
        let nb = rows.iter().filter(|r| r.1 == 1.0).count();
        let na = rows.len() - nb;
        if na < opts.min_per_class || nb < opts.min_per_class {
            return Err(Error::InsufficientData(format!(
                "pair ({a}, {b}) has {na} and {nb} samples, need {} each",
                opts.min_per_class
            )));
        }
        let raw: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let standardizer = Standardizer::fit(&raw)?;
        let xs: Vec<Vec<f64>> = raw.iter().map(|r| standardizer.apply(r)).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let hidden = 2 * d;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let s1 = (6.0 / (d + hidden) as f64).sqrt();
        let s2 = (6.0 / (hidden + 1) as f64).sqrt();
        let mut m = PairModel {
            a,
            b,
            dim: d,
            hidden,
            standardizer,
            w1: (0..hidden * d).map(|_| rng.random_range(-s1..s1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-s2..s2)).collect(),
            b2: 0.0,
        };
        fit_pair(&mut m, &xs, &ys, opts);
        models.push(m);
    }
    Ok(Arbiter { version: MODEL_VERSION, pairs: models })
}

fn fit_pair(m: &mut PairModel, xs: &[Vec<f64>], ys: &[f64], opts: &ArbiterOptions) {
    let (d, hd) = (m.dim, m.hidden);
    let n_params = hd * d + hd + hd + 1;
    let mut first = vec![0.0; n_params];
    let mut second = vec![0.0; n_params];
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut h = vec![0.0; hd];
    let n = xs.len() as f64;
    for t in 1..=opts.epochs {
        let mut g = vec![0.0; n_params];
        for (x, &y) in xs.iter().zip(ys) {
            let p = m.forward(x, &mut h);
            let dz = p - y;
            let (g_w1, rest) = g.split_at_mut(hd * d);
            let (g_b1, rest) = rest.split_at_mut(hd);
            let (g_w2, g_b2) = rest.split_at_mut(hd);
            g_b2[0] += dz;
            for k in 0..hd {
                g_w2[k] += dz * h[k];
                let dh = dz * m.w2[k] * (1.0 - h[k] * h[k]);
                g_b1[k] += dh;
                for (gw, v) in g_w1[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *gw += dh * v;
                }
            }
        }
        let c1 = 1.0 - f64::powi(beta1, t as i32);
        let c2 = 1.0 - f64::powi(beta2, t as i32);
        let params = m.w1.iter_mut().chain(m.b1.iter_mut()).chain(m.w2.iter_mut()).chain(std::iter::once(&mut m.b2));
        for (((w, gi), mi), vi) in params.zip(&g).zip(first.iter_mut()).zip(second.iter_mut()) {
            let gi = gi / n;
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            *w -= opts.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    Majority,
    Soft,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub mode: VoteMode,
    /// Top-two margin below which an available arbiter overrides.
    pub margin_threshold: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { mode: VoteMode::Majority, margin_threshold: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    Unanimous,
    TwoOfThree,
    ArbiterDisagreement,
    SoftFallback,
    Soft,
    ArbiterMargin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub class: usize,
    pub rule: DecisionRule,
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |best, (i, &v)| if v > p[best] { i } else { best })
}

/// Largest entry other than `skip`; ties go to the lower index.
fn best_except(p: &[f64], skip: usize) -> Option<usize> {
    (0..p.len()).filter(|&i| i != skip).fold(None, |best, i| match best {
        Some(b) if p[b] >= p[i] => Some(b),
        _ => Some(i),
    })
}

/// Largest and second-largest classes of `p` and their margin.
pub fn top_two(p: &[f64]) -> (usize, usize, f64) {
    let first = argmax(p);
    match best_except(p, first) {
        Some(s) => (first, s, p[first] - p[s]),
        None => (first, first, f64::INFINITY),
    }
}

fn mean_of(posts: &[&[f64]]) -> Vec<f64> {
    // summing in a canonical order keeps the result independent of graph order
    let mut sorted: Vec<&[f64]> = posts.to_vec();
    sorted.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let k = sorted[0].len();
    (0..k).map(|c| sorted.iter().map(|p| p[c]).sum::<f64>() / sorted.len() as f64).collect()
}

/// Combines three class posteriors. `arbiter(c1, c2)` returns its pick
/// between two classes.
pub fn ensemble_decide(
    posts: [&[f64]; 3],
    cfg: &EnsembleConfig,
    arbiter: Option<&dyn Fn(usize, usize) -> usize>,
) -> Result<Decision> {
    let k = posts[0].len();
    if k == 0 || posts.iter().any(|p| p.len() != k) {
        return Err(Error::DimensionMismatch(format!(
            "posterior lengths {}, {}, {}",
            posts[0].len(),
            posts[1].len(),
            posts[2].len()
        )));
    }
    if !(cfg.margin_threshold >= 0.0) {
        return Err(Error::invalid(format!("margin threshold must be >= 0, got {}", cfg.margin_threshold)));
    }
    let (class, rule, deciding) = match cfg.mode {
        VoteMode::Soft => {
            let avg = mean_of(&posts);
            (argmax(&avg), DecisionRule::Soft, avg)
        }
        VoteMode::Majority => {
            let votes: Vec<usize> = posts.iter().map(|p| argmax(p)).collect();
            let winner = votes.iter().copied().find(|&v| votes.iter().filter(|&&w| w == v).count() >= 2);
            match winner {
                Some(c) => {
                    let voters: Vec<&[f64]> = posts.iter().zip(&votes).filter(|(_, &v)| v == c).map(|(p, _)| *p).collect();
                    let rule = if voters.len() == 3 { DecisionRule::Unanimous } else { DecisionRule::TwoOfThree };
                    (c, rule, mean_of(&voters))
                }
                None => {
                    let avg = mean_of(&posts);
                    match arbiter {
                        Some(arb) => {
                            let (c1, c2, _) = top_two(&avg);
                            return Ok(Decision { class: arb(c1, c2), rule: DecisionRule::ArbiterDisagreement });
                        }
                        None => (argmax(&avg), DecisionRule::SoftFallback, avg),
                    }
                }
            }
        }
    };
    if let Some(arb) = arbiter {
        if let Some(c2) = best_except(&deciding, class) {
            if deciding[class] - deciding[c2] < cfg.margin_threshold {
                return Ok(Decision { class: arb(class, c2), rule: DecisionRule::ArbiterMargin });
            }
        }
    }
    Ok(Decision { class, rule })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Metrics> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} truths vs {} predictions", truth.len(), predicted.len())));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::invalid(format!("label {} outside 0..{n_classes}", t.max(p))));
        }
        confusion[t][p] += 1;
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class = (0..n_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            let (precision, recall) = (ratio(tp, predicted), ratio(tp, support));
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics { class: c, precision, recall, f1, support }
        })
        .collect();
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    Ok(Metrics { accuracy: correct as f64 / truth.len() as f64, per_class, confusion })
}

impl Metrics {
    /// Rows `truth, 0..K` with predicted-class columns.
    pub fn write_confusion_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["truth".to_string()];
        header.extend((0..self.confusion.len()).map(|c| c.to_string()));
        w.write_record(&header)?;
        for (t, row) in self.confusion.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `class,precision,recall,f1,support` rows.
    pub fn write_class_table_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for m in &self.per_class {
            w.serialize(m)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    fn blobs(centres: &[Vec<f64>], per: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per {
                x.push(centre.iter().map(|m| m + noise.sample(&mut rng)).collect());
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_two_class() {
        let x = vec![vec![0.0, 0.0], vec![0.2, 0.1], vec![0.1, 0.3], vec![2.0, 2.0], vec![2.2, 1.9], vec![1.8, 2.1]];
        let y = vec![0, 0, 0, 1, 1, 1];
        let m = train_linear(&x, &y, &TrainOptions::default()).unwrap();
        for (r, &c) in x.iter().zip(&y) {
            let p = m.predict(r).unwrap();
            assert_eq!(argmax(&p), c);
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        assert!(train_linear(&x, &[0; 6], &TrainOptions::default()).is_err());
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<LinearModel>(&json).unwrap(), m);
    }

    #[test]
    fn three_blobs_generalise() {
        let centres = vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]];
        let (x, y) = blobs(&centres, 60, 0.5, 1);
        let (xt, yt) = blobs(&centres, 100, 0.5, 2);
        let m = train_linear(&x, &y, &TrainOptions::default()).unwrap();
        let pred: Vec<usize> = xt.iter().map(|r| argmax(&m.predict(r).unwrap())).collect();
        assert!(evaluate(&yt, &pred, 3).unwrap().accuracy >= 0.99);
    }

    #[test]
    fn arbiter_examples() {
        let centres = vec![vec![0.0, 0.0], vec![3.0, 3.0], vec![0.5, 0.0], vec![-3.0, 3.0], vec![6.0, 0.0], vec![6.5, 0.0]];
        let (x, y) = blobs(&centres, 40, 0.3, 3);
        let arb = arbiter_train(&x, &y, &[(0, 1), (1, 3), (4, 5)], &ArbiterOptions::default()).unwrap();
        let mut accs = Vec::new();
        for pm in &arb.pairs {
            let rows: Vec<(&Vec<f64>, usize)> = x.iter().zip(&y).filter(|(_, &c)| c == pm.a || c == pm.b).map(|(r, &c)| (r, c)).collect();
            accs.push(rows.iter().filter(|(r, c)| pm.decide(r) == *c).count() as f64 / rows.len() as f64);
        }
        assert_eq!(accs[0], 1.0);
        assert!(accs.iter().sum::<f64>() / 3.0 >= 0.95, "{accs:?}");
        assert_eq!(arb.decide(&[3.0, 3.0], 3, 1), Some(1));
        assert_eq!(arb.decide(&[3.0, 3.0], 0, 2), None);
        let err = arbiter_train(&x[..45], &y[..45], &[(0, 1)], &ArbiterOptions::default()).unwrap_err().to_string();
        assert!(err.contains("(0, 1)"), "{err}");
    }

    #[test]
    fn arbiter_on_identical_distributions_is_chance() {
        let centres = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let (x, y) = blobs(&centres, 200, 1.0, 5);
        let (xt, yt) = blobs(&centres, 1000, 1.0, 6);
        let arb = arbiter_train(&x, &y, &[(0, 1)], &ArbiterOptions::default()).unwrap();
        let acc = xt.iter().zip(&yt).filter(|(r, &c)| arb.pairs[0].decide(r) == c).count() as f64 / xt.len() as f64;
        assert!((acc - 0.5).abs() <= 0.05, "{acc}");
    }

    #[test]
    fn ensemble_examples() {
        let one = |c: usize| {
            let mut p = vec![0.1; 6];
            p[c] = 0.5;
            p
        };
        let (a, b, c) = (one(2), one(2), one(5));
        let cfg = EnsembleConfig::default();
        let d = ensemble_decide([&a, &b, &c], &cfg, None).unwrap();
        assert_eq!((d.class, d.rule), (2, DecisionRule::TwoOfThree));

        let soft = EnsembleConfig { mode: VoteMode::Soft, margin_threshold: 0.0 };
        let (p, q, r) = ([0.1, 0.6, 0.3], [0.3, 0.4, 0.3], [0.2, 0.5, 0.3]);
        assert_eq!(ensemble_decide([&p, &q, &r], &soft, None).unwrap().class, 1);

        let close = [0.3, 0.345, 0.355];
        let margin = EnsembleConfig { mode: VoteMode::Soft, margin_threshold: 0.05 };
        let prefer_runner_up = |x: usize, y: usize| if x == 2 { y } else { x };
        let d = ensemble_decide([&close, &close, &close], &margin, Some(&prefer_runner_up)).unwrap();
        assert_eq!((d.class, d.rule), (1, DecisionRule::ArbiterMargin));

        let (u, v, w) = (one(0), one(1), one(3));
        assert_eq!(ensemble_decide([&u, &v, &w], &cfg, None).unwrap().rule, DecisionRule::SoftFallback);
        let pick_second = |_: usize, y: usize| y;
        assert_eq!(ensemble_decide([&u, &v, &w], &cfg, Some(&pick_second)).unwrap().rule, DecisionRule::ArbiterDisagreement);
        assert!(ensemble_decide([&u, &v, &[0.5, 0.5]], &cfg, None).is_err());
    }

    #[test]
    fn metrics_by_hand() {
        let m = evaluate(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 0], 3).unwrap();
        assert_abs_diff_eq!(m.accuracy, 0.6);
        assert_eq!(m.confusion, vec![vec![1, 1, 0], vec![0, 2, 0], vec![1, 0, 0]]);
        assert_abs_diff_eq!(m.per_class[1].precision, 2.0 / 3.0);
        assert_abs_diff_eq!(m.per_class[1].recall, 1.0);
        assert_abs_diff_eq!(m.per_class[1].f1, 0.8);
        assert_eq!(m.per_class[2].f1, 0.0);
        let mut buf = Vec::new();
        m.write_confusion_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "truth,0,1,2\n0,1,1,0\n1,0,2,0\n2,1,0,0\n");
    }

    proptest::proptest! {
        #[test]
        fn majority_ignores_graph_order(raw in proptest::collection::vec(0.01f64..1.0, 12), perm in 0usize..6) {
            let norm = |s: &[f64]| { let t: f64 = s.iter().sum(); s.iter().map(|x| x / t).collect::<Vec<_>>() };
            let p = [norm(&raw[0..4]), norm(&raw[4..8]), norm(&raw[8..12])];
            let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let o = orders[perm];
            for mode in [VoteMode::Majority, VoteMode::Soft] {
                let cfg = EnsembleConfig { mode, margin_threshold: 0.0 };
                let base = ensemble_decide([&p[0], &p[1], &p[2]], &cfg, None).unwrap();
                let other = ensemble_decide([&p[o[0]], &p[o[1]], &p[o[2]]], &cfg, None).unwrap();
                proptest::prop_assert_eq!(base, other);
            }
            let avg = mean_of(&[&p[0], &p[1], &p[2]]);
            proptest::prop_assert!((avg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            proptest::prop_assert!(avg.iter().all(|&x| x >= 0.0));
        }
    }
}
