//! End-to-end embed → classify → ensemble runs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::classify::*;
use super::{binarize, kernel_weights, select_indices, similarity_graph, spectral_embed, union_indices};
use super::{EmbedOptions, Embedding, FeatureTable, IndexMode};
use crate::error::{Error, Result};
use crate::nishimori::{expand_bracket, EstimatorConfig, System};
use crate::qc::{lift, Family, MetProtograph};
use crate::rbim::CouplingGraph;

/// Gaussian class blobs with planted informative dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Planted dimensions per class (disjoint across classes when they fit).
    pub informative: usize,
    /// Mean shift on each planted dimension, in noise standard deviations.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { classes: 10, dim: 1280, per_class: 300, informative: 32, separation: 1.0, seed: 0 }
    }
}

pub fn synthetic_blobs(cfg: &SyntheticConfig) -> Result<FeatureTable> {
    if cfg.classes < 2 || cfg.per_class == 0 || cfg.informative == 0 || cfg.informative > cfg.dim {
        return Err(Error::invalid(format!("unusable synthetic configuration {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dims: Vec<usize> = (0..cfg.dim).collect();
    dims.shuffle(&mut rng);
    let mut data = Vec::with_capacity(cfg.classes * cfg.per_class * cfg.dim);
    let mut labels = Vec::with_capacity(cfg.classes * cfg.per_class);
    for c in 0..cfg.classes {
        let mut mean = vec![0.0; cfg.dim];
        for k in 0..cfg.informative {
            mean[dims[(c * cfg.informative + k) % cfg.dim]] = cfg.separation;
        }
        for _ in 0..cfg.per_class {
            data.extend(mean.iter().map(|m| m + Distribution::<f64>::sample(&StandardNormal, &mut rng)));
            labels.push(c);
        }
    }
    FeatureTable::new(labels.len(), cfg.dim, data, Some(labels))
}

/// Stratified split: the first `round(test_fraction · n_c)` of each class's
/// shuffled members go to the test set. Both lists are ascending.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!("test fraction must lie in [0, 1), got {test_fraction}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let k = (test_fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Sample pairs from a lifted QC graph: two samples are joined when their
/// variables share a check. A spherical base is one row of three cells, a
/// toroidal base two rows; shifts and the variable-to-sample map are drawn
/// from `seed`.
pub fn qc_overlay(n: usize, family: Family, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n < 3 {
        return Err(Error::invalid(format!("overlay needs at least 3 samples, got {n}")));
    }
    let rows = match family {
        Family::Spherical => 1,
        Family::Toroidal | Family::Generic => 2,
    };
    let cols = 3;
    let l = n.div_ceil(cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..rows).map(|_| (0..cols).map(|_| vec![rng.random_range(0..l)]).collect()).collect();
    let tanner = lift(&MetProtograph::new(l, cells)?.with_family(family));
    let mut to_sample: Vec<usize> = (0..tanner.n_vars()).collect();
    to_sample.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); tanner.n_checks()];
    for &(c, v) in tanner.edges() {
        if to_sample[v] < n {
            members[c].push(to_sample[v]);
        }
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for m in &members {
        for (x, &a) in m.iter().enumerate() {
            for &b in &m[x + 1..] {
                pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Union of a kernel graph with kernel-weighted overlay pairs.
pub fn overlay_graph(base: &CouplingGraph, ft: &FeatureTable, gamma: f64, pairs: &[(usize, usize)]) -> Result<CouplingGraph> {
    let mut edges: BTreeMap<(usize, usize), f64> = base.edges().iter().map(|&(i, j, w)| ((i, j), w)).collect();
    let fresh: Vec<(usize, usize)> = pairs.iter().copied().filter(|p| !edges.contains_key(p)).collect();
    for (p, w) in fresh.iter().zip(kernel_weights(ft, gamma, &fresh)?) {
        edges.insert(*p, w);
    }
    CouplingGraph::new(base.n(), edges.into_iter().map(|((i, j), w)| (i, j, w)))
}

/// Bracket found by doubling `β` from `beta_start`.
pub fn auto_estimator_config(j: &CouplingGraph, beta_start: f64, eps: f64) -> Result<EstimatorConfig> {
    let (lo, hi) = expand_bracket(&System::Weighted(j.clone()), beta_start, 1e-10)?;
    Ok(EstimatorConfig::new(lo, hi).with_eps(eps))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub test_fraction: f64,
    pub r: usize,
    pub skip_first: bool,
    /// Indices kept per class (or in total for the global mode).
    pub select: usize,
    pub index_mode: IndexMode,
    pub binarize: bool,
    pub gamma: f64,
    pub top_p: usize,
    pub overlays: [Family; 3],
    pub ensemble: EnsembleConfig,
    /// Number of closest class pairs given an arbiter; 0 disables it.
    pub arbiter_pairs: usize,
    pub eps: f64,
    pub train: TrainOptions,
    pub arbiter: ArbiterOptions,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            r: 32,
            skip_first: false,
            select: 32,
            index_mode: IndexMode::PerClass,
            binarize: false,
            gamma: 5.0,
            top_p: 10,
            overlays: [Family::Spherical, Family::Toroidal, Family::Toroidal],
            ensemble: EnsembleConfig { mode: VoteMode::Majority, margin_threshold: 0.05 },
            arbiter_pairs: 3,
            eps: 1e-6,
            train: TrainOptions::default(),
            arbiter: ArbiterOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub graph_id: String,
    pub edges: usize,
    pub overlay_edges: usize,
    pub beta_n: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub version: u32,
    pub n_train: usize,
    pub n_test: usize,
    pub n_classes: usize,
    pub selected_features: usize,
    pub graphs: Vec<GraphSummary>,
    pub majority_accuracy: f64,
    pub soft_accuracy: f64,
    pub arbiter_pairs: Vec<(usize, usize)>,
    pub arbiter_invocations: usize,
    /// Metrics of the configured ensemble mode.
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub version: u32,
    pub classifiers: Vec<LinearModel>,
    pub arbiter: Option<Arbiter>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: PipelineReport,
    pub embeddings: Vec<Embedding>,
    pub model: PipelineModel,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn rows_of(e: &Embedding, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| e.coords[i].clone()).collect()
}

/// Class pairs ordered by the distance between their mean embeddings.
pub fn closest_class_pairs(x: &[Vec<f64>], labels: &[usize], count: usize) -> Vec<(usize, usize)> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let d = x.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in x.iter().zip(labels) {
        counts[c] += 1;
        sums[c].iter_mut().zip(r).for_each(|(s, v)| *s += v);
    }
    let means: Vec<Vec<f64>> = sums.iter().zip(&counts).map(|(s, &n)| s.iter().map(|v| v / n.max(1) as f64).collect()).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for a in (0..k).filter(|&a| counts[a] > 0) {
        for b in (a + 1..k).filter(|&b| counts[b] > 0) {
            let dist: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y).powi(2)).sum();
            pairs.push((dist, a, b));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then((p.1, p.2).cmp(&(q.1, q.2))));
    pairs.into_iter().take(count).map(|(_, a, b)| (a, b)).collect()
}

pub fn run_pipeline(ft: &FeatureTable, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let labels = ft.labels().ok_or_else(|| Error::invalid("pipeline needs labelled features"))?.to_vec();
    let k = ft.num_classes();
    let ft = if cfg.binarize { binarize(ft) } else { ft.clone() };
    let (train, test) = stratified_split(&labels, cfg.test_fraction, cfg.seed)?;
    if test.is_empty() {
        return Err(Error::InsufficientData("test split is empty".into()));
    }
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<usize> = test.iter().map(|&i| labels[i]).collect();

    let sets = select_indices(&ft.select_rows(&train)?, cfg.select, cfg.index_mode)?;
    let features = ft.select_cols(&union_indices(&sets))?;
    log::info!("{} of {} features selected", features.cols(), ft.cols());
    let base = similarity_graph(&features, cfg.gamma, cfg.top_p)?;

    let mut embeddings = Vec::new();
    let mut classifiers = Vec::new();
    let mut posteriors: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut graphs = Vec::new();
    for (g, &family) in cfg.overlays.iter().enumerate() {
        let graph_seed = cfg.seed.wrapping_add(g as u64 + 1);
        let pairs = qc_overlay(ft.rows(), family, graph_seed)?;
        let j = overlay_graph(&base, &features, cfg.gamma, &pairs)?;
        let est = auto_estimator_config(&j, 0.05, cfg.eps)?;
        let opts = EmbedOptions { skip_first: cfg.skip_first, ..EmbedOptions::new(cfg.r) };
        let mut emb = spectral_embed(&j, &est, &opts)?;
        emb.graph_id = format!("g{g}-{}", family.name());
        let model = train_linear(&rows_of(&emb, &train), &train_labels, &TrainOptions { seed: graph_seed, ..cfg.train.clone() })?;
        let post: Vec<Vec<f64>> = test.iter().map(|&i| model.predict(&emb.coords[i])).collect::<Result<_>>()?;
        let pred: Vec<usize> = post.iter().map(|p| argmax(p)).collect();
        let acc = evaluate(&test_labels, &pred, k)?.accuracy;
        log::info!("{}: beta_N = {:.6}, {} edges, test accuracy {:.4}", emb.graph_id, emb.beta_n_used, j.edges().len(), acc);
        graphs.push(GraphSummary {
            graph_id: emb.graph_id.clone(),
            edges: j.edges().len(),
            overlay_edges: pairs.len(),
            beta_n: emb.beta_n_used,
            test_accuracy: acc,
        });
        embeddings.push(emb);
        classifiers.push(model);
        posteriors.push(post);
    }

    let arbiter_pairs = if cfg.arbiter_pairs > 0 {
        closest_class_pairs(&rows_of(&embeddings[0], &train), &train_labels, cfg.arbiter_pairs)
    } else {
        Vec::new()
    };
    let arbiter = if arbiter_pairs.is_empty() {
        None
    } else {
        Some(arbiter_train(&rows_of(&embeddings[0], &train), &train_labels, &arbiter_pairs, &cfg.arbiter)?)
    };

    let mut invocations = 0;
    let mut decide_all = |ens: &EnsembleConfig, count: bool| -> Result<Vec<usize>> {
        test.iter()
            .enumerate()
            .map(|(t, &i)| {
                let row = &embeddings[0].coords[i];
                let arb_fn = |a: usize, b: usize| arbiter.as_ref().and_then(|m| m.decide(row, a, b)).unwrap_or(a);
                let arb: Option<&dyn Fn(usize, usize) -> usize> = arbiter.as_ref().map(|_| &arb_fn as _);
                let d = ensemble_decide([&posteriors[0][t], &posteriors[1][t], &posteriors[2][t]], ens, arb)?;
                if count && matches!(d.rule, DecisionRule::ArbiterMargin | DecisionRule::ArbiterDisagreement) {
                    invocations += 1;
                }
                Ok(d.class)
            })
            .collect()
    };
    let majority = decide_all(&EnsembleConfig { mode: VoteMode::Majority, ..cfg.ensemble.clone() }, false)?;
    let soft = decide_all(&EnsembleConfig { mode: VoteMode::Soft, ..cfg.ensemble.clone() }, false)?;
    let configured = decide_all(&cfg.ensemble, true)?;
    let report = PipelineReport {
        version: MODEL_VERSION,
        n_train: train.len(),
        n_test: test.len(),
        n_classes: k,
        selected_features: features.cols(),
        graphs,
        majority_accuracy: evaluate(&test_labels, &majority, k)?.accuracy,
        soft_accuracy: evaluate(&test_labels, &soft, k)?.accuracy,
        arbiter_pairs,
        arbiter_invocations: invocations,
        metrics: evaluate(&test_labels, &configured, k)?,
    };
    let model = PipelineModel { version: MODEL_VERSION, classifiers, arbiter };
    Ok(PipelineOutput { report, embeddings, model, train, test })
}
