mod io;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use qcising::embed::{
    arbiter_train, argmax, closest_class_pairs, ensemble_decide, evaluate, overlay_graph, qc_overlay,
    run_pipeline, select_indices, similarity_graph, spectral_embed, stratified_split, synthetic_blobs, train_linear,
    union_indices, Arbiter, EmbedOptions, EnsembleConfig, FeatureTable, IndexMode,
    PipelineConfig, SyntheticConfig, TrainOptions, VoteMode,
};
use qcising::graph::{random_regular, Graph};
use qcising::nishimori::{
    bisection_with, estimate_beta_n, expand_bracket, lambda_curve, write_lambda_curve, EstimatorConfig, EstimatorTrace,
    System,
};
use qcising::qc::{ace_histogram, enumerate_cycles, girth, lift, Family, MetProtograph, TannerGraph, MAX_CYCLE_LEN};
use qcising::rbim::CouplingGraph;
use qcising::sparse::write_matrix_market;
use qcising::topo::{bundled_trapping_sets, compare_golden, invariant_report, CellCheck, GoldenTable, InvariantReport, TrappingSet};
use qcising::zeta::{linear_grid, zeta_report};

use io::{read_edge_list, read_features, read_posteriors, require_file, write_posteriors, OutDir, PosteriorRow};

#[derive(Parser)]
#[command(name = "qcising", version, about = "QC-LDPC graphs, Bethe–Hessian spectra and spectral embeddings")]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "qcising-out")]
    out: PathBuf,
    /// Compare against bundled reference values and fail on mismatch.
    #[arg(long, global = true)]
    golden: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lift an exponent matrix into a Tanner graph.
    Lift {
        exponents: PathBuf,
    },
    /// Enumerate Tanner-graph cycles of a lifted exponent matrix.
    Cycles {
        exponents: PathBuf,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
    },
    /// Invariant panel of trapping-set incidence matrices.
    TsTable {
        files: Vec<PathBuf>,
        /// Include the three bundled trapping sets.
        #[arg(long)]
        bundled: bool,
    },
    /// Estimate the Nishimori temperature and compare with bisection.
    Beta(BetaArgs),
    /// Ihara zeta poles, Bass residuals and determinant crossings.
    Zeta(ZetaArgs),
    /// Spectral embedding of a feature table.
    Embed(EmbedArgs),
    /// Train a softmax classifier on an embedding.
    Classify(ClassifyArgs),
    /// Combine three posterior tables.
    Ensemble(EnsembleArgs),
    /// Full embed → classify → ensemble run.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GraphSource {
    /// Edge list `u v` per line (unweighted system).
    #[arg(long, group = "source")]
    edges: Option<PathBuf>,
    /// Edge list `u v J` per line (weighted system).
    #[arg(long, group = "source")]
    couplings: Option<PathBuf>,
    /// Random regular graph on N vertices (see --degree).
    #[arg(long, group = "source")]
    regular: Option<usize>,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// Complete graph on N vertices.
    #[arg(long, group = "source")]
    complete: Option<usize>,
    /// Cycle on N vertices.
    #[arg(long, group = "source")]
    cycle: Option<usize>,
}

#[derive(Args)]
struct BetaArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    /// Also write λ_min on this many grid points of the bracket.
    #[arg(long)]
    curve_points: Option<usize>,
}

#[derive(Args)]
struct ZetaArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Comma-separated u values for the Bass residual.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.7")]
    u: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    j0: f64,
    #[arg(long, default_value_t = 5.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 400)]
    steps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Overlay {
    None,
    Spherical,
    Toroidal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Majority,
    Soft,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexArg {
    PerClass,
    Global,
}

impl From<ModeArg> for VoteMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Majority => VoteMode::Majority,
            ModeArg::Soft => VoteMode::Soft,
        }
    }
}

impl From<IndexArg> for IndexMode {
    fn from(m: IndexArg) -> Self {
        match m {
            IndexArg::PerClass => IndexMode::PerClass,
            IndexArg::Global => IndexMode::Global,
        }
    }
}

#[derive(Args)]
struct EmbedArgs {
    /// CSV (optional `label` column) or raw `.f32` with a JSON sidecar.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    gamma: f64,
    #[arg(long, default_value_t = 10)]
    top_p: usize,
    #[arg(long, default_value_t = 32)]
    r: usize,
    /// Drop the eigenvector of the smallest eigenvalue.
    #[arg(long)]
    skip_first: bool,
    /// Keep only the most discriminative indices (needs labels).
    #[arg(long)]
    select: Option<usize>,
    #[arg(long, value_enum, default_value = "per-class")]
    index_mode: IndexArg,
    #[arg(long)]
    binarize: bool,
    #[arg(long, value_enum, default_value = "none")]
    overlay: Overlay,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Embedding CSV with a `label` column.
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Also train an arbiter on this many closest class pairs.
    #[arg(long, default_value_t = 0)]
    arbiter_pairs: usize,
}

#[derive(Args)]
struct EnsembleArgs {
    /// Exactly three posterior tables written by `classify`.
    #[arg(long, num_args = 3, required = true)]
    posteriors: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "majority")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    /// Arbiter JSON written by `classify --arbiter-pairs`.
    #[arg(long, requires = "embedding")]
    arbiter: Option<PathBuf>,
    /// Embedding CSV the arbiter was trained on.
    #[arg(long)]
    embedding: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Labelled features; synthetic blobs when absent.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
}

/// Optional `--config` file; every block falls back to its defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    seed: Option<u64>,
    eps: Option<f64>,
    pipeline: Option<PipelineConfig>,
    synthetic: Option<SyntheticConfig>,
    train: Option<TrainOptions>,
}

struct Ctx {
    seed: u64,
    config: RunConfig,
    out: PathBuf,
    golden: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let config: RunConfig = match &cli.config {
        Some(p) => {
            require_file(p)?;
            serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    let ctx = Ctx { seed: cli.seed.or(config.seed).unwrap_or(0), config, out: cli.out, golden: cli.golden };
    match cli.command {
        Command::Lift { exponents } => cmd_lift(&ctx, &exponents),
        Command::Cycles { exponents, max_len } => cmd_cycles(&ctx, &exponents, max_len),
        Command::TsTable { files, bundled } => cmd_ts_table(&ctx, &files, bundled),
        Command::Beta(a) => cmd_beta(&ctx, &a),
        Command::Zeta(a) => cmd_zeta(&ctx, &a),
        Command::Embed(a) => cmd_embed(&ctx, &a),
        Command::Classify(a) => cmd_classify(&ctx, &a),
        Command::Ensemble(a) => cmd_ensemble(&ctx, &a),
        Command::Pipeline(a) => cmd_pipeline(&ctx, &a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    // A closed pipe (e.g. `| head`) is not an error for us.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn read_lift(path: &Path) -> Result<(MetProtograph, TannerGraph)> {
    require_file(path)?;
    let text = fs::read_to_string(path)?;
    let proto = MetProtograph::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let tanner = lift(&proto);
    Ok((proto, tanner))
}

fn histogram(values: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    values.iter().for_each(|&v| *h.entry(v).or_insert(0) += 1);
    h
}

#[derive(Serialize)]
struct LiftSummary {
    circulant_size: usize,
    family: Family,
    n_checks: usize,
    n_vars: usize,
    n: usize,
    m: usize,
    girth: Option<usize>,
    var_degrees: BTreeMap<usize, usize>,
    check_degrees: BTreeMap<usize, usize>,
}

fn cmd_lift(ctx: &Ctx, path: &Path) -> Result<bool> {
    let (proto, tanner) = read_lift(path)?;
    let out = OutDir::create(&ctx.out)?;
    let (a, d) = tanner.bipartite_adjacency();
    write_matrix_market(&a, out.writer("adjacency.mtx")?)?;
    write_matrix_market(&d, out.writer("degree.mtx")?)?;
    let summary = LiftSummary {
        circulant_size: proto.circulant_size(),
        family: tanner.family(),
        n_checks: tanner.n_checks(),
        n_vars: tanner.n_vars(),
        n: tanner.n_checks() + tanner.n_vars(),
        m: tanner.edges().len(),
        girth: girth(&tanner),
        var_degrees: histogram(&tanner.var_degrees()),
        check_degrees: histogram(&tanner.check_degrees()),
    };
    out.write_json("lift.json", &summary)?;
    print_json(&summary)?;
    Ok(true)
}

#[derive(Serialize)]
struct CycleSummary {
    girth: Option<usize>,
    max_len: usize,
    total: usize,
    by_length: BTreeMap<usize, usize>,
    ace_histogram: Vec<(usize, usize)>,
}

fn cmd_cycles(ctx: &Ctx, path: &Path, max_len: usize) -> Result<bool> {
    if max_len > MAX_CYCLE_LEN {
        bail!("--max-len {max_len} exceeds the supported {MAX_CYCLE_LEN}");
    }
    let (_, tanner) = read_lift(path)?;
    let cycles = enumerate_cycles(&tanner, max_len)?;
    let summary = CycleSummary {
        girth: girth(&tanner),
        max_len,
        total: cycles.len(),
        by_length: histogram(&cycles.iter().map(|c| c.len()).collect::<Vec<_>>()),
        ace_histogram: ace_histogram(&cycles, &tanner)?,
    };
    OutDir::create(&ctx.out)?.write_json("cycles.json", &summary)?;
    print_json(&summary)?;
    Ok(true)
}

#[derive(Serialize)]
struct TsRow {
    name: String,
    a: Option<usize>,
    b: Option<usize>,
    report: Option<InvariantReport>,
    error: Option<String>,
    golden: Option<Vec<CellCheck>>,
}

fn cmd_ts_table(ctx: &Ctx, files: &[PathBuf], bundled: bool) -> Result<bool> {
    let mut inputs: Vec<(String, Result<TrappingSet>)> = Vec::new();
    if bundled {
        for (name, ts) in bundled_trapping_sets() {
            inputs.push((name.to_string(), Ok(ts)));
        }
    }
    for f in files {
        let name = f.file_name().map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned());
        let ts = fs::read_to_string(f)
            .with_context(|| format!("reading {}", f.display()))
            .and_then(|t| TrappingSet::parse(&t).with_context(|| format!("parsing {}", f.display())));
        inputs.push((name, ts));
    }
    let table = GoldenTable::bundled();
    let mut ok = true;
    let mut rows = Vec::new();
    for (name, ts) in inputs {
        let result = ts.and_then(|ts| Ok((ts.a(), ts.b(), invariant_report(&ts)?)));
        let row = match result {
            Ok((a, b, report)) => {
                let golden = if ctx.golden {
                    match table.find(&name) {
                        Some(entry) => {
                            let checks = compare_golden(&report, entry)?;
                            for c in &checks {
                                let status = match (c.pass, c.advisory) {
                                    (true, _) => "PASS",
                                    (false, true) => "ADVISORY",
                                    (false, false) => "FAIL",
                                };
                                eprintln!("{name} {}: {status} (got {}, expected {} ± {})", c.field, c.got, c.expected, c.tol);
                                ok &= c.pass || c.advisory;
                            }
                            Some(checks)
                        }
                        None => {
                            eprintln!("{name}: no reference entry");
                            None
                        }
                    }
                } else {
                    None
                };
                TsRow { name, a: Some(a), b: Some(b), report: Some(report), error: None, golden }
            }
            Err(e) => {
                eprintln!("{name}: {e:#}");
                ok = false;
                TsRow { name, a: None, b: None, report: None, error: Some(format!("{e:#}")), golden: None }
            }
        };
        rows.push(row);
    }
    let out = OutDir::create(&ctx.out)?;
    out.write_json("ts_table.json", &rows)?;
    let mut w = csv::Writer::from_writer(out.writer("ts_table.csv")?);
    w.write_record(["name", "a", "b", "rho", "r_crit", "neg_modes_r1", "genus", "k0", "k1", "kervaire", "betti0", "betti1_mod2", "cycle_rank"])?;
    for row in &rows {
        if let (Some(r), Some(a), Some(b)) = (&row.report, row.a, row.b) {
            w.write_record([
                row.name.clone(),
                a.to_string(),
                b.to_string(),
                r.rho.to_string(),
                r.r_crit.to_string(),
                r.neg_modes_r1.to_string(),
                r.genus.to_string(),
                r.k0.to_string(),
                r.k1.to_string(),
                r.kervaire.to_string(),
                r.betti0.to_string(),
                r.betti1_mod2.to_string(),
                r.cycle_rank.to_string(),
            ])?;
        }
    }
    w.flush()?;
    print_json(&rows)?;
    Ok(ok)
}

enum Source {
    Unweighted(Graph),
    Weighted(CouplingGraph),
}

fn load_source(src: &GraphSource, seed: u64) -> Result<Source> {
    if let Some(p) = &src.edges {
        let list = read_edge_list(p)?;
        if list.edges.iter().any(|e| e.2.is_some()) {
            bail!("{}: weights found; use --couplings for weighted systems", p.display());
        }
        return Ok(Source::Unweighted(Graph::new(list.n, list.edges.iter().map(|&(u, v, _)| (u, v)))?));
    }
    if let Some(p) = &src.couplings {
        let list = read_edge_list(p)?;
        let edges: Vec<(usize, usize, f64)> = list
            .edges
            .iter()
            .map(|&(u, v, w)| w.map(|w| (u, v, w)).with_context(|| format!("{}: edge ({u}, {v}) has no coupling", p.display())))
            .collect::<Result<_>>()?;
        return Ok(Source::Weighted(CouplingGraph::new(list.n, edges)?));
    }
    if let Some(n) = src.regular {
        return Ok(Source::Unweighted(random_regular(n, src.degree, &mut ChaCha8Rng::seed_from_u64(seed))?));
    }
    if let Some(n) = src.complete {
        return Ok(Source::Unweighted(Graph::complete(n)));
    }
    if let Some(n) = src.cycle {
        return Ok(Source::Unweighted(Graph::cycle(n)?));
    }
    bail!("no graph given; use --edges, --couplings, --regular, --complete or --cycle")
}

#[derive(Serialize)]
struct BetaReport {
    n: usize,
    weighted: bool,
    bracket: (f64, f64),
    eps: f64,
    quadratic_newton: EstimatorTrace,
    bisection: EstimatorTrace,
    call_ratio: f64,
}

fn cmd_beta(ctx: &Ctx, args: &BetaArgs) -> Result<bool> {
    let (system, weighted) = match load_source(&args.source, ctx.seed)? {
        Source::Unweighted(g) => (System::from_graph(&g), false),
        Source::Weighted(j) => (System::Weighted(j), true),
    };
    let (lo, hi) = match (args.lo, args.hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        (None, None) => match system.default_bracket() {
            Some(b) => b,
            None => expand_bracket(&system, 0.05, 1e-10).context("searching for a sign change of λ_min")?,
        },
        _ => bail!("give both --lo and --hi or neither"),
    };
    let eps = args.eps.or(ctx.config.eps).unwrap_or(1e-6);
    let cfg = EstimatorConfig::new(lo, hi).with_eps(eps);
    let qn = estimate_beta_n(&system, &cfg).context("quadratic–Newton estimator")?;
    let bi = bisection_with(&system, &cfg).context("bisection baseline")?;
    let report = BetaReport {
        n: system.n(),
        weighted,
        bracket: (lo, hi),
        eps,
        call_ratio: bi.eigensolver_calls as f64 / qn.eigensolver_calls.max(1) as f64,
        quadratic_newton: qn,
        bisection: bi,
    };
    let out = OutDir::create(&ctx.out)?;
    out.write_json("beta.json", &report)?;
    if let Some(points) = args.curve_points {
        let curve = lambda_curve(&system, &linear_grid(lo, hi, points), cfg.lanczos_tol)?;
        write_lambda_curve(&curve, out.writer("lambda_curve.csv")?)?;
    }
    println!(
        "beta_N = {:.9} (quadratic–Newton, {} calls), {:.9} (bisection, {} calls), ratio {:.2}",
        report.quadratic_newton.beta_n,
        report.quadratic_newton.eigensolver_calls,
        report.bisection.beta_n,
        report.bisection.eigensolver_calls,
        report.call_ratio
    );
    Ok(true)
}

fn cmd_zeta(ctx: &Ctx, args: &ZetaArgs) -> Result<bool> {
    let g = match load_source(&args.source, ctx.seed)? {
        Source::Unweighted(g) => g,
        Source::Weighted(j) => j.graph(),
    };
    let grid = linear_grid(args.beta_max / args.steps as f64, args.beta_max, args.steps);
    let report = zeta_report(&g, &args.u, args.j0, &grid)?;
    OutDir::create(&ctx.out)?.write_json("zeta.json", &report)?;
    print_json(&report)?;
    Ok(true)
}

fn cmd_embed(ctx: &Ctx, args: &EmbedArgs) -> Result<bool> {
    require_file(&args.features)?;
    let mut ft = read_features(&args.features, args.sidecar.as_deref())?;
    if args.binarize {
        ft = qcising::embed::binarize(&ft);
    }
    if let Some(s) = args.select {
        ft = ft.select_cols(&union_indices(&select_indices(&ft, s, args.index_mode.into())?))?;
    }
    let base = similarity_graph(&ft, args.gamma, args.top_p)?;
    let (j, graph_id) = match args.overlay {
        Overlay::None => (base, "kernel".to_string()),
        Overlay::Spherical | Overlay::Toroidal => {
            let family = if matches!(args.overlay, Overlay::Spherical) { Family::Spherical } else { Family::Toroidal };
            let pairs = qc_overlay(ft.rows(), family, ctx.seed)?;
            (overlay_graph(&base, &ft, args.gamma, &pairs)?, format!("kernel+{}", family.name()))
        }
    };
    let (lo, hi) = expand_bracket(&System::Weighted(j.clone()), 0.05, 1e-10).context("searching for a sign change of λ_min")?;
    let cfg = EstimatorConfig::new(lo, hi).with_eps(args.eps);
    let mut emb = spectral_embed(&j, &cfg, &EmbedOptions { skip_first: args.skip_first, ..EmbedOptions::new(args.r) })?;
    emb.graph_id = graph_id;
    let out = OutDir::create(&ctx.out)?;
    emb.write_csv(out.writer("embedding.csv")?, ft.labels())?;
    let meta = serde_json::json!({
        "graph_id": emb.graph_id,
        "beta_n_used": emb.beta_n_used,
        "r": emb.r(),
        "n": j.n(),
        "edges": j.edges().len(),
        "features": ft.cols(),
    });
    out.write_json("embedding.json", &meta)?;
    print_json(&meta)?;
    Ok(true)
}

fn read_embedding(path: &Path) -> Result<FeatureTable> {
    require_file(path)?;
    read_features(path, None)
}

fn cmd_classify(ctx: &Ctx, args: &ClassifyArgs) -> Result<bool> {
    let emb = read_embedding(&args.embedding)?;
    let labels = emb.labels().context("embedding CSV has no label column")?.to_vec();
    let (train, test) = stratified_split(&labels, args.test_fraction, ctx.seed)?;
    let rows: Vec<Vec<f64>> = (0..emb.rows()).map(|i| emb.row(i).to_vec()).collect();
    let x_train: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let opts = TrainOptions { seed: ctx.seed, ..ctx.config.train.clone().unwrap_or_default() };
    let model = train_linear(&x_train, &y_train, &opts)?;
    let mut is_test = vec![false; rows.len()];
    test.iter().for_each(|&i| is_test[i] = true);
    let posts: Vec<PosteriorRow> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(PosteriorRow {
                row: i,
                split: if is_test[i] { "test" } else { "train" }.into(),
                label: Some(labels[i]),
                probs: model.predict(r)?,
            })
        })
        .collect::<Result<_>>()?;
    let out = OutDir::create(&ctx.out)?;
    out.write_json("model.json", &model)?;
    write_posteriors(&out.path("posteriors.csv"), &posts)?;
    if args.arbiter_pairs > 0 {
        let pairs = closest_class_pairs(&x_train, &y_train, args.arbiter_pairs);
        let arb = arbiter_train(&x_train, &y_train, &pairs, &Default::default())?;
        out.write_json("arbiter.json", &arb)?;
    }
    let k = model.n_classes;
    let pred: Vec<usize> = test.iter().map(|&i| argmax(&posts[i].probs)).collect();
    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let metrics = if test.is_empty() { None } else { Some(evaluate(&truth, &pred, k)?) };
    let summary = serde_json::json!({ "n_train": train.len(), "n_test": test.len(), "metrics": metrics });
    out.write_json("classify.json", &summary)?;
    print_json(&summary)?;
    Ok(true)
}

fn cmd_ensemble(ctx: &Ctx, args: &EnsembleArgs) -> Result<bool> {
    let tables: Vec<Vec<PosteriorRow>> = args.posteriors.iter().map(|p| read_posteriors(p)).collect::<Result<_>>()?;
    let n = tables[0].len();
    if tables.iter().any(|t| t.len() != n) {
        bail!("posterior tables have different row counts");
    }
    let arbiter: Option<(Arbiter, FeatureTable)> = match (&args.arbiter, &args.embedding) {
        (Some(a), Some(e)) => {
            require_file(a)?;
            let arb: Arbiter = serde_json::from_str(&fs::read_to_string(a)?).with_context(|| format!("parsing {}", a.display()))?;
            Some((arb, read_embedding(e)?))
        }
        _ => None,
    };
    let cfg = EnsembleConfig { mode: args.mode.into(), margin_threshold: args.margin };
    let out = OutDir::create(&ctx.out)?;
    let mut w = csv::Writer::from_writer(out.writer("decisions.csv")?);
    w.write_record(["row", "split", "label", "class", "rule"])?;
    let (mut truth, mut pred) = (Vec::new(), Vec::new());
    let mut k = 0;
    for t in 0..n {
        let rows = [&tables[0][t], &tables[1][t], &tables[2][t]];
        if rows.iter().any(|r| r.row != rows[0].row) {
            bail!("row {t}: tables disagree on the sample index");
        }
        k = k.max(rows[0].probs.len());
        let decide = |a: usize, b: usize| {
            arbiter.as_ref().and_then(|(arb, emb)| arb.decide(emb.row(rows[0].row), a, b)).unwrap_or(a)
        };
        let arb_fn: Option<&dyn Fn(usize, usize) -> usize> = arbiter.as_ref().map(|_| &decide as _);
        let d = ensemble_decide([&rows[0].probs, &rows[1].probs, &rows[2].probs], &cfg, arb_fn)?;
        let rule = serde_json::to_value(d.rule)?.as_str().unwrap_or_default().to_string();
        w.write_record([
            rows[0].row.to_string(),
            rows[0].split.clone(),
            rows[0].label.map_or(String::new(), |l| l.to_string()),
            d.class.to_string(),
            rule,
        ])?;
        if let (Some(l), "test") = (rows[0].label, rows[0].split.as_str()) {
            truth.push(l);
            pred.push(d.class);
        }
    }
    w.flush()?;
    let metrics = if truth.is_empty() { None } else { Some(evaluate(&truth, &pred, k)?) };
    let summary = serde_json::json!({ "rows": n, "scored": truth.len(), "metrics": metrics });
    out.write_json("ensemble.json", &summary)?;
    print_json(&summary)?;
    Ok(true)
}

fn cmd_pipeline(ctx: &Ctx, args: &PipelineArgs) -> Result<bool> {
    let ft = match &args.features {
        Some(p) => {
            require_file(p)?;
            read_features(p, args.sidecar.as_deref())?
        }
        None => synthetic_blobs(&SyntheticConfig { seed: ctx.seed, ..ctx.config.synthetic.clone().unwrap_or_default() })?,
    };
    let mut cfg = ctx.config.pipeline.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(r) = args.r {
        cfg.r = r;
    }
    if let Some(m) = args.mode {
        cfg.ensemble.mode = m.into();
    }
    if let Some(t) = args.margin {
        cfg.ensemble.margin_threshold = t;
    }
    if let Some(f) = args.test_fraction {
        cfg.test_fraction = f;
    }
    if let Some(eps) = ctx.config.eps {
        cfg.eps = eps;
    }
    let result = run_pipeline(&ft, &cfg)?;
    let out = OutDir::create(&ctx.out)?;
    out.write_json("report.json", &result.report)?;
    out.write_json("model.json", &result.model)?;
    result.report.metrics.write_confusion_csv(out.writer("confusion.csv")?)?;
    result.report.metrics.write_class_table_csv(out.writer("class_metrics.csv")?)?;
    for (g, emb) in result.embeddings.iter().enumerate() {
        emb.write_csv(out.writer(&format!("embedding_g{g}.csv"))?, ft.labels())?;
    }
    let r = &result.report;
    for g in &r.graphs {
        println!("{}: beta_N = {:.6}, test accuracy {:.4}", g.graph_id, g.beta_n, g.test_accuracy);
    }
    println!(
        "majority {:.4}, soft {:.4}, configured ensemble {:.4} ({} arbiter calls)",
        r.majority_accuracy, r.soft_accuracy, r.metrics.accuracy, r.arbiter_invocations
    );
    Ok(true)
}
