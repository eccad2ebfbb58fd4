//! Bethe–Hessian matrices and estimation of the Nishimori temperature as the
//! root of `β ↦ λ_min(H_β)`.
//!
//! [`estimate_beta_n`] fits a quadratic through three trial points, takes a
//! root of the fit, and applies one forward-difference Newton step per round.
//! [`bisection_baseline`] is the reference it is measured against; both count
//! every smallest-eigenvalue evaluation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbim::CouplingGraph;
use crate::sparse::{lambda_min_with, LanczosOptions, SparseSym};

/// `tanh²(βJ)` at or above this value is treated as saturated.
pub const SATURATION: f64 = 1.0 - 1e-12;

/// Weighted Bethe–Hessian: diagonal `1 + Σ_k t²/(1-t²)`, off-diagonal
/// `-t/(1-t²)`, with `t = tanh(β J_ij)`.
pub fn bethe_hessian_weighted(j: &CouplingGraph, beta: f64) -> Result<SparseSym> {
    let n = j.n();
    let mut diag = vec![1.0; n];
    let mut trip = Vec::with_capacity(j.edges().len() + n);
    for &(a, b, w) in j.edges() {
        let t = (beta * w).tanh();
        let t2 = t * t;
        if t2 >= SATURATION {
            return Err(Error::Saturated { i: a, j: b, tanh2: t2 });
        }
        let q = 1.0 - t2;
        diag[a] += t2 / q;
        diag[b] += t2 / q;
        trip.push((a, b, -t / q));
    }
    trip.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    SparseSym::from_triplets(n, trip)
}

/// `B_β = (β² - 1) I - β A + D`.
pub fn bethe_hessian_unweighted(a: &SparseSym, d: &SparseSym, beta: f64) -> Result<SparseSym> {
    if a.n() != d.n() {
        return Err(Error::DimensionMismatch(format!("A is {0} x {0}, D is {1} x {1}", a.n(), d.n())));
    }
    if !d.is_diagonal() {
        return Err(Error::invalid("degree matrix must be diagonal"));
    }
    d.add_scaled(a, -beta).map(|m| m.shifted(beta * beta - 1.0))
}

/// Family of matrices whose smallest eigenvalue is tracked in `β`.
#[derive(Debug, Clone)]
pub enum System {
    Unweighted { a: SparseSym, d: SparseSym },
    Weighted(CouplingGraph),
}

impl System {
    /// Unweighted system of a graph's adjacency.
    pub fn from_graph(g: &crate::graph::Graph) -> Self {
        System::Unweighted { a: g.adjacency(), d: g.degree_matrix() }
    }

    pub fn hessian(&self, beta: f64) -> Result<SparseSym> {
        match self {
            System::Unweighted { a, d } => bethe_hessian_unweighted(a, d, beta),
            System::Weighted(j) => bethe_hessian_weighted(j, beta),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            System::Unweighted { a, .. } => a.n(),
            System::Weighted(j) => j.n(),
        }
    }

    /// Default unweighted bracket `[1 + 1e-6, 2 sqrt(max degree)]`.
    pub fn default_bracket(&self) -> Option<(f64, f64)> {
        match self {
            System::Unweighted { d, .. } => {
                let dmax = d.diag().into_iter().fold(0.0, f64::max);
                Some((1.0 + 1e-6, 2.0 * dmax.sqrt()))
            }
            System::Weighted(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub beta_lower: f64,
    pub beta_upper: f64,
    /// Root tolerance on `λ_min`.
    pub eps: f64,
    /// Finite-difference step; `None` uses `1e-3 β̃`.
    pub delta: Option<f64>,
    pub max_rounds: usize,
    /// Residual tolerance handed to the eigensolver.
    pub lanczos_tol: f64,
}

impl EstimatorConfig {
    pub fn new(beta_lower: f64, beta_upper: f64) -> Self {
        Self { beta_lower, beta_upper, eps: 1e-6, delta: None, max_rounds: 50, lanczos_tol: 1e-10 }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_lower > 0.0 && self.beta_lower < self.beta_upper && self.beta_upper.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < beta_lower < beta_upper, got [{}, {}]",
                self.beta_lower, self.beta_upper
            )));
        }
        if !(self.eps > 0.0) || self.delta.is_some_and(|d| !(d > 0.0)) || !(self.lanczos_tol > 0.0) {
            return Err(Error::invalid("eps, delta and lanczos_tol must be positive"));
        }
        Ok(())
    }
}

/// Irregular events within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundFlag {
    /// Negative discriminant; the round took a bisection step.
    NegativeDiscriminant,
    /// Degenerate fit (`a ≈ 0`); the linear root was used.
    LinearFit,
    /// The `-√` root left the sign bracket and the `+√` root was inside it.
    OtherRoot,
    /// Neither root inside the sign bracket; clamped to its midpoint.
    ClampedToMidpoint,
    /// Newton step left the sign bracket; replaced by its midpoint.
    NewtonClamped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Round {
    /// `(β, λ_min)` pairs in ascending `β`.
    pub points: Vec<(f64, f64)>,
    /// Quadratic coefficients `(a, b, c)` when a fit was made.
    pub fit: Option<(f64, f64, f64)>,
    pub beta_tilde: f64,
    pub lambda_tilde: f64,
    pub newton: Option<f64>,
    pub flags: Vec<RoundFlag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorTrace {
    pub beta_n: f64,
    pub lambda_at_root: f64,
    pub eigensolver_calls: usize,
    pub rounds: Vec<Round>,
    pub converged: bool,
}

/// Counts eigensolver calls and keeps the tightest sign bracket seen.
struct Evaluator<'a> {
    system: &'a System,
    opts: LanczosOptions,
    calls: usize,
    /// `(β, λ)` with `λ(lo) · λ(hi) < 0`.
    lo: (f64, f64),
    hi: (f64, f64),
    best: (f64, f64),
}

impl<'a> Evaluator<'a> {
    fn new(system: &'a System, lanczos_tol: f64) -> Self {
        Self {
            system,
            opts: LanczosOptions::with_tol(lanczos_tol),
            calls: 0,
            lo: (f64::NAN, f64::NAN),
            hi: (f64::NAN, f64::NAN),
            best: (f64::NAN, f64::INFINITY),
        }
    }

    fn eval(&mut self, beta: f64) -> Result<f64> {
        let lam = lambda_min_with(&self.system.hessian(beta)?, &self.opts)?;
        self.calls += 1;
        if lam.abs() < self.best.1.abs() {
            self.best = (beta, lam);
        }
        if !self.lo.0.is_nan() && beta > self.lo.0 && beta < self.hi.0 {
            if lam.signum() == self.lo.1.signum() {
                self.lo = (beta, lam);
            } else {
                self.hi = (beta, lam);
            }
        }
        Ok(lam)
    }

    /// Evaluates both ends and checks for opposite signs.
    fn open(&mut self, lo: f64, hi: f64) -> Result<()> {
        let f_lo = self.eval(lo)?;
        let f_hi = self.eval(hi)?;
        if f_lo.signum() == f_hi.signum() || f_lo == 0.0 || f_hi == 0.0 {
            return Err(Error::NoBracket { lo, hi, f_lo, f_hi });
        }
        self.lo = (lo, f_lo);
        self.hi = (hi, f_hi);
        Ok(())
    }

    fn inside(&self, beta: f64) -> bool {
        beta > self.lo.0 && beta < self.hi.0
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.lo.0 + self.hi.0)
    }
}

/// Exact quadratic through three points, as `(a, b, c)` of `a β² + b β + c`.
pub fn fit_quadratic(p: [(f64, f64); 3]) -> (f64, f64, f64) {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    let b = d01 - a * (x0 + x1);
    let c = y0 - a * x0 * x0 - b * x0;
    (a, b, c)
}

/// Quadratic–Newton root of `λ_min(β) = 0` inside `[beta_lower, beta_upper]`.
///
/// Each round fits `a β² + b β + c` through three points and takes the root
/// `(-b - √(b² - 4ac)) / 2a`. Because that root can be the one outside the
/// sign bracket (for convex `λ_min` it is the lower one), the `+√` root is
/// used when it alone lies inside, and the bracket midpoint when neither
/// does; the round is flagged in both cases. If `|λ(β̃)| ≥ eps` one Newton step
/// is taken and the next window, of a quarter of the previous width, is
/// centred on it. The centre is evaluated first and accepted if within `eps`.
pub fn estimate_beta_n(system: &System, cfg: &EstimatorConfig) -> Result<EstimatorTrace> {
    cfg.validate()?;
    let mut ev = Evaluator::new(system, cfg.lanczos_tol);
    ev.open(cfg.beta_lower, cfg.beta_upper)?;
    let mut rounds = Vec::new();
    let mut width = cfg.beta_upper - cfg.beta_lower;
    let mut center = 0.5 * (cfg.beta_lower + cfg.beta_upper);

    for round in 0..cfg.max_rounds {
        let mut flags = Vec::new();
        let points: [(f64, f64); 3] = if round == 0 {
            let (lo, hi) = (ev.lo, ev.hi);
            let mid = ev.eval(center)?;
            [lo, (center, mid), hi]
        } else {
            let f_c = ev.eval(center)?;
            if f_c.abs() < cfg.eps {
                rounds.push(Round {
                    points: vec![(center, f_c)],
                    fit: None,
                    beta_tilde: center,
                    lambda_tilde: f_c,
                    newton: None,
                    flags,
                });
                return Ok(finish(ev, rounds, (center, f_c), true));
            }
            let left = (center - width / 4.0).max(cfg.beta_lower);
            let right = (center + width / 4.0).min(cfg.beta_upper);
            let f_l = ev.eval(left)?;
            let f_r = ev.eval(right)?;
            [(left, f_l), (center, f_c), (right, f_r)]
        };
        width = points[2].0 - points[0].0;

        let (a, b, c) = fit_quadratic(points);
        let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max) / (width * width).max(f64::MIN_POSITIVE);
        let disc = b * b - 4.0 * a * c;
        let beta_tilde = if a.abs() <= 1e-12 * scale {
            flags.push(RoundFlag::LinearFit);
            let r = -c / b;
            if r.is_finite() && ev.inside(r) {
                r
            } else {
                flags.push(RoundFlag::ClampedToMidpoint);
                ev.midpoint()
            }
        } else if disc < 0.0 {
            flags.push(RoundFlag::NegativeDiscriminant);
            ev.midpoint()
        } else {
            let sq = disc.sqrt();
            let r1 = (-b - sq) / (2.0 * a);
            let r2 = (-b + sq) / (2.0 * a);
            if ev.inside(r1) {
                r1
            } else if ev.inside(r2) {
                flags.push(RoundFlag::OtherRoot);
                r2
            } else {
                flags.push(RoundFlag::ClampedToMidpoint);
                ev.midpoint()
            }
        };

        let f_t = ev.eval(beta_tilde)?;
        let mut rec = Round {
            points: points.to_vec(),
            fit: Some((a, b, c)),
            beta_tilde,
            lambda_tilde: f_t,
            newton: None,
            flags,
        };
        if f_t.abs() < cfg.eps {
            rounds.push(rec);
            return Ok(finish(ev, rounds, (beta_tilde, f_t), true));
        }
        let delta = cfg.delta.unwrap_or(1e-3 * beta_tilde);
        let f_d = ev.eval(beta_tilde + delta)?;
        let g = (f_d - f_t) / delta;
        let mut next = beta_tilde - f_t / g;
        if !next.is_finite() || !ev.inside(next) {
            rec.flags.push(RoundFlag::NewtonClamped);
            next = ev.midpoint();
        }
        rec.newton = Some(next);
        rounds.push(rec);
        center = next;
    }
    let best = ev.best;
    Ok(finish(ev, rounds, best, false))
}

fn finish(ev: Evaluator<'_>, rounds: Vec<Round>, root: (f64, f64), converged: bool) -> EstimatorTrace {
    EstimatorTrace { beta_n: root.0, lambda_at_root: root.1, eigensolver_calls: ev.calls, rounds, converged }
}

/// Bisection on the sign of `λ_min` until `|λ_min| < eps`. A bracket
/// narrower than `eps` is answered by one evaluation at its midpoint.
pub fn bisection_baseline(system: &System, beta_lower: f64, beta_upper: f64, eps: f64) -> Result<EstimatorTrace> {
    bisection_with(system, &EstimatorConfig { eps, ..EstimatorConfig::new(beta_lower, beta_upper) })
}

pub fn bisection_with(system: &System, cfg: &EstimatorConfig) -> Result<EstimatorTrace> {
    cfg.validate()?;
    let mut ev = Evaluator::new(system, cfg.lanczos_tol);
    let mut rounds = Vec::new();
    if cfg.beta_upper - cfg.beta_lower < cfg.eps {
        let mid = 0.5 * (cfg.beta_lower + cfg.beta_upper);
        let f = ev.eval(mid)?;
        rounds.push(single(mid, f));
        return Ok(finish(ev, rounds, (mid, f), f.abs() < cfg.eps));
    }
    ev.open(cfg.beta_lower, cfg.beta_upper)?;
    // 200 halvings exhaust f64 resolution on any bracket
    for _ in 0..200 {
        let mid = ev.midpoint();
        if mid <= ev.lo.0 || mid >= ev.hi.0 {
            break;
        }
        let f = ev.eval(mid)?;
        rounds.push(single(mid, f));
        if f.abs() < cfg.eps {
            return Ok(finish(ev, rounds, (mid, f), true));
        }
    }
    let best = ev.best;
    Ok(finish(ev, rounds, best, false))
}

fn single(beta: f64, lam: f64) -> Round {
    Round { points: vec![(beta, lam)], fit: None, beta_tilde: beta, lambda_tilde: lam, newton: None, flags: Vec::new() }
}

/// Scans `steps + 1` equally spaced `β` in `[beta_min, beta_max]` and
/// returns the bracket around the last sign change of `λ_min`, together
/// with the number of eigensolver calls spent.
pub fn scan_bracket(
    system: &System,
    beta_min: f64,
    beta_max: f64,
    steps: usize,
    lanczos_tol: f64,
) -> Result<((f64, f64), usize)> {
    if !(beta_min > 0.0 && beta_min < beta_max) || steps == 0 {
        return Err(Error::invalid(format!("bad scan range [{beta_min}, {beta_max}] with {steps} steps")));
    }
    let opts = LanczosOptions::with_tol(lanczos_tol);
    let mut prev: Option<(f64, f64)> = None;
    let mut found = None;
    let mut calls = 0;
    for k in 0..=steps {
        let beta = beta_min + (beta_max - beta_min) * k as f64 / steps as f64;
        let lam = match system.hessian(beta) {
            Ok(h) => lambda_min_with(&h, &opts)?,
            Err(Error::Saturated { .. }) => break,
            Err(e) => return Err(e),
        };
        calls += 1;
        if let Some((b0, l0)) = prev {
            if l0.signum() != lam.signum() {
                found = Some((b0, beta));
            }
        }
        prev = Some((beta, lam));
    }
    let f_end = prev.map_or(f64::NAN, |p| p.1);
    found.map(|b| (b, calls)).ok_or(Error::NoBracket { lo: beta_min, hi: beta_max, f_lo: f64::NAN, f_hi: f_end })
}

/// Doubles `β` from `beta_start` until `λ_min` changes sign or the couplings
/// saturate. Returns the last bracket found.
pub fn expand_bracket(system: &System, beta_start: f64, lanczos_tol: f64) -> Result<(f64, f64)> {
    if !(beta_start > 0.0) {
        return Err(Error::invalid(format!("beta_start must be positive, got {beta_start}")));
    }
    let opts = LanczosOptions::with_tol(lanczos_tol);
    let f0 = lambda_min_with(&system.hessian(beta_start)?, &opts)?;
    let mut lo = beta_start;
    let mut beta = beta_start;
    for _ in 0..60 {
        beta *= 2.0;
        let lam = match system.hessian(beta) {
            Ok(h) => lambda_min_with(&h, &opts)?,
            Err(Error::Saturated { .. }) => break,
            Err(e) => return Err(e),
        };
        if lam.signum() != f0.signum() {
            return Ok((lo, beta));
        }
        lo = beta;
    }
    Err(Error::NoBracket { lo: beta_start, hi: beta, f_lo: f0, f_hi: f64::NAN })
}

/// `λ_min(β)` at each requested `β`.
pub fn lambda_curve(system: &System, betas: &[f64], lanczos_tol: f64) -> Result<Vec<(f64, f64)>> {
    let opts = LanczosOptions::with_tol(lanczos_tol);
    betas.iter().map(|&b| Ok((b, lambda_min_with(&system.hessian(b)?, &opts)?))).collect()
}

/// Writes a `beta,lambda_min` CSV series.
pub fn write_lambda_curve<W: Write>(curve: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "lambda_min"])?;
    for (b, l) in curve {
        w.write_record([b.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_connected, random_regular, Graph};
    use crate::rbim::sample_nishimori_pm;
    use crate::sparse::eig_dense;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weighted_examples() {
        let j = CouplingGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let h = bethe_hessian_weighted(&j, 1.0).unwrap();
        let t = 1f64.tanh();
        assert_abs_diff_eq!(h.get(0, 0), 1.0 + t * t / (1.0 - t * t), epsilon = 1e-15);
        assert_abs_diff_eq!(h.get(0, 0), 2.3811, epsilon = 1e-4);
        assert_abs_diff_eq!(h.get(0, 1), -1.8134, epsilon = 1e-4);
        let flipped = bethe_hessian_weighted(&CouplingGraph::new(2, [(0, 1, -1.0)]).unwrap(), 1.0).unwrap();
        assert_eq!(flipped.get(0, 1), -h.get(0, 1));
        assert_eq!(flipped.get(1, 1), h.get(1, 1));
        let g = Graph::complete(5);
        let jj = CouplingGraph::uniform(&g, 0.7).unwrap();
        let small = bethe_hessian_weighted(&jj, 1e-9).unwrap();
        assert!(small.add_scaled(&SparseSym::identity(5), -1.0).unwrap().norm_inf() < 1e-8);
        assert!(matches!(bethe_hessian_weighted(&jj, 40.0), Err(Error::Saturated { .. })));
    }

    #[test]
    fn unweighted_examples() {
        let g = Graph::complete(4);
        let (a, d) = (g.adjacency(), g.degree_matrix());
        let lap = d.add_scaled(&a, -1.0).unwrap();
        assert_eq!(bethe_hessian_unweighted(&a, &d, 1.0).unwrap(), lap);
        assert_eq!(bethe_hessian_unweighted(&a, &d, 0.0).unwrap(), d.shifted(-1.0));
        let h = bethe_hessian_unweighted(&a, &d, 2.0).unwrap();
        assert_abs_diff_eq!(eig_dense(&h).unwrap().min().unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_fit_is_exact() {
        let f = |x: f64| 2.0 * x * x - 3.0 * x + 0.5;
        let (a, b, c) = fit_quadratic([(0.3, f(0.3)), (1.1, f(1.1)), (2.0, f(2.0))]);
        assert_abs_diff_eq!(a, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn k4_root() {
        let sys = System::from_graph(&Graph::complete(4));
        let qn = estimate_beta_n(&sys, &EstimatorConfig::new(1.5, 3.0)).unwrap();
        assert!(qn.converged);
        assert_abs_diff_eq!(qn.beta_n, 2.0, epsilon = 1e-4);
        let bi = bisection_baseline(&sys, 1.5, 3.0, 1e-6).unwrap();
        assert_abs_diff_eq!(bi.beta_n, 2.0, epsilon = 1e-4);
    }

    #[test]
    fn missing_bracket_is_reported_before_fitting() {
        let sys = System::from_graph(&Graph::complete(4));
        let err = estimate_beta_n(&sys, &EstimatorConfig::new(2.5, 3.0)).unwrap_err();
        assert!(matches!(err, Error::NoBracket { .. }));
        assert!(bisection_baseline(&sys, 2.5, 3.0, 1e-6).is_err());
    }

    #[test]
    fn narrow_bracket_costs_one_call() {
        let sys = System::from_graph(&Graph::complete(4));
        let t = bisection_baseline(&sys, 2.0 - 1e-8, 2.0 + 1e-8, 1e-6).unwrap();
        assert_eq!(t.eigensolver_calls, 1);
        assert!(t.converged);
    }

    #[test]
    fn regular_graph_matches_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_regular(100, 3, &mut rng).unwrap();
        let sys = System::from_graph(&g);
        let (lo, hi) = sys.default_bracket().unwrap();
        let cfg = EstimatorConfig::new(lo, hi);
        let qn = estimate_beta_n(&sys, &cfg).unwrap();
        let bi = bisection_baseline(&sys, lo, hi, cfg.eps).unwrap();
        assert!(qn.converged && bi.converged);
        assert!((qn.beta_n - bi.beta_n).abs() <= 2.0 * cfg.eps, "{} vs {}", qn.beta_n, bi.beta_n);
        assert!(3 * qn.eigensolver_calls <= bi.eigensolver_calls, "{} vs {}", qn.eigensolver_calls, bi.eigensolver_calls);
    }

    #[test]
    fn pm_nishimori_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_regular(400, 3, &mut rng).unwrap();
        let (j, truth) = sample_nishimori_pm(&g, 0.1, 3).unwrap();
        let sys = System::Weighted(j);
        let ((lo, hi), _) = scan_bracket(&sys, 0.05, 3.0, 60, 1e-10).unwrap();
        let t = estimate_beta_n(&sys, &EstimatorConfig::new(lo, hi)).unwrap();
        assert!(t.converged);
        eprintln!("recovered {} truth {truth}", t.beta_n);
    }

    #[test]
    fn trace_points_ascending() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_connected(60, 0.06, &mut rng).unwrap();
        let sys = System::from_graph(&g);
        let (lo, hi) = sys.default_bracket().unwrap();
        if let Ok(t) = estimate_beta_n(&sys, &EstimatorConfig::new(lo, hi)) {
            for r in &t.rounds {
                assert!(r.points.windows(2).all(|w| w[0].0 <= w[1].0));
            }
            assert!(!t.converged || t.lambda_at_root.abs() < 1e-6);
        }
    }

    #[test]
    fn curve_csv() {
        let sys = System::from_graph(&Graph::complete(4));
        let curve = lambda_curve(&sys, &[1.0, 2.0], 1e-10).unwrap();
        let mut buf = Vec::new();
        write_lambda_curve(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("beta,lambda_min\n1,"));
    }

    fn nb_radius(g: &Graph) -> f64 {
        let poles = crate::zeta::poles(g).unwrap();
        1.0 / poles.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min)
    }

    fn dense_lambda_min(g: &Graph, beta: f64) -> f64 {
        let h = bethe_hessian_unweighted(&g.adjacency(), &g.degree_matrix(), beta).unwrap();
        eig_dense(&h).unwrap().min().unwrap()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(40))]

        #[test]
        fn endpoints_bracket_the_root(seed in 0u64..10_000, n in 6usize..=20, p in 0.1f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_connected(n, p, &mut rng).unwrap();
            proptest::prop_assume!(2 * g.num_edges() > 2 * g.n());
            let rho = nb_radius(&g);
            proptest::prop_assert!(dense_lambda_min(&g, 1.0 + 1e-6) < 0.0);
            proptest::prop_assert!(dense_lambda_min(&g, rho + 0.1) > 0.0);
        }

        #[test]
        fn lambda_min_decreases_up_to_sqrt_radius(seed in 0u64..10_000, n in 6usize..=20, p in 0.1f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_connected(n, p, &mut rng).unwrap();
            proptest::prop_assume!(g.cycle_rank() > 1);
            let hi = nb_radius(&g).sqrt();
            let curve: Vec<f64> = (0..20).map(|k| dense_lambda_min(&g, 1.0 + (hi - 1.0) * k as f64 / 19.0)).collect();
            for w in curve.windows(2) {
                proptest::prop_assert!(w[1] <= w[0] + 1e-9, "{curve:?}");
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(20))]

        #[test]
        fn estimator_agrees_with_bisection(seed in 0u64..10_000, half_n in 10usize..=30, d in 3usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_regular(2 * half_n, d, &mut rng).unwrap();
            let sys = System::from_graph(&g);
            let (lo, hi) = sys.default_bracket().unwrap();
            let cfg = EstimatorConfig::new(lo, hi);
            let qn = estimate_beta_n(&sys, &cfg).unwrap();
            let bi = bisection_baseline(&sys, lo, hi, cfg.eps).unwrap();
            proptest::prop_assume!(qn.converged && bi.converged);
            proptest::prop_assert!((qn.beta_n - bi.beta_n).abs() <= 2.0 * cfg.eps, "{} vs {}", qn.beta_n, bi.beta_n);
        }
    }
}
