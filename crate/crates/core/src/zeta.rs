//! Non-backtracking operator, Ihara–Bass determinants and zeta poles.

use nalgebra::{linalg::Schur, Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nishimori::bethe_hessian_weighted;
use crate::rbim::CouplingGraph;

/// Edge cap for building the operator.
pub const NB_EDGE_CAP: usize = 500;
/// Edge cap for determinants and poles.
pub const DET_EDGE_CAP: usize = 200;
/// Pole deduplication and zero-eigenvalue threshold.
pub const POLE_TOL: f64 = 1e-8;

const SATURATION: f64 = 1e-12;
// Determinants below this fraction of the Hadamard bound carry no sign.
const DET_FLOOR: f64 = 1e-10;
const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 100_000;

/// Non-backtracking operator on directed edges.
#[derive(Debug, Clone)]
pub struct NonBacktracking {
    /// Directed edges `(u, v)` sorted lexicographically; the matrix is indexed
    /// in this order.
    pub directed: Vec<(usize, usize)>,
    /// `B[(u→v), (v→w)] = 1` iff `w ≠ u`.
    pub b: DMatrix<f64>,
}

pub fn non_backtracking(g: &Graph) -> Result<NonBacktracking> {
    if g.num_edges() > NB_EDGE_CAP {
        return Err(Error::TooLarge { n: g.num_edges(), cap: NB_EDGE_CAP });
    }
    let mut directed: Vec<(usize, usize)> = g.edges().iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
    directed.sort_unstable();
    let m = directed.len();
    let mut b = DMatrix::<f64>::zeros(m, m);
    for (row, &(u, v)) in directed.iter().enumerate() {
        for &w in g.neighbors(v) {
            if w != u {
                let col = directed.binary_search(&(v, w)).expect("edge present in both directions");
                b[(row, col)] = 1.0;
            }
        }
    }
    Ok(NonBacktracking { directed, b })
}

fn check_det_cap(g: &Graph) -> Result<()> {
    if g.num_edges() > DET_EDGE_CAP {
        return Err(Error::TooLarge { n: g.num_edges(), cap: DET_EDGE_CAP });
    }
    Ok(())
}

/// `det(I - u B)`, the reciprocal of the Ihara zeta function.
pub fn zeta_reciprocal(g: &Graph, u: f64) -> Result<f64> {
    check_det_cap(g)?;
    let nb = non_backtracking(g)?;
    let m = nb.b.nrows();
    Ok((DMatrix::<f64>::identity(m, m) - nb.b * u).determinant())
}

/// `I - u A + u² (D - I)`.
pub fn bass_matrix(g: &Graph, u: f64) -> DMatrix<f64> {
    let n = g.n();
    let mut m = DMatrix::<f64>::identity(n, n);
    for (v, d) in g.degrees().into_iter().enumerate() {
        m[(v, v)] += u * u * (d as f64 - 1.0);
    }
    for &(a, b) in g.edges() {
        m[(a, b)] -= u;
        m[(b, a)] -= u;
    }
    m
}

/// `(1 - u²)^{|E| - |V|} det(I - u A + u² (D - I))`.
pub fn bass_determinant(g: &Graph, u: f64) -> Result<f64> {
    let exp = g.num_edges() as i32 - g.n() as i32;
    Ok((1.0 - u * u).powi(exp) * bass_matrix(g, u).determinant())
}

/// `|det(I - uB) - (1 - u²)^{|E|-|V|} det(I - uA + u²(D - I))|`.
///
/// `I - uA + u²(D - I)` equals `(1 - u²) H(u)` for the Bethe–Hessian with
/// unit couplings at `tanh(β) = u`.
pub fn bass_identity_residual(g: &Graph, u: f64) -> Result<f64> {
    if (u.abs() - 1.0).abs() < f64::EPSILON {
        return Err(Error::invalid("the Bass identity is singular at u = ±1"));
    }
    Ok((zeta_reciprocal(g, u)? - bass_determinant(g, u)?).abs())
}

/// Ratio `det(I - uB) / ((1 - u²)^{|E|-|V|} det H(u))` with the Bethe–Hessian
/// itself in place of `(1 - u²) H(u)`. It equals `(1 - u²)^{|V|}`, not 1.
pub fn bethe_hessian_form_ratio(g: &Graph, u: f64) -> Result<f64> {
    if !(u.abs() < 1.0) {
        return Err(Error::invalid(format!("need |u| < 1, got {u}")));
    }
    let j = CouplingGraph::uniform(g, 1.0)?;
    let h = bethe_hessian_weighted(&j, u.atanh())?.to_dense();
    let exp = g.num_edges() as i32 - g.n() as i32;
    Ok(zeta_reciprocal(g, u)? / ((1.0 - u * u).powi(exp) * h.determinant()))
}

/// Vertices of the 2-core, in ascending order.
pub fn two_core(g: &Graph) -> Vec<usize> {
    let mut deg = g.degrees();
    let mut alive = vec![true; g.n()];
    let mut stack: Vec<usize> = (0..g.n()).filter(|&v| deg[v] < 2).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &w in g.neighbors(v) {
            if alive[w] {
                deg[w] -= 1;
                if deg[w] == 1 {
                    stack.push(w);
                }
            }
        }
    }
    (0..g.n()).filter(|&v| alive[v]).collect()
}

/// Reciprocals of the nonzero eigenvalues of `B`, deduplicated to
/// [`POLE_TOL`] and sorted by modulus then argument.
///
/// Directed edges in pendant trees only contribute nilpotent blocks, so the
/// eigenvalues are taken from the operator of the 2-core, where `B` is
/// invertible. This avoids the ill-conditioned zero eigenvalues of large
/// nilpotent blocks.
pub fn poles(g: &Graph) -> Result<Vec<Complex<f64>>> {
    check_det_cap(g)?;
    let core = g.induced(&two_core(g))?;
    if core.num_edges() == 0 {
        return Ok(Vec::new());
    }
    let nb = non_backtracking(&core)?;
    let schur = Schur::try_new(nb.b, SCHUR_EPS, SCHUR_MAX_ITER).ok_or(Error::NonConvergence { cap: SCHUR_MAX_ITER })?;
    let mut out: Vec<Complex<f64>> = Vec::new();
    for lam in schur.complex_eigenvalues().iter() {
        if lam.norm() < POLE_TOL {
            continue;
        }
        let p = lam.inv();
        if !out.iter().any(|q| (q - p).norm() < POLE_TOL) {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Crossing {
    /// Grid interval on which `det H` changed sign.
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// Refined sign change.
    pub beta: f64,
    pub u: f64,
    /// Nearest pole as `(re, im)`.
    pub pole: Option<(f64, f64)>,
    pub distance: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum CrossingReport {
    NoCrossing { poles: Vec<(f64, f64)> },
    Crossings { poles: Vec<(f64, f64)>, crossings: Vec<Crossing> },
}

impl CrossingReport {
    pub fn crossings(&self) -> &[Crossing] {
        match self {
            CrossingReport::NoCrossing { .. } => &[],
            CrossingReport::Crossings { crossings, .. } => crossings,
        }
    }
}

/// Pole-match tolerance in `u` for [`crossing_check`].
pub const MATCH_TOL: f64 = 1e-4;

/// Sweeps the sign of `det H(β)` (uniform coupling `j0`) over `beta_grid`,
/// refines every sign change by bisection, and matches `u = tanh(β j0)` to the
/// nearest pole.
///
/// The sign is read from `det((1 - u²) H) = det(I - uA + u²(D - I))`, which
/// stays well scaled as `u → ±1` where the entries of `H` diverge. The sweep
/// stops once `1 - u²` falls below the coupling saturation threshold, and
/// grid points whose determinant is at roundoff level are skipped.
pub fn crossing_check(g: &Graph, j0: f64, beta_grid: &[f64]) -> Result<CrossingReport> {
    if beta_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("beta grid must be strictly increasing"));
    }
    let pole_list = poles(g)?;
    let pole_pairs: Vec<(f64, f64)> = pole_list.iter().map(|p| (p.re, p.im)).collect();
    if !(j0.is_finite() && j0 != 0.0) {
        return Err(Error::invalid(format!("coupling must be finite and nonzero, got {j0}")));
    }
    let det = |beta: f64| -> Result<f64> {
        let u = (beta * j0).tanh();
        if 1.0 - u * u < SATURATION {
            return Err(Error::Saturated { i: 0, j: 0, tanh2: u * u });
        }
        let m = bass_matrix(g, u);
        let d = m.determinant();
        let hadamard: f64 = m.row_iter().map(|r| r.norm()).product();
        Ok(if d.abs() < DET_FLOOR * hadamard { 0.0 } else { d })
    };
    let mut crossings = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &beta in beta_grid {
        let d = match det(beta) {
            Ok(d) => d,
            Err(Error::Saturated { .. }) => break,
            Err(e) => return Err(e),
        };
        if d == 0.0 {
            continue;
        }
        if let Some((b0, d0)) = prev {
            if d0.signum() != d.signum() {
                let (mut lo, mut hi, mut f_lo) = (b0, beta, d0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let f = det(mid)?;
                    if f == 0.0 {
                        (lo, hi) = (mid, mid);
                        break;
                    }
                    if f.signum() == f_lo.signum() {
                        lo = mid;
                        f_lo = f;
                    } else {
                        hi = mid;
                    }
                }
                let beta_star = 0.5 * (lo + hi);
                let u = (beta_star * j0).tanh();
                let nearest = pole_list
                    .iter()
                    .map(|p| (p, (p - Complex::new(u, 0.0)).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                let (pole, distance) = match nearest {
                    Some((p, d)) => (Some((p.re, p.im)), d),
                    None => (None, f64::INFINITY),
                };
                crossings.push(Crossing {
                    beta_lo: b0,
                    beta_hi: beta,
                    beta: beta_star,
                    u,
                    pole,
                    distance,
                    matched: distance < MATCH_TOL,
                });
            }
        }
        prev = Some((beta, d));
    }
    Ok(if crossings.is_empty() {
        CrossingReport::NoCrossing { poles: pole_pairs }
    } else {
        CrossingReport::Crossings { poles: pole_pairs, crossings }
    })
}

/// Machine-readable zeta report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZetaReport {
    pub poles: Vec<(f64, f64)>,
    /// `(u, residual)` for each requested `u`.
    pub residual: Vec<(f64, f64)>,
    pub crossings: Vec<Crossing>,
}

pub fn zeta_report(g: &Graph, us: &[f64], j0: f64, beta_grid: &[f64]) -> Result<ZetaReport> {
    let residual = us.iter().map(|&u| Ok((u, bass_identity_residual(g, u)?))).collect::<Result<Vec<_>>>()?;
    let report = crossing_check(g, j0, beta_grid)?;
    let poles = match &report {
        CrossingReport::NoCrossing { poles } | CrossingReport::Crossings { poles, .. } => poles.clone(),
    };
    Ok(ZetaReport { poles, residual, crossings: report.crossings().to_vec() })
}

/// `count` equally spaced points in `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_connected;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn operator_shapes() {
        let e = non_backtracking(&Graph::path(2)).unwrap();
        assert_eq!(e.b, DMatrix::zeros(2, 2));
        let tri = non_backtracking(&Graph::cycle(3).unwrap()).unwrap();
        let ev = tri.b.complex_eigenvalues();
        assert_abs_diff_eq!(ev.iter().map(|c| c.norm()).fold(0.0, f64::max), 1.0, epsilon = 1e-12);
        assert_eq!(ev.iter().filter(|c| (*c - Complex::new(1.0, 0.0)).norm() < 1e-9).count(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = crate::graph::random_regular(20, 3, &mut rng).unwrap();
        let nb = non_backtracking(&g).unwrap();
        assert!(nb.b.row_iter().all(|r| r.sum() == 2.0));
    }

    #[test]
    fn trees_have_trivial_zeta() {
        let tree = Graph::new(6, [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)]).unwrap();
        for u in [0.0, 0.3, 0.9, -2.0] {
            assert_abs_diff_eq!(zeta_reciprocal(&tree, u).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert!(poles(&tree).unwrap().is_empty());
        assert!(matches!(crossing_check(&tree, 1.0, &linear_grid(0.05, 5.0, 50)).unwrap(), CrossingReport::NoCrossing { .. }));
        assert_abs_diff_eq!(zeta_reciprocal(&Graph::cycle(4).unwrap(), 0.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn triangle_against_cycle_product() {
        // a single cycle has exactly two primitive classes (both orientations)
        let u: f64 = 0.5;
        assert_abs_diff_eq!(zeta_reciprocal(&Graph::cycle(3).unwrap(), u).unwrap(), (1.0 - u.powi(3)).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn bass_identity_examples() {
        let tree = Graph::path(5);
        assert!(bass_identity_residual(&tree, 0.3).unwrap() < 1e-9);
        assert!(bass_identity_residual(&Graph::complete(4), 0.25).unwrap() < 1e-9);
        assert!(bass_identity_residual(&Graph::cycle(4).unwrap(), 0.5).unwrap() < 1e-9);
        assert!(bass_identity_residual(&Graph::cycle(4).unwrap(), 1.0).is_err());
    }

    #[test]
    fn bethe_hessian_form_is_off_by_vertex_factor() {
        let g = Graph::complete(4);
        let u: f64 = 0.3;
        assert_abs_diff_eq!(bethe_hessian_form_ratio(&g, u).unwrap(), (1.0 - u * u).powi(4), epsilon = 1e-12);
    }

    #[test]
    fn cycle_poles_on_unit_circle() {
        let p = poles(&Graph::cycle(4).unwrap()).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|z| (z.norm() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn core_poles_match_full_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_connected(9, 0.2, &mut rng).unwrap();
            let core_poles = poles(&g).unwrap();
            // every pole is a root of det(I - uB) on the full graph
            for p in &core_poles {
                let nb = non_backtracking(&g).unwrap();
                let m = nb.b.nrows();
                let mat = DMatrix::<Complex<f64>>::identity(m, m) - nb.b.map(|x| Complex::new(x, 0.0)) * *p;
                assert!(mat.determinant().norm() < 1e-6, "{p}");
            }
            assert_eq!(core_poles.iter().any(|p| p.norm() <= 1.0 + 1e-9), g.cycle_rank() > 0);
        }
    }

    #[test]
    fn k4_crossing_matches_pole() {
        let r = crossing_check(&Graph::complete(4), 1.0, &linear_grid(0.05, 3.0, 60)).unwrap();
        let c = r.crossings();
        assert!(!c.is_empty());
        assert!(c.iter().all(|x| x.matched));
        assert_abs_diff_eq!(c[0].u, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn four_cycle_has_no_interior_crossing() {
        let r = crossing_check(&Graph::cycle(4).unwrap(), 1.0, &linear_grid(0.05, 10.0, 200)).unwrap();
        assert!(matches!(r, CrossingReport::NoCrossing { .. }));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn bass_identity_on_random_graphs(seed in 0u64..10_000, n in 3usize..=12, p in 0.0f64..0.5, u in -0.9f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_connected(n, p, &mut rng).unwrap();
            let r = bass_identity_residual(&g, u).unwrap();
            proptest::prop_assert!(r < 1e-9, "residual {r}");
        }

        #[test]
        fn random_trees_have_unit_zeta(seed in 0u64..10_000, n in 2usize..=15, u in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_connected(n, 0.0, &mut rng).unwrap();
            proptest::prop_assert!((zeta_reciprocal(&g, u).unwrap() - 1.0).abs() < 1e-12);
            proptest::prop_assert!(poles(&g).unwrap().is_empty());
        }
    }
}
