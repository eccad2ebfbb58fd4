//! Greedy randomized search for circulant shifts with large girth and ACE.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cycles::{ace, enumerate_cycles, girth, MAX_CYCLE_LEN};
use super::protograph::MetProtograph;
use super::tanner::lift;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftTargets {
    pub min_girth: usize,
    pub min_ace: usize,
    pub restarts: usize,
    /// Hill-climbing proposals per restart.
    pub moves: usize,
}

impl LiftTargets {
    pub fn new(min_girth: usize, min_ace: usize) -> Self {
        Self { min_girth, min_ace, restarts: 8, moves: 300 }
    }
}

/// Outcome of [`optimize_lift`]. `satisfied == false` marks a best-effort result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftResult {
    pub protograph: MetProtograph,
    /// `None` when the lifted graph has no cycles.
    pub girth: Option<usize>,
    pub girth_cycles: usize,
    /// Smallest ACE among cycles shorter than `min_girth + 4`; `None` if there are none.
    pub min_ace: Option<usize>,
    pub satisfied: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Score {
    girth: usize,
    neg_count: i64,
    ace: usize,
}

struct Eval {
    score: Score,
    girth: Option<usize>,
    girth_cycles: usize,
    min_ace: Option<usize>,
}

fn evaluate(proto: &MetProtograph, targets: &LiftTargets) -> Result<Eval> {
    let g = lift(proto);
    let gi = girth(&g);
    let Some(gv) = gi else {
        return Ok(Eval {
            score: Score { girth: usize::MAX, neg_count: 0, ace: usize::MAX },
            girth: None,
            girth_cycles: 0,
            min_ace: None,
        });
    };
    if gv > MAX_CYCLE_LEN {
        // nothing short enough to enumerate; counts and ACE do not apply
        return Ok(Eval {
            score: Score { girth: gv, neg_count: 0, ace: usize::MAX },
            girth: gi,
            girth_cycles: 0,
            min_ace: None,
        });
    }
    let ace_len = (targets.min_girth + 2).min(MAX_CYCLE_LEN);
    let cycles = enumerate_cycles(&g, gv.max(ace_len))?;
    let girth_cycles = cycles.iter().filter(|c| c.len() == gv).count();
    let mut min_ace: Option<usize> = None;
    for c in cycles.iter().filter(|c| c.len() < targets.min_girth + 4) {
        let a = ace(c, &g)?;
        min_ace = Some(min_ace.map_or(a, |m| m.min(a)));
    }
    Ok(Eval {
        score: Score { girth: gv, neg_count: -(girth_cycles as i64), ace: min_ace.unwrap_or(usize::MAX) },
        girth: gi,
        girth_cycles,
        min_ace,
    })
}

fn satisfied(e: &Eval, t: &LiftTargets) -> bool {
    e.girth.is_none_or(|g| g >= t.min_girth) && e.min_ace.is_none_or(|a| a >= t.min_ace)
}

fn random_cells(base: &[Vec<usize>], l: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<usize>>> {
    base.iter()
        .map(|row| row.iter().map(|&m| sample(rng, l, m).into_vec()).collect())
        .collect()
}

/// Searches shifts for the base matrix `base` (entry = number of circulants
/// in the cell) at circulant size `l`. The objective is lexicographic:
/// girth, then fewer girth-length cycles, then larger minimum ACE. Restarts
/// are seeded from `seed` and ties go to the earliest restart.
pub fn optimize_lift(base: &[Vec<usize>], l: usize, targets: &LiftTargets, seed: u64) -> Result<LiftResult> {
    if l < 2 {
        return Err(Error::invalid(format!("circulant size must be at least 2, got {l}")));
    }
    let rows = base.len();
    let cols = base.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || rows > 8 || cols > 8 || l > 64 {
        return Err(Error::invalid(format!("search limited to 8 x 8 blocks and L <= 64, got {rows} x {cols}, L = {l}")));
    }
    if let Some(&m) = base.iter().flatten().find(|&&m| m > l) {
        return Err(Error::invalid(format!("cell multiplicity {m} exceeds L = {l}")));
    }
    let positions: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter(|&(r, c)| base[r][c] > 0)
        .collect();
    if positions.is_empty() {
        return Err(Error::invalid("base matrix has no nonzero cell"));
    }

    let mut best: Option<(MetProtograph, Eval)> = None;
    let mut evaluations = 0;
    for restart in 0..targets.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut cells = random_cells(base, l, &mut rng);
        let mut proto = MetProtograph::new(l, cells.clone())?;
        let mut cur = evaluate(&proto, targets)?;
        evaluations += 1;
        for _ in 0..targets.moves {
            if satisfied(&cur, targets) {
                break;
            }
            let (r, c) = positions[rng.random_range(0..positions.len())];
            let slot = rng.random_range(0..cells[r][c].len());
            let new_shift = rng.random_range(0..l);
            if cells[r][c].contains(&new_shift) {
                continue;
            }
            let old = cells[r][c][slot];
            cells[r][c][slot] = new_shift;
            let cand = MetProtograph::new(l, cells.clone())?;
            let e = evaluate(&cand, targets)?;
            evaluations += 1;
            if e.score >= cur.score {
                proto = cand;
                cur = e;
            } else {
                cells[r][c][slot] = old;
            }
        }
        log::debug!("lift search restart {restart}: girth {:?}, min ace {:?}", cur.girth, cur.min_ace);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                let (ok_new, ok_old) = (satisfied(&cur, targets), satisfied(b, targets));
                (ok_new && !ok_old) || (ok_new == ok_old && cur.score > b.score)
            }
        };
        if better {
            best = Some((proto, cur));
        }
        if best.as_ref().is_some_and(|(_, b)| satisfied(b, targets)) {
            break;
        }
    }
    let (protograph, e) = best.expect("at least one restart");
    let ok = satisfied(&e, targets);
    if !ok {
        log::warn!("lift search did not reach girth {} / ace {}", targets.min_girth, targets.min_ace);
    }
    Ok(LiftResult {
        protograph,
        girth: e.girth,
        girth_cycles: e.girth_cycles,
        min_ace: e.min_ace,
        satisfied: ok,
        evaluations,
    })
}
