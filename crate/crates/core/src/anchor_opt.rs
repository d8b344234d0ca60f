//! Binary anchor optimization.
//!
//! Given a subset `S` of the store, find two real points whose perpendicular
//! bisector splits `S` well, plus a scalar shift `Δd` that moves the bisector
//! onto the median of the signed projections.
//!
//! Phase 1 keeps `K` candidate pairs and repeatedly refines each of them
//! (partition, translate both anchors toward the heavier side's centroid,
//! project the translated "virtual" anchors back onto real points) until the
//! whole candidate set revisits a state it has already been in. The survivor
//! is chosen lexicographically: minimal imbalance `J1`, then maximal total
//! distance to the bisector `J2`. Phase 2 computes `Δd` as the median signed
//! distance of `S` to that pair's bisector.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Hyperplane};
use crate::vecstore::{VecStore, VectorId};

/// Unordered pair of distinct anchors, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidatePair {
    a: VectorId,
    b: VectorId,
}

impl CandidatePair {
    /// Returns `None` when `x == y`.
    pub fn new(x: VectorId, y: VectorId) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(CandidatePair { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(CandidatePair { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    #[inline]
    pub fn a(&self) -> VectorId {
        self.a
    }

    #[inline]
    pub fn b(&self) -> VectorId {
        self.b
    }
}

/// Canonical candidate set: a sorted, duplicate-free collection of pairs.
pub type CandidateSet = BTreeSet<CandidatePair>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of candidate pairs `K` tracked in Phase 1.
    pub k_candidates: usize,
    /// Safety cap on Phase-1 iterations. Hitting it is not an error.
    pub max_iters: usize,
    /// Fraction of `S` used for Phase 1 once `|S| > sample_threshold`.
    pub sample_fraction: f64,
    pub sample_threshold: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            k_candidates: 8,
            max_iters: 64,
            sample_fraction: 0.10,
            sample_threshold: 5000,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_candidates == 0 {
            return Err(Error::invalid("k_candidates must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::invalid("sample_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Output of [`optimize_anchors`]: the bisector of `p1`, `p2` shifted by
/// `delta_d` (in distance units along `(p2 − p1)/‖p2 − p1‖`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorResult {
    pub p1: VectorId,
    pub p2: VectorId,
    pub delta_d: f64,
    /// Phase-1 iterations actually run.
    pub iterations: usize,
}

fn check_distinct(store: &VecStore, pair: CandidatePair) -> Result<()> {
    if store.row(pair.a) == store.row(pair.b) {
        return Err(Error::DegenerateAnchors(pair.a.0, pair.b.0));
    }
    Ok(())
}

fn check_ids(store: &VecStore, ids: &[VectorId]) -> Result<()> {
    for &id in ids {
        store.get(id)?;
    }
    Ok(())
}

/// Nearest-anchor test in projection form: `x` is at least as close to `a`
/// as to `b` iff `x·(b − a) ≤ (‖b‖² − ‖a‖²)/2`. One dot product per point,
/// and the same normal serves any common translation of both anchors.
struct Bisect {
    w: Vec<f64>,
    c: f64,
}

impl Bisect {
    fn new(pi: &[f32], pj: &[f32]) -> Self {
        let w: Vec<f64> = pi.iter().zip(pj).map(|(&a, &b)| b as f64 - a as f64).collect();
        let c = 0.5 * (geometry::sq_norm(pj) - geometry::sq_norm(pi));
        Bisect { w, c }
    }

    #[inline]
    fn project(&self, x: &[f32]) -> f64 {
        geometry::dot_f64(&self.w, x)
    }
}

/// Splits `subset` by nearest anchor. Ties go to the side of `pair.a()`.
pub fn partition_by_anchors(
    subset: &[VectorId],
    store: &VecStore,
    pair: CandidatePair,
) -> Result<(Vec<VectorId>, Vec<VectorId>)> {
    check_ids(store, subset)?;
    check_ids(store, &[pair.a, pair.b])?;
    check_distinct(store, pair)?;
    let bis = Bisect::new(store.row(pair.a), store.row(pair.b));
    Ok(subset
        .iter()
        .partition(|&&id| bis.project(store.row(id)) <= bis.c))
}

/// `|card(S_i) − card(S_j)|`.
#[inline]
pub fn imbalance_j1(si: &[VectorId], sj: &[VectorId]) -> usize {
    si.len().abs_diff(sj.len())
}

/// Sum over `S` of the unsigned distance to the bisector of the pair.
pub fn spread_j2(subset: &[VectorId], store: &VecStore, pair: CandidatePair) -> Result<f64> {
    check_ids(store, subset)?;
    check_ids(store, &[pair.a, pair.b])?;
    check_distinct(store, pair)?;
    Ok(spread_unchecked(subset, store, pair))
}

fn spread_unchecked(subset: &[VectorId], store: &VecStore, pair: CandidatePair) -> f64 {
    let plane = Hyperplane::bisector(store.row(pair.a), store.row(pair.b))
        .expect("distinct anchors define a plane");
    subset
        .iter()
        .map(|&id| plane.signed_distance(store.row(id)).abs())
        .sum()
}

/// Translation damping `e^(−2·ratio²)`.
#[inline]
pub fn alpha(ratio: f64) -> f64 {
    (-2.0 * ratio * ratio).exp()
}

/// One evaluate-adjust-project step on a single candidate pair.
pub fn refine_candidate(
    subset: &[VectorId],
    store: &VecStore,
    pair: CandidatePair,
) -> Result<CandidatePair> {
    if subset.len() < 2 {
        return Err(Error::invalid("refinement needs at least two points"));
    }
    check_ids(store, subset)?;
    check_ids(store, &[pair.a, pair.b])?;
    check_distinct(store, pair)?;
    Ok(refine_unchecked(subset, store, pair))
}

fn refine_unchecked(subset: &[VectorId], store: &VecStore, pair: CandidatePair) -> CandidatePair {
    let dim = store.dim();
    let (pi, pj) = (store.row(pair.a), store.row(pair.b));
    let bis = Bisect::new(pi, pj);

    // Pass 1: projections, side counts and per-side sums.
    let mut proj = Vec::with_capacity(subset.len());
    let mut sum_i = vec![0.0f64; dim];
    let mut sum_j = vec![0.0f64; dim];
    let mut n_i = 0usize;
    for &id in subset {
        let x = store.row(id);
        let p = bis.project(x);
        proj.push(p);
        let acc = if p <= bis.c {
            n_i += 1;
            &mut sum_i
        } else {
            &mut sum_j
        };
        for (a, &v) in acc.iter_mut().zip(x) {
            *a += v as f64;
        }
    }
    let n_j = subset.len() - n_i;
    let ((large, n_large), (small, n_small)) = if n_i > n_j {
        ((&sum_i, n_i), (&sum_j, n_j))
    } else {
        ((&sum_j, n_j), (&sum_i, n_i))
    };

    // Only reachable when an anchor lies outside `S`.
    if n_small == 0 {
        return pair;
    }
    let scale = alpha(n_small as f64 / n_large as f64);
    let shift: Vec<f64> = large
        .iter()
        .zip(small)
        .map(|(l, s)| scale * (l / n_large as f64 - s / n_small as f64))
        .collect();
    let vi: Vec<f64> = pi.iter().zip(&shift).map(|(&p, d)| p as f64 + d).collect();
    let vj: Vec<f64> = pj.iter().zip(&shift).map(|(&p, d)| p as f64 + d).collect();
    // Translating both anchors keeps the normal and moves the threshold.
    let c_virtual = bis.c + bis.w.iter().zip(&shift).map(|(w, d)| w * d).sum::<f64>();

    // Pass 2: re-partition by the virtual anchors and project each back onto
    // the nearest real member of its side, lowest id on ties.
    let mut best_i: Option<(f64, VectorId)> = None;
    let mut best_j: Option<(f64, VectorId)> = None;
    for (&id, &p) in subset.iter().zip(&proj) {
        let (target, best) = if p <= c_virtual {
            (&vi, &mut best_i)
        } else {
            (&vj, &mut best_j)
        };
        let d = geometry::sq_dist_f64(store.row(id), target);
        match *best {
            Some((bd, bid)) if d > bd || (d == bd && id > bid) => {}
            _ => *best = Some((d, id)),
        }
    }
    let new_i = best_i.map_or(pair.a, |(_, id)| id);
    let new_j = best_j.map_or(pair.b, |(_, id)| id);

    match CandidatePair::new(new_i, new_j) {
        Some(p) if store.row(p.a) != store.row(p.b) => p,
        _ => pair,
    }
}

/// Median of the signed distances of `S` to the pair's unshifted bisector
/// (oriented `a → b`). Even counts use the mean of the two middle values.
pub fn median_offset(subset: &[VectorId], store: &VecStore, pair: CandidatePair) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::invalid("median of an empty subset"));
    }
    check_ids(store, subset)?;
    check_ids(store, &[pair.a, pair.b])?;
    check_distinct(store, pair)?;
    let plane = Hyperplane::bisector(store.row(pair.a), store.row(pair.b))?;
    let mut dists: Vec<f64> = subset
        .iter()
        .map(|&id| plane.signed_distance(store.row(id)))
        .collect();
    Ok(median(&mut dists))
}

/// Median with the even-count mean rule. Reorders `values`.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    let n = values.len();
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().max_by(f64::total_cmp).unwrap();
        0.5 * (lower_max + upper)
    }
}

/// Lexicographic score of a pair on `S`: `(J1, J2)`; smaller `J1` is
/// better, then larger `J2`.
pub fn pair_score(subset: &[VectorId], store: &VecStore, pair: CandidatePair) -> (usize, f64) {
    let bis = Bisect::new(store.row(pair.a), store.row(pair.b));
    let norm = bis.w.iter().map(|w| w * w).sum::<f64>().sqrt();
    let mut n_i = 0usize;
    let mut spread = 0.0;
    for &id in subset {
        let v = bis.project(store.row(id)) - bis.c;
        if v <= 0.0 {
            n_i += 1;
        }
        spread += v.abs();
    }
    (n_i.abs_diff(subset.len() - n_i), spread / norm)
}

fn initial_candidates(
    subset: &[VectorId],
    store: &VecStore,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> CandidateSet {
    let mut set = CandidateSet::new();
    let n = subset.len();
    let attempts = 32 * k + 64;
    for _ in 0..attempts {
        if set.len() == k {
            break;
        }
        let picks = index::sample(rng, n, 2);
        let pair = CandidatePair::new(subset[picks.index(0)], subset[picks.index(1)]).unwrap();
        if store.row(pair.a) != store.row(pair.b) {
            set.insert(pair);
        }
    }
    if set.is_empty() {
        // Heavy duplication: fall back to a deterministic scan.
        let first = subset[0];
        if let Some(&other) = subset
            .iter()
            .find(|&&id| store.row(id) != store.row(first))
        {
            set.insert(CandidatePair::new(first, other).unwrap());
        }
    }
    set
}

fn all_identical(subset: &[VectorId], store: &VecStore) -> bool {
    let first = store.row(subset[0]);
    subset.iter().all(|&id| store.row(id) == first)
}

/// Phase 1 only: returns the selected pair and the number of iterations run.
pub fn select_anchor_pair(
    subset: &[VectorId],
    store: &VecStore,
    cfg: &OptimizerConfig,
) -> Result<(CandidatePair, usize)> {
    cfg.validate()?;
    if subset.len() < 2 {
        return Err(Error::invalid("anchor optimization needs at least two points"));
    }
    check_ids(store, subset)?;
    if all_identical(subset, store) {
        return Err(Error::Unsplittable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(phase_one(subset, store, cfg, &mut rng))
}

fn phase_one(
    subset: &[VectorId],
    store: &VecStore,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> (CandidatePair, usize) {
    let mut current = initial_candidates(subset, store, cfg.k_candidates, rng);
    let mut history: HashSet<CandidateSet> = HashSet::new();
    let mut iterations = 0;
    while !history.contains(&current) && iterations < cfg.max_iters {
        let next: CandidateSet = current
            .iter()
            .map(|&p| refine_unchecked(subset, store, p))
            .collect();
        history.insert(std::mem::replace(&mut current, next));
        iterations += 1;
    }

    // Iteration is ascending, so the strict comparisons keep the lowest
    // canonical pair among exact ties.
    let mut best: Option<(CandidatePair, usize, f64)> = None;
    for &pair in &current {
        let (j1, j2) = pair_score(subset, store, pair);
        let better = match best {
            None => true,
            Some((_, bj1, bj2)) => j1 < bj1 || (j1 == bj1 && j2 > bj2),
        };
        if better {
            best = Some((pair, j1, j2));
        }
    }
    (best.expect("candidate set is never empty").0, iterations)
}

/// Full two-phase optimization over `subset`.
///
/// When `|S| > cfg.sample_threshold`, Phase 1 runs on a random sample of
/// `⌈sample_fraction·|S|⌉` members (at least two). Phase 2 always uses the
/// whole subset so the resulting split stays balanced.
pub fn optimize_anchors(
    subset: &[VectorId],
    store: &VecStore,
    cfg: &OptimizerConfig,
) -> Result<AnchorResult> {
    cfg.validate()?;
    if subset.len() < 2 {
        return Err(Error::invalid("anchor optimization needs at least two points"));
    }
    check_ids(store, subset)?;
    if all_identical(subset, store) {
        return Err(Error::Unsplittable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let sampled;
    let search_set: &[VectorId] = if subset.len() > cfg.sample_threshold {
        let m = ((subset.len() as f64 * cfg.sample_fraction).ceil() as usize)
            .clamp(2, subset.len());
        let mut picks: Vec<VectorId> = index::sample(&mut rng, subset.len(), m)
            .into_iter()
            .map(|i| subset[i])
            .collect();
        picks.sort_unstable();
        if all_identical(&picks, store) {
            // The sample lost every distinct vector; add one back.
            let other = *subset
                .iter()
                .find(|&&id| store.row(id) != store.row(picks[0]))
                .unwrap();
            picks.push(other);
        }
        sampled = picks;
        &sampled
    } else {
        subset
    };

    let (pair, iterations) = phase_one(search_set, store, cfg, &mut rng);
    let delta_d = median_offset(subset, store, pair)?;
    Ok(AnchorResult {
        p1: pair.a,
        p2: pair.b,
        delta_d,
        iterations,
    })
}

/// A uniformly random distinct-vector pair from `subset`, used by the
/// random-hyperplane baseline.
pub(crate) fn random_pair(
    subset: &[VectorId],
    store: &VecStore,
    rng: &mut impl Rng,
) -> Option<CandidatePair> {
    for _ in 0..64 {
        let picks = index::sample(rng, subset.len(), 2);
        let pair = CandidatePair::new(subset[picks.index(0)], subset[picks.index(1)]).unwrap();
        if store.row(pair.a) != store.row(pair.b) {
            return Some(pair);
        }
    }
    let first = subset[0];
    subset
        .iter()
        .find(|&&id| store.row(id) != store.row(first))
        .map(|&other| CandidatePair::new(first, other).unwrap())
}
