//! Evaluation metrics and experiment drivers behind the `edge-ann` CLI.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::anchor_opt::{pair_score, CandidatePair};
use crate::baseline_tree::build_baseline_forest;
use crate::edge_tree::build_forest;
use crate::error::{Error, Result};
use crate::persist::size_report;
use crate::search::{brute_force_knn, query, SearchParams};
use crate::tree::{BuildConfig, Forest, SplitRule};
use crate::vecstore::{VecStore, VectorId};

pub const DEFAULT_HOLDOUT: usize = 1000;

/// `|ground_truth ∩ retrieved| / k`.
pub fn recall_at_k(ground_truth: &[VectorId], retrieved: &[VectorId], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if ground_truth.len() != k {
        return Err(Error::invalid(format!(
            "ground truth has {} ids, expected k = {k}",
            ground_truth.len()
        )));
    }
    let truth: HashSet<VectorId> = ground_truth.iter().copied().collect();
    let hits = retrieved
        .iter()
        .copied()
        .collect::<HashSet<_>>()
        .intersection(&truth)
        .count();
    Ok(hits as f64 / k as f64)
}

/// Relative recall gap `(s2 − s1) / s2` of a method (`s1`) against a
/// reference (`s2`).
pub fn performance_loss(s1: f64, s2: f64) -> Result<f64> {
    if !(s2 > 0.0) {
        return Err(Error::invalid("reference score must be positive"));
    }
    Ok((s2 - s1) / s2)
}

#[derive(Clone, Debug, Serialize)]
pub struct RecallReport {
    pub n_queries: usize,
    pub k: usize,
    pub mean_recall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_query: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LatencyReport {
    pub total_ms: f64,
    pub per_query_ms: f64,
    pub n_queries: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub recall_edge: f64,
    pub recall_baseline: f64,
    pub p_loss: Option<f64>,
    pub size_edge_bytes: u64,
    pub size_baseline_bytes: u64,
    pub size_reduction_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScoredPair {
    pub a: VectorId,
    pub b: VectorId,
    pub j1: usize,
    pub j2: f64,
}

pub const ORACLE_MAX_SUBSET: usize = 64;

/// Scores every distinct-vector pair of `subset` and sorts them best first:
/// ascending `J1`, then descending `J2`, then by pair.
pub fn exhaustive_anchor_oracle(subset: &[VectorId], store: &VecStore) -> Result<Vec<ScoredPair>> {
    if subset.len() > ORACLE_MAX_SUBSET {
        return Err(Error::invalid(format!(
            "oracle limited to {ORACLE_MAX_SUBSET} points, got {}",
            subset.len()
        )));
    }
    for &id in subset {
        store.get(id)?;
    }
    let mut out = Vec::new();
    for (i, &x) in subset.iter().enumerate() {
        for &y in &subset[i + 1..] {
            let Some(pair) = CandidatePair::new(x, y) else {
                continue;
            };
            if store.row(x) == store.row(y) {
                continue;
            }
            let (j1, j2) = pair_score(subset, store, pair);
            out.push(ScoredPair {
                a: pair.a(),
                b: pair.b(),
                j1,
                j2,
            });
        }
    }
    out.sort_by(|p, q| {
        p.j1.cmp(&q.j1)
            .then(q.j2.total_cmp(&p.j2))
            .then((p.a, p.b).cmp(&(q.a, q.b)))
    });
    Ok(out)
}

/// A seeded holdout: `queries` are removed from `base`.
#[derive(Clone, Debug)]
pub struct Holdout {
    pub base: VecStore,
    pub queries: VecStore,
    /// Original ids of the base rows, in order.
    pub base_ids: Vec<VectorId>,
    /// Original ids of the query rows, in order.
    pub query_ids: Vec<VectorId>,
}

pub fn split_holdout(data: &VecStore, holdout: usize, seed: u64) -> Result<Holdout> {
    if holdout == 0 || holdout >= data.len() {
        return Err(Error::invalid(format!(
            "holdout must lie in 1..{}, got {holdout}",
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = vec![false; data.len()];
    let mut query_ids: Vec<VectorId> = index::sample(&mut rng, data.len(), holdout)
        .into_iter()
        .map(|i| {
            picked[i] = true;
            VectorId(i as u32)
        })
        .collect();
    query_ids.sort_unstable();
    let base_ids: Vec<VectorId> = data.ids().filter(|id| !picked[id.index()]).collect();
    Ok(Holdout {
        base: data.subset(&base_ids)?,
        queries: data.subset(&query_ids)?,
        base_ids,
        query_ids,
    })
}

/// Exact top-`k` ids for every query row.
pub fn ground_truth(base: &VecStore, queries: &VecStore, k: usize) -> Result<Vec<Vec<VectorId>>> {
    queries
        .rows()
        .map(|q| brute_force_knn(base, q, k).map(|r| r.ids()))
        .collect()
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Runs every query once, single-threaded, timing each with a monotonic clock.
pub fn evaluate<S: SplitRule>(
    forest: &Forest<S>,
    base: &VecStore,
    queries: &VecStore,
    truth: &[Vec<VectorId>],
    params: &SearchParams,
) -> Result<(RecallReport, LatencyReport)> {
    if truth.len() != queries.len() {
        return Err(Error::invalid("one ground-truth list per query required"));
    }
    let mut per_query = Vec::with_capacity(queries.len());
    let mut times = Vec::with_capacity(queries.len());
    let start = Instant::now();
    for (q, gt) in queries.rows().zip(truth) {
        let t0 = Instant::now();
        let r = query(forest, base, q, params)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        per_query.push(recall_at_k(gt, &r.ids(), params.k)?);
    }
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let n = queries.len();
    times.sort_by(f64::total_cmp);
    Ok((
        RecallReport {
            n_queries: n,
            k: params.k,
            mean_recall: per_query.iter().sum::<f64>() / n as f64,
            per_query: Some(per_query),
        },
        LatencyReport {
            total_ms,
            per_query_ms: total_ms / n as f64,
            n_queries: n,
            p50_ms: percentile(&times, 0.50),
            p95_ms: percentile(&times, 0.95),
        },
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub budget: usize,
    pub recall_edge: f64,
    pub recall_base: f64,
    pub ms_edge: f64,
    pub ms_base: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "budget,recall_edge,recall_base,ms_edge,ms_base";

    pub fn csv(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            self.budget, self.recall_edge, self.recall_base, self.ms_edge, self.ms_base
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub comparison: ComparisonReport,
    pub build_ms_edge: f64,
    pub build_ms_base: f64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub holdout: usize,
    pub k: usize,
    pub budgets: Vec<usize>,
    pub build: BuildConfig,
    /// Seed of the holdout split.
    pub seed: u64,
    /// Embed vectors when accounting file sizes.
    pub embed_vectors: bool,
}

/// Holdout split, both forests, and a budget sweep over each.
pub fn run_bench(data: &VecStore, cfg: &BenchConfig) -> Result<BenchOutput> {
    if cfg.budgets.is_empty() {
        return Err(Error::invalid("no budgets given"));
    }
    let split = split_holdout(data, cfg.holdout, cfg.seed)?;
    let truth = ground_truth(&split.base, &split.queries, cfg.k)?;
    let edge = build_forest(&split.base, &cfg.build)?;
    let base = build_baseline_forest(&split.base, &cfg.build)?;

    let mut budgets = cfg.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let mut rows = Vec::new();
    for &budget in &budgets {
        let params = SearchParams::new(cfg.k, budget)?;
        let (re, le) = evaluate(&edge, &split.base, &split.queries, &truth, &params)?;
        let (rb, lb) = evaluate(&base, &split.base, &split.queries, &truth, &params)?;
        rows.push(BenchRow {
            budget,
            recall_edge: re.mean_recall,
            recall_base: rb.mean_recall,
            ms_edge: le.per_query_ms,
            ms_base: lb.per_query_ms,
        });
    }
    let last = rows.last().unwrap();
    let size_edge = size_report(&edge, cfg.embed_vectors).total_bytes;
    let size_base = size_report(&base, cfg.embed_vectors).total_bytes;
    let comparison = ComparisonReport {
        recall_edge: last.recall_edge,
        recall_baseline: last.recall_base,
        p_loss: performance_loss(last.recall_edge, last.recall_base).ok(),
        size_edge_bytes: size_edge,
        size_baseline_bytes: size_base,
        size_reduction_fraction: (size_base as f64 - size_edge as f64) / size_base as f64,
    };
    Ok(BenchOutput {
        comparison,
        build_ms_edge: edge.build_time().unwrap_or_default().as_secs_f64() * 1e3,
        build_ms_base: base.build_time().unwrap_or_default().as_secs_f64() * 1e3,
        rows,
    })
}

pub const LEAF_SWEEP: [usize; 6] = [32, 64, 128, 256, 512, 1024];

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub leaf_threshold: usize,
    pub build_ms: f64,
    pub budget: usize,
    pub recall: f64,
    pub ms_per_query: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "leaf_threshold,build_ms,budget,recall,ms_per_query";

    pub fn csv(&self) -> String {
        format!(
            "{},{:.3},{},{:.6},{:.6}",
            self.leaf_threshold, self.build_ms, self.budget, self.recall, self.ms_per_query
        )
    }
}

/// One edge forest per leaf threshold, each evaluated over `budgets`.
pub fn sweep_leaf(
    data: &VecStore,
    leaf_sizes: &[usize],
    budgets: &[usize],
    holdout: usize,
    k: usize,
    build: &BuildConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let split = split_holdout(data, holdout, seed)?;
    let truth = ground_truth(&split.base, &split.queries, k)?;
    let mut rows = Vec::new();
    for &leaf in leaf_sizes {
        let cfg = BuildConfig {
            leaf_threshold: leaf,
            ..build.clone()
        };
        let forest = build_forest(&split.base, &cfg)?;
        let build_ms = forest.build_time().unwrap_or_default().as_secs_f64() * 1e3;
        for &budget in budgets {
            let params = SearchParams::new(k, budget)?;
            let (r, l) = evaluate(&forest, &split.base, &split.queries, &truth, &params)?;
            rows.push(SweepRow {
                leaf_threshold: leaf,
                build_ms,
                budget,
                recall: r.mean_recall,
                ms_per_query: l.per_query_ms,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalePoint {
    pub n: usize,
    pub build_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleReport {
    pub points: Vec<ScalePoint>,
    /// Slope of `ln(build_ms)` against `ln(n)`.
    pub slope: f64,
    pub r_squared: f64,
}

/// Builds an edge forest over the first `n` rows of `data` for each `n`.
/// Each build is repeated `repeats` times and the fastest is kept.
pub fn scale(data: &VecStore, ns: &[usize], build: &BuildConfig, repeats: usize) -> Result<ScaleReport> {
    if ns.len() < 2 {
        return Err(Error::invalid("need at least two dataset sizes"));
    }
    let mut points = Vec::new();
    for &n in ns {
        if n == 0 || n > data.len() {
            return Err(Error::invalid(format!(
                "size {n} outside 1..={}",
                data.len()
            )));
        }
        let ids: Vec<VectorId> = (0..n as u32).map(VectorId).collect();
        let sub = data.subset(&ids)?;
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let f = build_forest(&sub, build)?;
            best = best.min(f.build_time().unwrap_or_default().as_secs_f64() * 1e3);
        }
        points.push(ScalePoint { n, build_ms: best });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.build_ms.max(1e-9).ln()).collect();
    let fit = linear_fit(&xs, &ys);
    Ok(ScaleReport {
        points,
        slope: fit.slope,
        r_squared: fit.r_squared,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<VectorId> {
        v.iter().map(|&i| VectorId(i)).collect()
    }

    #[test]
    fn recall_examples() {
        let gt = ids(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let got = ids(&[0, 1, 2, 3, 4, 5, 6, 20, 21, 22]);
        assert!((recall_at_k(&gt, &got, 10).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(recall_at_k(&gt, &gt, 10).unwrap(), 1.0);
        assert!(recall_at_k(&gt, &got, 0).is_err());
        assert!(recall_at_k(&gt[..3], &got, 10).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(performance_loss(0.8, 0.8).unwrap(), 0.0);
        assert!((performance_loss(0.90, 0.95).unwrap() - 0.05263157894736842).abs() < 1e-12);
        assert!(performance_loss(0.5, 0.0).is_err());
        assert!(performance_loss(0.5, -1.0).is_err());
    }

    #[test]
    fn oracle_collinear() {
        // 0, 1, 2 on a line; every pair leaves J1 = 1.
        // (0,1): bisector 0.5, J2 = 0.5 + 0.5 + 1.5 = 2.5
        // (1,2): bisector 1.5, J2 = 1.5 + 0.5 + 0.5 = 2.5
        // (0,2): bisector 1.0, J2 = 1.0 + 0.0 + 1.0 = 2.0
        let s = VecStore::from_rows(&[[0.0f32], [1.0], [2.0]]).unwrap();
        let ranked = exhaustive_anchor_oracle(&ids(&[0, 1, 2]), &s).unwrap();
        let got: Vec<_> = ranked.iter().map(|p| (p.a.0, p.b.0, p.j1, p.j2)).collect();
        assert_eq!(got, vec![(0, 1, 1, 2.5), (1, 2, 1, 2.5), (0, 2, 1, 2.0)]);
    }

    #[test]
    fn oracle_two_points_and_guard() {
        let s = VecStore::from_rows(&[[0.0f32], [1.0]]).unwrap();
        assert_eq!(exhaustive_anchor_oracle(&ids(&[0, 1]), &s).unwrap().len(), 1);
        let big = VecStore::from_rows(&vec![[0.0f32]; 65]).unwrap();
        let all: Vec<_> = big.ids().collect();
        assert!(exhaustive_anchor_oracle(&all, &big).is_err());
    }

    #[test]
    fn holdout_disjoint() {
        let rows: Vec<[f32; 1]> = (0..50).map(|i| [i as f32]).collect();
        let s = VecStore::from_rows(&rows).unwrap();
        let h = split_holdout(&s, 10, 3).unwrap();
        assert_eq!(h.queries.len(), 10);
        assert_eq!(h.base.len(), 40);
        let b: HashSet<_> = h.base_ids.iter().collect();
        assert!(h.query_ids.iter().all(|id| !b.contains(id)));
        assert!(split_holdout(&s, 50, 3).is_err());
    }

    #[test]
    fn fit_exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
