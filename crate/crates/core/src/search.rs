//! Best-first forest traversal.
//!
//! All tree roots enter one max-priority queue at `+∞`. Popping an internal
//! node pushes the child on the query's side with the parent's priority and
//! the other child with `min(parent, -|margin|)`, so branches the query
//! barely misses are explored before distant ones. Popping a leaf adds its ids
//! to the candidate pool. The walk stops once the pool holds `budget`
//! distinct ids (or the queue drains); candidates are then ranked by exact
//! distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::sq_dist;
use crate::tree::{Forest, Node, SplitRule};
use crate::vecstore::{VecStore, VectorId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchParams {
    pub k: usize,
    /// Distinct candidate ids to gather before ranking.
    pub budget: usize,
}

pub const DEFAULT_K: usize = 10;

impl SearchParams {
    pub fn new(k: usize, budget: usize) -> Result<Self> {
        let p = SearchParams { k, budget };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.budget < self.k {
            return Err(Error::invalid(format!(
                "budget {} is smaller than k {}",
                self.budget, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Neighbor {
    pub id: VectorId,
    pub dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryResult {
    /// Ascending by `(dist, id)`.
    pub neighbors: Vec<Neighbor>,
    pub candidates_inspected: usize,
}

impl QueryResult {
    pub fn ids(&self) -> Vec<VectorId> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    priority: f64,
    tree: u32,
    node: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap on priority; lower (tree, node) first among equals.
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.tree.cmp(&self.tree))
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn check_query<S: SplitRule>(forest: &Forest<S>, store: &VecStore, q: &[f32]) -> Result<()> {
    if forest.trees().is_empty() {
        return Err(Error::invalid("forest has no trees"));
    }
    forest.check_store(store)?;
    if q.len() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            actual: q.len(),
        });
    }
    Ok(())
}

/// Distinct candidate ids in the order the traversal discovers them. A
/// smaller budget always yields a prefix of a larger one.
pub fn collect_candidates<S: SplitRule>(
    forest: &Forest<S>,
    store: &VecStore,
    q: &[f32],
    budget: usize,
) -> Result<Vec<VectorId>> {
    check_query(forest, store, q)?;
    Ok(traverse(forest, store, q, budget))
}

fn traverse<S: SplitRule>(
    forest: &Forest<S>,
    store: &VecStore,
    q: &[f32],
    budget: usize,
) -> Vec<VectorId> {
    let mut seen = vec![false; store.len()];
    let mut found = Vec::with_capacity(budget.min(store.len()));
    let mut heap = BinaryHeap::new();
    for t in 0..forest.trees().len() {
        heap.push(Entry {
            priority: f64::INFINITY,
            tree: t as u32,
            node: 0,
        });
    }
    while found.len() < budget {
        let Some(Entry { priority, tree, node }) = heap.pop() else {
            break;
        };
        match &forest.trees()[tree as usize].nodes()[node as usize] {
            Node::Leaf { ids } => {
                for &id in ids {
                    if !seen[id.index()] {
                        seen[id.index()] = true;
                        found.push(id);
                    }
                }
            }
            Node::Split { split, right } => {
                let m = split.margin(store, q);
                let (near, far) = if m <= 0.0 {
                    (node + 1, *right)
                } else {
                    (*right, node + 1)
                };
                heap.push(Entry {
                    priority,
                    tree,
                    node: near,
                });
                heap.push(Entry {
                    priority: priority.min(-m.abs()),
                    tree,
                    node: far,
                });
            }
        }
    }
    found
}

/// The `k` closest of `candidates` to `q`, ties by id.
pub fn rank(store: &VecStore, q: &[f32], candidates: &[VectorId], k: usize) -> Vec<Neighbor> {
    let mut scored: Vec<Neighbor> = candidates
        .iter()
        .map(|&id| Neighbor {
            id,
            dist: sq_dist(q, store.row(id)).sqrt(),
        })
        .collect();
    let by_dist = |a: &Neighbor, b: &Neighbor| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, by_dist);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_dist);
    scored
}

pub fn query<S: SplitRule>(
    forest: &Forest<S>,
    store: &VecStore,
    q: &[f32],
    params: &SearchParams,
) -> Result<QueryResult> {
    params.validate()?;
    check_query(forest, store, q)?;
    let candidates = traverse(forest, store, q, params.budget);
    Ok(QueryResult {
        neighbors: rank(store, q, &candidates, params.k),
        candidates_inspected: candidates.len(),
    })
}

/// Exact top-`k` by linear scan.
pub fn brute_force_knn(store: &VecStore, q: &[f32], k: usize) -> Result<QueryResult> {
    if q.len() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            actual: q.len(),
        });
    }
    if k == 0 || k > store.len() {
        return Err(Error::invalid(format!(
            "k must lie in 1..={}, got {k}",
            store.len()
        )));
    }
    let all: Vec<VectorId> = store.ids().collect();
    Ok(QueryResult {
        neighbors: rank(store, q, &all, k),
        candidates_inspected: store.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge_tree::build_forest;
    use crate::tree::BuildConfig;
    use crate::vecstore::{gen_synthetic, DataGenSpec};

    #[test]
    fn brute_force_345() {
        let s = VecStore::from_rows(&[[0.0f32, 0.0], [3.0, 4.0]]).unwrap();
        let r = brute_force_knn(&s, &[0.0, 0.0], 2).unwrap();
        assert_eq!(r.ids(), vec![VectorId(0), VectorId(1)]);
        assert_eq!(r.neighbors[0].dist, 0.0);
        assert_eq!(r.neighbors[1].dist, 5.0);
    }

    #[test]
    fn brute_force_ties_by_id() {
        let s = VecStore::from_rows(&[[1.0f32], [-1.0], [1.0], [0.0]]).unwrap();
        let r = brute_force_knn(&s, &[0.0], 4).unwrap();
        assert_eq!(
            r.ids(),
            vec![VectorId(3), VectorId(0), VectorId(1), VectorId(2)]
        );
    }

    #[test]
    fn brute_force_errors() {
        let s = VecStore::from_rows(&[[0.0f32, 0.0]]).unwrap();
        assert!(brute_force_knn(&s, &[0.0], 1).is_err());
        assert!(brute_force_knn(&s, &[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn single_point() {
        let s = VecStore::from_rows(&[[1.0f32, 2.0]]).unwrap();
        let f = build_forest(&s, &BuildConfig::default()).unwrap();
        let r = query(&f, &s, &[4.0, 6.0], &SearchParams::new(1, 1).unwrap()).unwrap();
        assert_eq!(r.ids(), vec![VectorId(0)]);
        assert_eq!(r.neighbors[0].dist, 5.0);
    }

    #[test]
    fn params_validation() {
        assert!(SearchParams::new(0, 5).is_err());
        assert!(SearchParams::new(10, 5).is_err());
        assert!(SearchParams::new(10, 10).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let s = gen_synthetic(&DataGenSpec {
            n: 100,
            dim: 4,
            cluster_count: 2,
            cluster_stddev: 0.1,
            seed: 1,
        })
        .unwrap();
        let f = build_forest(&s, &BuildConfig::default()).unwrap();
        let p = SearchParams::new(1, 10).unwrap();
        assert!(matches!(
            query(&f, &s, &[0.0; 3], &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn saturated_budget_is_exact() {
        let s = gen_synthetic(&DataGenSpec {
            n: 600,
            dim: 8,
            cluster_count: 3,
            cluster_stddev: 0.2,
            seed: 9,
        })
        .unwrap();
        let cfg = BuildConfig {
            leaf_threshold: 16,
            num_trees: 4,
            ..Default::default()
        };
        let f = build_forest(&s, &cfg).unwrap();
        let q = [0.5f32; 8];
        let exact = brute_force_knn(&s, &q, 10).unwrap();
        let approx = query(&f, &s, &q, &SearchParams::new(10, 600).unwrap()).unwrap();
        assert_eq!(exact.neighbors, approx.neighbors);
        assert_eq!(approx.candidates_inspected, 600);
    }
}
