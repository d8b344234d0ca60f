//! Anchor-pair trees.
//!
//! An internal node stores two vector ids and a 32-bit shift `Δd`; the
//! hyperplane is rebuilt from the referenced vectors whenever it is needed,
//! so a node costs 12 bytes whatever the dimension.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::anchor_opt::{optimize_anchors, OptimizerConfig};
use crate::error::{Error, Result};
use crate::geometry;
use crate::tree::{self, BuildConfig, Forest, SplitRule, Splitter};
use crate::vecstore::{VecStore, VectorId};

/// Internal node of an anchor-pair tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnchorSplit {
    pub p1: VectorId,
    pub p2: VectorId,
    pub delta_d: f32,
}

pub const ANCHOR_PAYLOAD_BYTES: usize = 12;

impl SplitRule for AnchorSplit {
    const KIND: u8 = 0;
    const TAG: u8 = 1;

    #[inline]
    fn margin(&self, store: &VecStore, q: &[f32]) -> f64 {
        geometry::anchor_margin(
            store.row(self.p1),
            store.row(self.p2),
            self.delta_d as f64,
            q,
        )
        .unwrap_or(0.0)
    }

    fn payload_len(_dim: usize) -> usize {
        ANCHOR_PAYLOAD_BYTES
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.p1.0.to_le_bytes());
        out.extend_from_slice(&self.p2.0.to_le_bytes());
        out.extend_from_slice(&self.delta_d.to_le_bytes());
    }

    fn decode(payload: &[u8], _dim: usize) -> Result<Self> {
        let word = |i: usize| -> [u8; 4] { payload[4 * i..4 * i + 4].try_into().unwrap() };
        let split = AnchorSplit {
            p1: VectorId(u32::from_le_bytes(word(0))),
            p2: VectorId(u32::from_le_bytes(word(1))),
            delta_d: f32::from_le_bytes(word(2)),
        };
        if split.p1 == split.p2 {
            return Err(Error::format("anchor node references the same vector twice"));
        }
        if !split.delta_d.is_finite() {
            return Err(Error::format("non-finite anchor offset"));
        }
        Ok(split)
    }

    fn referenced_ids(&self) -> Vec<VectorId> {
        vec![self.p1, self.p2]
    }
}

pub type AnchorForest = Forest<AnchorSplit>;

struct AnchorSplitter<'a> {
    optimizer: &'a OptimizerConfig,
}

impl Splitter<AnchorSplit> for AnchorSplitter<'_> {
    fn choose(
        &mut self,
        ids: &[VectorId],
        store: &VecStore,
        rng: &mut ChaCha8Rng,
    ) -> Result<AnchorSplit> {
        let cfg = OptimizerConfig {
            seed: rng.next_u64(),
            ..self.optimizer.clone()
        };
        let r = optimize_anchors(ids, store, &cfg)?;
        Ok(tree::rebalance_f32(ids, store, r.delta_d as f32, |delta_d| {
            AnchorSplit {
                p1: r.p1,
                p2: r.p2,
                delta_d,
            }
        }))
    }
}

/// Builds one tree over `ids` with the given seed.
pub fn build_node(
    ids: Vec<VectorId>,
    store: &VecStore,
    cfg: &BuildConfig,
    seed: u64,
) -> Result<(tree::Tree<AnchorSplit>, Vec<tree::BuildWarning>)> {
    cfg.validate()?;
    if ids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut warnings = Vec::new();
    let mut splitter = AnchorSplitter {
        optimizer: &cfg.optimizer,
    };
    let t = tree::build_tree(
        store,
        ids,
        cfg.leaf_threshold,
        seed,
        0,
        &mut splitter,
        &mut warnings,
    )?;
    Ok((t, warnings))
}

/// Builds `cfg.num_trees` anchor-pair trees, tree `i` seeded with
/// [`BuildConfig::tree_seed`]`(i)`.
pub fn build_forest(store: &VecStore, cfg: &BuildConfig) -> Result<AnchorForest> {
    let mut splitter = AnchorSplitter {
        optimizer: &cfg.optimizer,
    };
    tree::build_forest_with(store, cfg, &mut splitter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Node;
    use crate::vecstore::{gen_synthetic, DataGenSpec};

    fn data(n: usize, dim: usize, seed: u64) -> VecStore {
        gen_synthetic(&DataGenSpec {
            n,
            dim,
            cluster_count: 4,
            cluster_stddev: 0.1,
            seed,
        })
        .unwrap()
    }

    fn cfg(t: usize, trees: usize) -> BuildConfig {
        BuildConfig {
            leaf_threshold: t,
            num_trees: trees,
            ..Default::default()
        }
    }

    #[test]
    fn subset_at_threshold_is_leaf() {
        let s = data(50, 8, 1);
        let (t, _) = build_node(s.ids().collect(), &s, &cfg(50, 1), 3).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert!(matches!(t.nodes()[0], Node::Leaf { .. }));
    }

    #[test]
    fn one_over_threshold_splits_evenly() {
        let s = data(51, 8, 2);
        let (t, _) = build_node(s.ids().collect(), &s, &cfg(50, 1), 3).unwrap();
        // The middle point sits on the plane; rounding decides its side.
        let sizes = t.split_sizes();
        assert_eq!(sizes.len(), 1);
        let (l, r) = sizes[0];
        assert_eq!((l.min(r), l.max(r)), (25, 26));
    }

    #[test]
    fn single_tree_forest_matches_build_node() {
        let s = data(400, 8, 3);
        let c = cfg(20, 1);
        let f = build_forest(&s, &c).unwrap();
        let (t, _) = build_node(s.ids().collect(), &s, &c, c.tree_seed(0)).unwrap();
        assert_eq!(f.trees()[0], t);
    }

    #[test]
    fn anchors_belong_to_their_subtree() {
        let s = data(1000, 16, 4);
        let f = build_forest(&s, &cfg(30, 3)).unwrap();
        for t in f.trees() {
            for (i, node) in t.nodes().iter().enumerate() {
                if let Node::Split { split, .. } = node {
                    let under = t.subtree_ids(i);
                    assert!(under.contains(&split.p1) && under.contains(&split.p2));
                }
            }
        }
    }

    #[test]
    fn duplicates_become_oversized_leaf() {
        let mut rows = vec![[1.0f32, 2.0]; 40];
        rows.extend([[3.0f32, 4.0]; 2]);
        let s = VecStore::from_rows(&rows).unwrap();
        let f = build_forest(&s, &cfg(4, 1)).unwrap();
        assert!(!f.warnings().is_empty());
        let mut all: Vec<_> = f.trees()[0]
            .leaves_with_depth()
            .into_iter()
            .flat_map(|(_, ids)| ids.to_vec())
            .collect();
        all.sort();
        assert_eq!(all, s.ids().collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_config() {
        let s = data(10, 2, 5);
        assert!(build_forest(&s, &cfg(1, 1)).is_err());
        assert!(build_forest(&s, &cfg(5, 0)).is_err());
    }
}
