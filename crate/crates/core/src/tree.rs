//! Forest representation shared by the anchor-pair index and the explicit
//! hyperplane baseline.
//!
//! Each tree is a preorder arena: the left child of an internal node at
//! index `i` is `i + 1`; the right child index is stored on the node. This is
//! the same layout the on-disk format uses.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::vecstore::{VecStore, VectorId};

/// How an internal node separates its subset.
pub trait SplitRule: Clone + std::fmt::Debug + PartialEq {
    /// Header `kind` byte for forests of this split type.
    const KIND: u8;
    /// Node tag byte in the serialized form.
    const TAG: u8;

    /// Signed distance of `q` to the node's hyperplane. `≤ 0` is the left side.
    fn margin(&self, store: &VecStore, q: &[f32]) -> f64;

    /// Serialized payload length for vectors of dimension `dim`.
    fn payload_len(dim: usize) -> usize;

    fn encode(&self, out: &mut Vec<u8>);

    fn decode(payload: &[u8], dim: usize) -> Result<Self>;

    /// Vector ids referenced by the split, for validation.
    fn referenced_ids(&self) -> Vec<VectorId> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node<S> {
    Split { split: S, right: u32 },
    Leaf { ids: Vec<VectorId> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree<S> {
    pub(crate) nodes: Vec<Node<S>>,
}

impl<S: SplitRule> Tree<S> {
    pub(crate) fn from_nodes(nodes: Vec<Node<S>>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    /// All leaves with their depth, in preorder.
    pub fn leaves_with_depth(&self) -> Vec<(usize, &[VectorId])> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            match &self.nodes[idx] {
                Node::Leaf { ids } => out.push((depth, ids.as_slice())),
                Node::Split { right, .. } => {
                    stack.push((*right as usize, depth + 1));
                    stack.push((idx + 1, depth + 1));
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.leaves_with_depth()
            .iter()
            .map(|(d, _)| *d)
            .max()
            .unwrap_or(0)
    }

    /// Ids under the node at `idx`, in preorder leaf order.
    pub fn subtree_ids(&self, idx: usize) -> Vec<VectorId> {
        let mut out = Vec::new();
        let mut stack = vec![idx];
        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                Node::Leaf { ids } => out.extend_from_slice(ids),
                Node::Split { right, .. } => {
                    stack.push(*right as usize);
                    stack.push(i + 1);
                }
            }
        }
        out
    }

    /// Sizes of the (left, right) subtrees of every internal node.
    pub fn split_sizes(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![0usize; self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            sizes[i] = match &self.nodes[i] {
                Node::Leaf { ids } => ids.len(),
                Node::Split { right, .. } => sizes[i + 1] + sizes[*right as usize],
            };
        }
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                Node::Split { right, .. } => Some((sizes[i + 1], sizes[*right as usize])),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

/// Build-time parameters common to both forest kinds.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct BuildConfig {
    /// Maximum leaf cardinality `T`.
    pub leaf_threshold: usize,
    /// Number of trees `t_n`.
    pub num_trees: usize,
    /// Optimizer settings. The seed field is replaced by a per-node seed
    /// derived from [`BuildConfig::seed`].
    pub optimizer: crate::anchor_opt::OptimizerConfig,
    pub seed: u64,
}

pub const DEFAULT_LEAF_THRESHOLD: usize = 50;
pub const DEFAULT_NUM_TREES: usize = 25;

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            leaf_threshold: DEFAULT_LEAF_THRESHOLD,
            num_trees: DEFAULT_NUM_TREES,
            optimizer: Default::default(),
            seed: 0,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.leaf_threshold < 2 {
            return Err(Error::invalid("leaf threshold must be at least 2"));
        }
        if self.num_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        self.optimizer.validate()
    }

    /// Seed of tree `index`: a SplitMix64 finalization of `seed + index`.
    pub fn tree_seed(&self, index: usize) -> u64 {
        splitmix64(self.seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BuildWarning {
    pub tree: usize,
    pub subset_size: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Forest<S> {
    pub(crate) trees: Vec<Tree<S>>,
    pub(crate) config: BuildConfig,
    pub(crate) n: usize,
    pub(crate) dim: usize,
    pub(crate) build_time: Option<Duration>,
    pub(crate) warnings: Vec<BuildWarning>,
}

/// Structural equality over what the file format records. Build timing and
/// optimizer settings are ignored.
impl<S: PartialEq> PartialEq for Forest<S> {
    fn eq(&self, other: &Self) -> bool {
        self.trees == other.trees
            && self.config.leaf_threshold == other.config.leaf_threshold
            && self.config.num_trees == other.config.num_trees
            && self.config.seed == other.config.seed
            && self.n == other.n
            && self.dim == other.dim
    }
}

impl<S: SplitRule> Forest<S> {
    pub fn trees(&self) -> &[Tree<S>] {
        &self.trees
    }

    pub fn config(&self) -> &BuildConfig {
        &self.config
    }

    /// Number of vectors in the indexed store.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Wall time of the build; `None` for forests loaded from disk.
    pub fn build_time(&self) -> Option<Duration> {
        self.build_time
    }

    pub fn warnings(&self) -> &[BuildWarning] {
        &self.warnings
    }

    pub(crate) fn check_store(&self, store: &VecStore) -> Result<()> {
        if store.len() != self.n || store.dim() != self.dim {
            return Err(Error::invalid(format!(
                "forest indexes {}×{} vectors but store is {}×{}",
                self.n,
                self.dim,
                store.len(),
                store.dim()
            )));
        }
        Ok(())
    }
}

/// Chooses the split for a subset. `Err(Error::Unsplittable)` makes a leaf.
pub(crate) trait Splitter<S> {
    fn choose(&mut self, ids: &[VectorId], store: &VecStore, rng: &mut ChaCha8Rng) -> Result<S>;
}

pub(crate) fn build_tree<S: SplitRule>(
    store: &VecStore,
    ids: Vec<VectorId>,
    leaf_threshold: usize,
    seed: u64,
    tree_index: usize,
    splitter: &mut impl Splitter<S>,
    warnings: &mut Vec<BuildWarning>,
) -> Result<Tree<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    grow(
        store,
        ids,
        leaf_threshold,
        tree_index,
        splitter,
        &mut rng,
        &mut nodes,
        warnings,
    )?;
    Ok(Tree { nodes })
}

#[allow(clippy::too_many_arguments)]
fn grow<S: SplitRule>(
    store: &VecStore,
    ids: Vec<VectorId>,
    leaf_threshold: usize,
    tree_index: usize,
    splitter: &mut impl Splitter<S>,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node<S>>,
    warnings: &mut Vec<BuildWarning>,
) -> Result<()> {
    if ids.len() <= leaf_threshold {
        nodes.push(Node::Leaf { ids });
        return Ok(());
    }
    let mut node_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let split = match splitter.choose(&ids, store, &mut node_rng) {
        Ok(s) => s,
        Err(Error::Unsplittable) => {
            warnings.push(BuildWarning {
                tree: tree_index,
                subset_size: ids.len(),
                reason: "all vectors identical".into(),
            });
            nodes.push(Node::Leaf { ids });
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let (left, right): (Vec<VectorId>, Vec<VectorId>) = ids
        .iter()
        .partition(|&&id| split.margin(store, store.row(id)) <= 0.0);
    if left.is_empty() || right.is_empty() {
        warnings.push(BuildWarning {
            tree: tree_index,
            subset_size: ids.len(),
            reason: "split left one side empty".into(),
        });
        nodes.push(Node::Leaf { ids });
        return Ok(());
    }
    drop(ids);
    let at = nodes.len();
    nodes.push(Node::Split { split, right: 0 });
    grow(store, left, leaf_threshold, tree_index, splitter, rng, nodes, warnings)?;
    let right_index = nodes.len() as u32;
    if let Node::Split { right: r, .. } = &mut nodes[at] {
        *r = right_index;
    }
    grow(store, right, leaf_threshold, tree_index, splitter, rng, nodes, warnings)
}

/// Depth and leaf-size summary of a forest.
#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub n: usize,
    pub dim: usize,
    pub num_trees: usize,
    pub leaf_threshold: usize,
    pub trees: Vec<TreeStats>,
    pub build_time_ms: Option<f64>,
    pub warnings: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeStats {
    pub internal_nodes: usize,
    pub leaf_nodes: usize,
    pub max_depth: usize,
    /// depth → number of leaves at that depth
    pub depth_histogram: BTreeMap<usize, usize>,
    /// leaf size → number of leaves of that size
    pub leaf_size_histogram: BTreeMap<usize, usize>,
}

pub fn tree_stats<S: SplitRule>(forest: &Forest<S>) -> StatsReport {
    let trees = forest
        .trees
        .iter()
        .map(|t| {
            let leaves = t.leaves_with_depth();
            let mut depth_histogram = BTreeMap::new();
            let mut leaf_size_histogram = BTreeMap::new();
            for (depth, ids) in &leaves {
                *depth_histogram.entry(*depth).or_insert(0) += 1;
                *leaf_size_histogram.entry(ids.len()).or_insert(0) += 1;
            }
            TreeStats {
                internal_nodes: t.internal_count(),
                leaf_nodes: leaves.len(),
                max_depth: leaves.iter().map(|(d, _)| *d).max().unwrap_or(0),
                depth_histogram,
                leaf_size_histogram,
            }
        })
        .collect();
    StatsReport {
        n: forest.n,
        dim: forest.dim,
        num_trees: forest.trees.len(),
        leaf_threshold: forest.config.leaf_threshold,
        trees,
        build_time_ms: forest.build_time.map(|d| d.as_secs_f64() * 1e3),
        warnings: forest.warnings.len(),
    }
}

pub(crate) fn build_forest_with<S: SplitRule>(
    store: &VecStore,
    cfg: &BuildConfig,
    splitter: &mut impl Splitter<S>,
) -> Result<Forest<S>> {
    cfg.validate()?;
    if store.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let start = std::time::Instant::now();
    let mut warnings = Vec::new();
    let mut trees = Vec::with_capacity(cfg.num_trees);
    for t in 0..cfg.num_trees {
        trees.push(build_tree(
            store,
            store.ids().collect(),
            cfg.leaf_threshold,
            cfg.tree_seed(t),
            t,
            splitter,
            &mut warnings,
        )?);
    }
    Ok(Forest {
        trees,
        config: cfg.clone(),
        n: store.len(),
        dim: store.dim(),
        build_time: Some(start.elapsed()),
        warnings,
    })
}

/// (left, right) counts of `ids` under `split`.
pub(crate) fn side_counts<S: SplitRule>(split: &S, ids: &[VectorId], store: &VecStore) -> (usize, usize) {
    let left = ids
        .iter()
        .filter(|&&id| split.margin(store, store.row(id)) <= 0.0)
        .count();
    (left, ids.len() - left)
}

/// Rounding the offset to `f32` can push points that sit at the median
/// across the plane. Tries a few neighbouring `f32` offsets and keeps the
/// most balanced one (earliest on ties).
pub(crate) fn rebalance_f32<S: SplitRule>(
    ids: &[VectorId],
    store: &VecStore,
    offset: f32,
    make: impl Fn(f32) -> S,
) -> S {
    const STEPS: usize = 4;
    let split = make(offset);
    let (l, r) = side_counts(&split, ids, store);
    if l.abs_diff(r) <= 1 {
        return split;
    }
    let mut best = (l.abs_diff(r), split);
    let (mut up, mut down) = (offset, offset);
    for _ in 0..STEPS {
        up = up.next_up();
        down = down.next_down();
        for candidate in [down, up] {
            let s = make(candidate);
            let (l, r) = side_counts(&s, ids, store);
            if l.abs_diff(r) < best.0 {
                best = (l.abs_diff(r), s);
            }
        }
        if best.0 <= 1 {
            break;
        }
    }
    best.1
}
