//! Storage-efficient approximate nearest neighbor search with anchor-pair
//! trees.
//!
//! Internal nodes hold two vector ids and one scalar; the splitting
//! hyperplane is the perpendicular bisector of the two referenced vectors,
//! shifted onto the median projection of the node's subset. Node size is
//! therefore independent of the vector dimension.
//!
//! ```no_run
//! use edge_ann::{build_forest, gen_synthetic, query, BuildConfig, DataGenSpec, SearchParams};
//!
//! let store = gen_synthetic(&DataGenSpec {
//!     n: 20_000, dim: 64, cluster_count: 16, cluster_stddev: 0.05, seed: 1,
//! })?;
//! let forest = build_forest(&store, &BuildConfig::default())?;
//! let hits = query(&forest, &store, store.row(0.into()), &SearchParams::new(10, 2000)?)?;
//! # Ok::<(), edge_ann::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchor_opt;
pub mod baseline_tree;
pub mod bench;
pub mod edge_tree;
pub mod error;
pub mod geometry;
pub mod persist;
pub mod search;
pub mod tree;
pub mod vecstore;

pub use anchor_opt::{optimize_anchors, AnchorResult, CandidatePair, OptimizerConfig};
pub use baseline_tree::{baseline_query, build_baseline_forest, BaselineForest, PlaneSplit};
pub use edge_tree::{build_forest, build_node, AnchorForest, AnchorSplit};
pub use error::{Error, Result};
pub use geometry::{Hyperplane, Side};
pub use persist::{
    decode, deserialize, encode, predict_size, serialize, AnyForest, IndexKind, LoadedIndex,
    SizeReport,
};
pub use search::{brute_force_knn, query, Neighbor, QueryResult, SearchParams};
pub use tree::{tree_stats, BuildConfig, Forest, Node, StatsReport, Tree};
pub use vecstore::{
    gen_synthetic, load_csv, load_fvecs, parse_csv, parse_fvecs, DataGenSpec, VecStore, VectorId,
};
