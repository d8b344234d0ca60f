//! Index files.
//!
//! Little-endian throughout. Layout (see `FORMAT.md` at the repository root):
//!
//! ```text
//! header   magic "EANN" | version u16 | kind u8 | n u64 | dim u32
//!          | num_trees u32 | leaf_threshold u32 | flags u32 | build_seed u64
//! vectors  n × dim f32                       (only when flags bit 0 is set)
//! tree ×num_trees
//!          node_count u32, then node_count nodes in preorder:
//!          leaf      tag 0 | count u32 | count × id u32
//!          internal  tag (1 anchor, 2 plane) | right_skip u32 | payload
//! ```
//!
//! `right_skip` is the distance in nodes from an internal node to its right
//! child; its left child always follows it directly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::baseline_tree::{BaselineForest, PlaneSplit};
use crate::edge_tree::{AnchorForest, AnchorSplit};
use crate::error::{Error, Result};
use crate::tree::{BuildConfig, Forest, Node, SplitRule, Tree};
use crate::vecstore::{VecStore, VectorId};

pub const MAGIC: [u8; 4] = *b"EANN";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 39;
pub const FLAG_VECTORS_EMBEDDED: u32 = 1;

const LEAF_TAG: u8 = 0;
/// tag + right_skip
const INTERNAL_OVERHEAD: usize = 5;
/// tag + count
const LEAF_OVERHEAD: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Edge,
    Baseline,
}

impl IndexKind {
    pub fn code(self) -> u8 {
        match self {
            IndexKind::Edge => AnchorSplit::KIND,
            IndexKind::Baseline => PlaneSplit::KIND,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            c if c == AnchorSplit::KIND => Ok(IndexKind::Edge),
            c if c == PlaneSplit::KIND => Ok(IndexKind::Baseline),
            other => Err(Error::format(format!("unknown index kind {other}"))),
        }
    }

    /// Serialized payload bytes of one internal node.
    pub fn internal_payload(self, dim: usize) -> usize {
        match self {
            IndexKind::Edge => AnchorSplit::payload_len(dim),
            IndexKind::Baseline => PlaneSplit::payload_len(dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexHeader {
    pub format_version: u16,
    pub kind: u8,
    pub n: u64,
    pub dim: u32,
    pub num_trees: u32,
    pub leaf_threshold: u32,
    pub flags: u32,
    pub build_seed: u64,
}

impl IndexHeader {
    pub fn vectors_embedded(&self) -> bool {
        self.flags & FLAG_VECTORS_EMBEDDED != 0
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.push(self.kind);
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&self.num_trees.to_le_bytes());
        out.extend_from_slice(&self.leaf_threshold.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        out.extend_from_slice(&self.build_seed.to_le_bytes());
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        if r.take(4)? != MAGIC {
            return Err(Error::format("bad magic"));
        }
        let format_version = r.u16()?;
        if format_version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported format version {format_version}"
            )));
        }
        let h = IndexHeader {
            format_version,
            kind: r.u8()?,
            n: r.u64()?,
            dim: r.u32()?,
            num_trees: r.u32()?,
            leaf_threshold: r.u32()?,
            flags: r.u32()?,
            build_seed: r.u64()?,
        };
        IndexKind::from_code(h.kind)?;
        if h.n == 0 || h.n > u32::MAX as u64 {
            return Err(Error::format(format!("invalid vector count {}", h.n)));
        }
        if h.dim == 0 {
            return Err(Error::format("zero dimension"));
        }
        if h.num_trees == 0 {
            return Err(Error::format("zero trees"));
        }
        if h.leaf_threshold < 2 {
            return Err(Error::format("leaf threshold below 2"));
        }
        if h.flags & !FLAG_VECTORS_EMBEDDED != 0 {
            return Err(Error::format(format!("unknown flags {:#x}", h.flags)));
        }
        Ok(h)
    }
}

/// Byte breakdown of an index file. `total_bytes` is the file length.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    pub header_bytes: u64,
    pub vector_bytes: u64,
    /// `node_count` words, one per tree.
    pub tree_header_bytes: u64,
    /// Tags, right-child skips and leaf counts.
    pub node_overhead_bytes: u64,
    /// Internal node payloads only (12 or 4·dim + 4 bytes each).
    pub internal_node_bytes: u64,
    /// Leaf id lists (4 bytes per id).
    pub leaf_bytes: u64,
    pub total_bytes: u64,
    pub internal_nodes: u64,
    pub leaf_nodes: u64,
    /// Internal payload bytes expected for perfectly balanced trees.
    pub predicted_internal_bytes: u64,
}

impl SizeReport {
    /// Everything except the header and embedded vectors.
    pub fn structure_bytes(&self) -> u64 {
        self.tree_header_bytes + self.node_overhead_bytes + self.internal_node_bytes + self.leaf_bytes
    }
}

/// Byte accounting for `forest` as [`encode`] would write it.
pub fn size_report<S: SplitRule>(forest: &Forest<S>, embed_vectors: bool) -> SizeReport {
    let payload = S::payload_len(forest.dim) as u64;
    let mut r = SizeReport {
        header_bytes: HEADER_BYTES as u64,
        vector_bytes: if embed_vectors {
            (forest.n * forest.dim * 4) as u64
        } else {
            0
        },
        tree_header_bytes: 4 * forest.trees.len() as u64,
        ..Default::default()
    };
    for t in &forest.trees {
        for node in &t.nodes {
            match node {
                Node::Split { .. } => {
                    r.internal_nodes += 1;
                    r.node_overhead_bytes += INTERNAL_OVERHEAD as u64;
                    r.internal_node_bytes += payload;
                }
                Node::Leaf { ids } => {
                    r.leaf_nodes += 1;
                    r.node_overhead_bytes += LEAF_OVERHEAD as u64;
                    r.leaf_bytes += 4 * ids.len() as u64;
                }
            }
        }
    }
    r.total_bytes = r.header_bytes + r.vector_bytes + r.structure_bytes();
    r.predicted_internal_bytes = forest.trees.len() as u64
        * balanced_internal_count(forest.n, forest.config.leaf_threshold)
        * payload;
    r
}

/// Serializes `forest` (plus `store` when embedding) into a byte buffer.
pub fn encode<S: SplitRule>(
    forest: &Forest<S>,
    store: &VecStore,
    embed_vectors: bool,
) -> Result<(Vec<u8>, SizeReport)> {
    forest.check_store(store)?;
    let report = size_report(forest, embed_vectors);
    let mut out = Vec::with_capacity(report.total_bytes as usize);
    IndexHeader {
        format_version: FORMAT_VERSION,
        kind: S::KIND,
        n: forest.n as u64,
        dim: forest.dim as u32,
        num_trees: forest.trees.len() as u32,
        leaf_threshold: forest.config.leaf_threshold as u32,
        flags: if embed_vectors { FLAG_VECTORS_EMBEDDED } else { 0 },
        build_seed: forest.config.seed,
    }
    .write(&mut out);
    if embed_vectors {
        for x in store.as_flat() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    for t in &forest.trees {
        out.extend_from_slice(&(t.nodes.len() as u32).to_le_bytes());
        for (i, node) in t.nodes.iter().enumerate() {
            match node {
                Node::Leaf { ids } => {
                    out.push(LEAF_TAG);
                    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
                    for id in ids {
                        out.extend_from_slice(&id.0.to_le_bytes());
                    }
                }
                Node::Split { split, right } => {
                    out.push(S::TAG);
                    out.extend_from_slice(&(*right - i as u32).to_le_bytes());
                    split.encode(&mut out);
                }
            }
        }
    }
    debug_assert_eq!(out.len() as u64, report.total_bytes);
    Ok((out, report))
}

pub fn serialize<S: SplitRule>(
    forest: &Forest<S>,
    store: &VecStore,
    path: impl AsRef<Path>,
    embed_vectors: bool,
) -> Result<SizeReport> {
    let (bytes, report) = encode(forest, store, embed_vectors)?;
    fs::write(path, bytes)?;
    Ok(report)
}

/// A decoded forest of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyForest {
    Edge(AnchorForest),
    Baseline(BaselineForest),
}

impl AnyForest {
    pub fn kind(&self) -> IndexKind {
        match self {
            AnyForest::Edge(_) => IndexKind::Edge,
            AnyForest::Baseline(_) => IndexKind::Baseline,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyForest::Edge(f) => f.len(),
            AnyForest::Baseline(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyForest::Edge(f) => f.dim(),
            AnyForest::Baseline(f) => f.dim(),
        }
    }

    pub fn size_report(&self, embed_vectors: bool) -> SizeReport {
        match self {
            AnyForest::Edge(f) => size_report(f, embed_vectors),
            AnyForest::Baseline(f) => size_report(f, embed_vectors),
        }
    }

    pub fn stats(&self) -> crate::tree::StatsReport {
        match self {
            AnyForest::Edge(f) => crate::tree::tree_stats(f),
            AnyForest::Baseline(f) => crate::tree::tree_stats(f),
        }
    }

    pub fn query(
        &self,
        store: &VecStore,
        q: &[f32],
        params: &crate::search::SearchParams,
    ) -> Result<crate::search::QueryResult> {
        match self {
            AnyForest::Edge(f) => crate::search::query(f, store, q, params),
            AnyForest::Baseline(f) => crate::search::query(f, store, q, params),
        }
    }

    pub fn encode(&self, store: &VecStore, embed_vectors: bool) -> Result<(Vec<u8>, SizeReport)> {
        match self {
            AnyForest::Edge(f) => encode(f, store, embed_vectors),
            AnyForest::Baseline(f) => encode(f, store, embed_vectors),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedIndex {
    pub header: IndexHeader,
    pub forest: AnyForest,
    /// Present when the file embeds its vectors.
    pub store: Option<VecStore>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(Error::format(format!(
                "truncated: need {len} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes an index buffer, validating structure and id ranges.
pub fn decode(bytes: &[u8]) -> Result<LoadedIndex> {
    let mut r = Reader { bytes, pos: 0 };
    let header = IndexHeader::read(&mut r)?;
    let n = header.n as usize;
    let dim = header.dim as usize;

    let store = if header.vectors_embedded() {
        let len = n
            .checked_mul(dim)
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::format("vector block size overflows"))?;
        let block = r.take(len)?;
        let data = block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Some(VecStore::from_flat(dim, data)?)
    } else {
        None
    };

    let forest = match IndexKind::from_code(header.kind)? {
        IndexKind::Edge => AnyForest::Edge(read_forest(&mut r, &header)?),
        IndexKind::Baseline => AnyForest::Baseline(read_forest(&mut r, &header)?),
    };
    if r.remaining() != 0 {
        return Err(Error::format(format!(
            "{} trailing bytes after last tree",
            r.remaining()
        )));
    }
    Ok(LoadedIndex {
        header,
        forest,
        store,
    })
}

pub fn deserialize(path: impl AsRef<Path>) -> Result<LoadedIndex> {
    decode(&fs::read(path)?)
}

fn check_id(id: u32, n: usize) -> Result<VectorId> {
    if id as usize >= n {
        return Err(Error::format(format!(
            "dangling vector id {id} (n = {n})"
        )));
    }
    Ok(VectorId(id))
}

fn read_forest<S: SplitRule>(r: &mut Reader<'_>, h: &IndexHeader) -> Result<Forest<S>> {
    let n = h.n as usize;
    let dim = h.dim as usize;
    let payload_len = S::payload_len(dim);
    let mut trees = Vec::new();
    for _ in 0..h.num_trees {
        let count = r.u32()? as usize;
        if count == 0 {
            return Err(Error::format("tree with no nodes"));
        }
        // Every node occupies at least five bytes.
        if count > r.remaining() / LEAF_OVERHEAD {
            return Err(Error::format("node count exceeds remaining bytes"));
        }
        let mut nodes = Vec::with_capacity(count);
        for i in 0..count {
            let tag = r.u8()?;
            if tag == LEAF_TAG {
                let len = r.u32()? as usize;
                if len == 0 {
                    return Err(Error::format("empty leaf"));
                }
                let raw = r.take(
                    len.checked_mul(4)
                        .ok_or_else(|| Error::format("leaf size overflows"))?,
                )?;
                let ids = raw
                    .chunks_exact(4)
                    .map(|c| check_id(u32::from_le_bytes(c.try_into().unwrap()), n))
                    .collect::<Result<Vec<_>>>()?;
                nodes.push(Node::Leaf { ids });
            } else if tag == S::TAG {
                let skip = r.u32()? as usize;
                let split = S::decode(r.take(payload_len)?, dim)?;
                for id in split.referenced_ids() {
                    check_id(id.0, n)?;
                }
                let right = i
                    .checked_add(skip)
                    .filter(|&j| skip >= 2 && j < count)
                    .ok_or_else(|| Error::format(format!("bad right-child skip {skip}")))?;
                nodes.push(Node::Split {
                    split,
                    right: right as u32,
                });
            } else {
                return Err(Error::format(format!("unexpected node tag {tag}")));
            }
        }
        check_preorder(&nodes)?;
        trees.push(Tree::from_nodes(nodes));
    }
    Ok(Forest {
        trees,
        config: BuildConfig {
            leaf_threshold: h.leaf_threshold as usize,
            num_trees: h.num_trees as usize,
            seed: h.build_seed,
            ..Default::default()
        },
        n,
        dim,
        build_time: None,
        warnings: Vec::new(),
    })
}

/// Checks that `nodes` is exactly one binary tree in preorder and that every
/// right-child index points just past its left subtree.
fn check_preorder<S>(nodes: &[Node<S>]) -> Result<()> {
    let mut sizes: Vec<usize> = Vec::new();
    for (i, node) in nodes.iter().enumerate().rev() {
        match node {
            Node::Leaf { .. } => sizes.push(1),
            Node::Split { right, .. } => {
                let left = sizes.pop();
                let right_size = sizes.pop();
                let (Some(left), Some(right_size)) = (left, right_size) else {
                    return Err(Error::format("internal node is missing a child"));
                };
                if *right as usize != i + 1 + left {
                    return Err(Error::format("right-child skip disagrees with tree shape"));
                }
                sizes.push(1 + left + right_size);
            }
        }
    }
    if sizes.len() != 1 {
        return Err(Error::format("node list is not a single tree"));
    }
    Ok(())
}

/// Internal-node count of a tree whose every split halves its subset
/// (`⌈m/2⌉ | ⌊m/2⌋`) until subsets hold at most `leaf_threshold` items.
pub fn balanced_internal_count(n: usize, leaf_threshold: usize) -> u64 {
    fn go(m: usize, t: usize, memo: &mut HashMap<usize, u64>) -> u64 {
        if m <= t {
            return 0;
        }
        if let Some(&c) = memo.get(&m) {
            return c;
        }
        let c = 1 + go(m.div_ceil(2), t, memo) + go(m / 2, t, memo);
        memo.insert(m, c);
        c
    }
    go(n, leaf_threshold.max(1), &mut HashMap::new())
}

/// Closed-form file size for balanced trees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizePrediction {
    pub internal_nodes_per_tree: u64,
    pub internal_bytes: u64,
    pub total_bytes: u64,
}

pub fn predict_size(
    n: usize,
    dim: usize,
    leaf_threshold: usize,
    num_trees: usize,
    kind: IndexKind,
    embed_vectors: bool,
) -> Result<SizePrediction> {
    if n == 0 || dim == 0 || leaf_threshold == 0 || num_trees == 0 {
        return Err(Error::invalid("size prediction needs positive arguments"));
    }
    let internal = balanced_internal_count(n, leaf_threshold);
    let leaves = internal + 1;
    let payload = kind.internal_payload(dim) as u64;
    let per_tree = 4
        + internal * (INTERNAL_OVERHEAD as u64 + payload)
        + leaves * LEAF_OVERHEAD as u64
        + 4 * n as u64;
    let vectors = if embed_vectors {
        4 * (n * dim) as u64
    } else {
        0
    };
    Ok(SizePrediction {
        internal_nodes_per_tree: internal,
        internal_bytes: num_trees as u64 * internal * payload,
        total_bytes: HEADER_BYTES as u64 + vectors + num_trees as u64 * per_tree,
    })
}
