//! Random-hyperplane baseline with explicit node storage.
//!
//! Splits are chosen the ANNoy way (two random points from the subset), then
//! moved onto the median projection exactly like the anchor-pair trees, so
//! both forests are equally balanced and differ only in what a node stores:
//! here the full normal `w = p2 − p1` (`d` floats) plus the offset `b`.

use rand_chacha::ChaCha8Rng;

use crate::anchor_opt::{median, random_pair};
use crate::error::{Error, Result};
use crate::geometry::{self, Hyperplane};
use crate::search::{self, QueryResult, SearchParams};
use crate::tree::{self, BuildConfig, Forest, SplitRule, Splitter};
use crate::vecstore::{VecStore, VectorId};

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneSplit {
    pub normal: Vec<f32>,
    pub offset: f32,
}

impl SplitRule for PlaneSplit {
    const KIND: u8 = 1;
    const TAG: u8 = 2;

    #[inline]
    fn margin(&self, _store: &VecStore, q: &[f32]) -> f64 {
        let (mut wq, mut ww) = (0.0f64, 0.0f64);
        for (&w, &x) in self.normal.iter().zip(q) {
            let w = w as f64;
            wq += w * x as f64;
            ww += w * w;
        }
        if !(ww > 0.0) {
            return 0.0;
        }
        (wq - self.offset as f64) / ww.sqrt()
    }

    fn payload_len(dim: usize) -> usize {
        4 * dim + 4
    }

    fn encode(&self, out: &mut Vec<u8>) {
        for w in &self.normal {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.offset.to_le_bytes());
    }

    fn decode(payload: &[u8], dim: usize) -> Result<Self> {
        let mut floats = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let normal: Vec<f32> = floats.by_ref().take(dim).collect();
        let offset = floats.next().unwrap();
        if !offset.is_finite() || normal.iter().any(|w| !w.is_finite()) {
            return Err(Error::format("non-finite hyperplane coefficient"));
        }
        if normal.iter().all(|&w| w == 0.0) {
            return Err(Error::format("zero hyperplane normal"));
        }
        Ok(PlaneSplit { normal, offset })
    }
}

pub type BaselineForest = Forest<PlaneSplit>;

struct RandomPlaneSplitter;

impl Splitter<PlaneSplit> for RandomPlaneSplitter {
    fn choose(
        &mut self,
        ids: &[VectorId],
        store: &VecStore,
        rng: &mut ChaCha8Rng,
    ) -> Result<PlaneSplit> {
        let pair = random_pair(ids, store, rng).ok_or(Error::Unsplittable)?;
        let (p1, p2) = (store.row(pair.a()), store.row(pair.b()));
        let plane = Hyperplane::bisector(p1, p2)?;
        let mut dists: Vec<f64> = ids
            .iter()
            .map(|&id| plane.signed_distance(store.row(id)))
            .collect();
        let delta_d = median(&mut dists);
        let normal: Vec<f32> = plane.w.iter().map(|&w| w as f32).collect();
        let offset = geometry::final_offset(plane.b, delta_d, plane.w_norm());
        Ok(tree::rebalance_f32(ids, store, offset as f32, |offset| {
            PlaneSplit {
                normal: normal.clone(),
                offset,
            }
        }))
    }
}

pub fn build_baseline_forest(store: &VecStore, cfg: &BuildConfig) -> Result<BaselineForest> {
    tree::build_forest_with(store, cfg, &mut RandomPlaneSplitter)
}

pub fn baseline_query(
    forest: &BaselineForest,
    store: &VecStore,
    q: &[f32],
    params: &SearchParams,
) -> Result<QueryResult> {
    search::query(forest, store, q, params)
}
