//! Dense vector storage and dataset ingestion.
//!
//! A [`VecStore`] is an immutable row-major `n × dim` table of `f32`
//! scalars. Every tree in a forest refers to vectors by [`VectorId`], so the
//! store is the single source of truth for coordinates.
//!
//! Synthetic data uses `ChaCha8Rng` (from `rand_chacha`) seeded with the
//! 64-bit seed of the [`DataGenSpec`], with Gaussian noise drawn through
//! `rand_distr::StandardNormal`. The draw order is: all cluster centers
//! (uniform in `[0, 1)`, center-major), then for each vector one uniform
//! cluster index followed by `dim` normal samples.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a vector inside a [`VecStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorId(pub u32);

impl VectorId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for VectorId {
    fn from(v: u32) -> Self {
        VectorId(v)
    }
}

impl fmt::Display for VectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, PartialEq)]
pub struct VecStore {
    n: usize,
    dim: usize,
    data: Vec<f32>,
}

impl fmt::Debug for VecStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VecStore")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .finish()
    }
}

impl VecStore {
    /// Wraps a row-major buffer. `data.len()` must equal `n * dim`.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "buffer of {} scalars is not a multiple of dim {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if n > u32::MAX as usize {
            return Err(Error::invalid("more than 2^32-1 vectors"));
        }
        Ok(VecStore { n, dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Checked row access.
    pub fn get(&self, id: VectorId) -> Result<&[f32]> {
        if id.index() >= self.n {
            return Err(Error::OutOfRange { id: id.0, n: self.n });
        }
        Ok(self.row(id))
    }

    /// Row access for ids already known to be valid. Panics otherwise.
    #[inline]
    pub fn row(&self, id: VectorId) -> &[f32] {
        let start = id.index() * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = VectorId> {
        (0..self.n as u32).map(VectorId)
    }

    /// Copies the given rows into a new store, in order.
    pub fn subset(&self, ids: &[VectorId]) -> Result<Self> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            data.extend_from_slice(self.get(id)?);
        }
        Self::from_flat(self.dim, data)
    }

    pub fn to_fvecs_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n * (4 + 4 * self.dim));
        for row in self.rows() {
            out.extend_from_slice(&(self.dim as i32).to_le_bytes());
            for x in row {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn write_fvecs(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_fvecs_bytes())?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for row in self.rows() {
            let mut first = true;
            for x in row {
                if !first {
                    out.push(',');
                }
                first = false;
                // `{}` on f32 prints the shortest round-tripping form.
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Decodes an in-memory fvecs buffer.
pub fn parse_fvecs(bytes: &[u8]) -> Result<VecStore> {
    if bytes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut pos = 0usize;
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    while pos < bytes.len() {
        let header = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| Error::format(format!("truncated record header at byte {pos}")))?;
        let declared = i32::from_le_bytes(header.try_into().unwrap());
        if declared <= 0 {
            return Err(Error::format(format!(
                "non-positive dimension {declared} at byte {pos}"
            )));
        }
        let d = declared as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(format!(
                    "inconsistent dimension at byte {pos}: expected {expected}, found {d}"
                )));
            }
            Some(_) => {}
        }
        pos += 4;
        let body_len = d
            .checked_mul(4)
            .ok_or_else(|| Error::format("dimension overflow"))?;
        let body = bytes
            .get(pos..pos.saturating_add(body_len))
            .ok_or_else(|| Error::format(format!("truncated record body at byte {pos}")))?;
        data.extend(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
        );
        pos += body_len;
    }
    VecStore::from_flat(dim.unwrap(), data)
}

pub fn load_fvecs(path: impl AsRef<Path>) -> Result<VecStore> {
    parse_fvecs(&fs::read(path)?)
}

/// Decodes headerless comma-separated text, one vector per line.
pub fn parse_csv(text: &str) -> Result<VecStore> {
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = 0usize;
        for cell in line.split(',') {
            let v: f32 = cell.trim().parse().map_err(|_| {
                Error::format(format!(
                    "line {}: non-numeric cell {:?}",
                    lineno + 1,
                    cell.trim()
                ))
            })?;
            data.push(v);
            cols += 1;
        }
        match dim {
            None => dim = Some(cols),
            Some(expected) if expected != cols => {
                return Err(Error::format(format!(
                    "line {}: ragged row with {cols} columns, expected {expected}",
                    lineno + 1
                )));
            }
            Some(_) => {}
        }
    }
    match dim {
        None => Err(Error::EmptyDataset),
        Some(d) => VecStore::from_flat(d, data),
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<VecStore> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::format(format!("not UTF-8: {e}")))?;
    parse_csv(text)
}

/// Loads by extension: `.csv` / `.txt` as CSV, anything else as fvecs.
pub fn load_auto(path: impl AsRef<Path>) -> Result<VecStore> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") || ext.eq_ignore_ascii_case("txt") => {
            load_csv(path)
        }
        _ => load_fvecs(path),
    }
}

/// Parameters of a Gaussian-mixture dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataGenSpec {
    pub n: usize,
    pub dim: usize,
    pub cluster_count: usize,
    pub cluster_stddev: f64,
    pub seed: u64,
}

impl DataGenSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        if self.cluster_count == 0 {
            return Err(Error::invalid("cluster_count must be at least 1"));
        }
        if !(self.cluster_stddev > 0.0) {
            return Err(Error::invalid("cluster_stddev must be positive"));
        }
        Ok(())
    }
}

pub fn gen_synthetic(spec: &DataGenSpec) -> Result<VecStore> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<f64> = (0..spec.cluster_count * spec.dim)
        .map(|_| rng.random::<f64>())
        .collect();
    Ok(sample_mixture(spec, &centers, rng))
}

/// Like [`gen_synthetic`] but with caller-supplied cluster centers
/// (`cluster_count × dim`, row-major). No uniform center draws are made.
pub fn gen_synthetic_with_centers(spec: &DataGenSpec, centers: &[f64]) -> Result<VecStore> {
    spec.validate()?;
    if centers.len() != spec.cluster_count * spec.dim {
        return Err(Error::invalid(format!(
            "expected {} center coordinates, got {}",
            spec.cluster_count * spec.dim,
            centers.len()
        )));
    }
    let rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(sample_mixture(spec, centers, rng))
}

fn sample_mixture(spec: &DataGenSpec, centers: &[f64], mut rng: ChaCha8Rng) -> VecStore {
    let mut data = Vec::with_capacity(spec.n * spec.dim);
    for _ in 0..spec.n {
        let c = rng.random_range(0..spec.cluster_count);
        let center = &centers[c * spec.dim..(c + 1) * spec.dim];
        for &mu in center {
            let z: f64 = rng.sample(StandardNormal);
            data.push((mu + spec.cluster_stddev * z) as f32);
        }
    }
    VecStore {
        n: spec.n,
        dim: spec.dim,
        data,
    }
}
