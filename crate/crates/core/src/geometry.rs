//! Hyperplane arithmetic for anchor-defined partitions.
//!
//! A pair of anchors `p1`, `p2` defines the perpendicular bisector
//! `{x : wᵀx − b0 = 0}` with `w = p2 − p1` and `b0 = (‖p2‖² − ‖p1‖²) / 2`.
//! Translating it by `Δd` along `w / ‖w‖` gives the offset
//! `b = b0 + Δd·‖w‖`. Inputs are `f32`; everything accumulates in `f64`.

use crate::error::{Error, Result};

/// Which half-space a point falls in. Points on the plane are `Left`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// `{x : wᵀx − b = 0}`; `w` is not normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
    w_norm: f64,
}

impl Hyperplane {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        let w_norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(w_norm > 0.0) || !w_norm.is_finite() {
            return Err(Error::DegeneratePlane);
        }
        Ok(Hyperplane { w, b, w_norm })
    }

    /// The perpendicular bisector of two anchors (`b = b0`).
    pub fn bisector(p1: &[f32], p2: &[f32]) -> Result<Self> {
        let w = normal_vector(p1, p2)?;
        Self::new(w, base_offset(p1, p2)?)
    }

    /// The bisector of two anchors shifted by `delta_d` along `w / ‖w‖`.
    pub fn from_anchors(p1: &[f32], p2: &[f32], delta_d: f64) -> Result<Self> {
        let mut plane = Self::bisector(p1, p2)?;
        plane.b = final_offset(plane.b, delta_d, plane.w_norm);
        Ok(plane)
    }

    #[inline]
    pub fn w_norm(&self) -> f64 {
        self.w_norm
    }

    /// `wᵀx − b`, unnormalized.
    #[inline]
    pub fn eval(&self, x: &[f32]) -> f64 {
        dot_f64(&self.w, x) - self.b
    }

    #[inline]
    pub fn signed_distance(&self, x: &[f32]) -> f64 {
        self.eval(x) / self.w_norm
    }

    #[inline]
    pub fn side_of(&self, x: &[f32]) -> Side {
        side_from_value(self.eval(x))
    }
}

#[inline]
pub(crate) fn side_from_value(v: f64) -> Side {
    if v <= 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

#[inline]
pub(crate) fn dot_f64(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
}

#[inline]
pub(crate) fn sq_norm(x: &[f32]) -> f64 {
    x.iter().map(|&v| (v as f64) * (v as f64)).sum()
}

/// Squared Euclidean distance, accumulated in `f64`.
#[inline]
pub fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

#[inline]
pub(crate) fn sq_dist_f64(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y;
            d * d
        })
        .sum()
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// `p2 − p1`. Equal anchors give the zero vector; callers treat that as degenerate.
pub fn normal_vector(p1: &[f32], p2: &[f32]) -> Result<Vec<f64>> {
    check_dims(p1.len(), p2.len())?;
    Ok(p1
        .iter()
        .zip(p2)
        .map(|(&a, &b)| b as f64 - a as f64)
        .collect())
}

/// `(‖p2‖² − ‖p1‖²) / 2`.
pub fn base_offset(p1: &[f32], p2: &[f32]) -> Result<f64> {
    check_dims(p1.len(), p2.len())?;
    Ok(0.5 * (sq_norm(p2) - sq_norm(p1)))
}

/// `(wᵀx − b) / ‖w‖`.
pub fn signed_distance(x: &[f32], plane: &Hyperplane) -> Result<f64> {
    check_dims(plane.w.len(), x.len())?;
    Ok(plane.signed_distance(x))
}

/// `b0 + Δd·‖w‖`.
#[inline]
pub fn final_offset(b0: f64, delta_d: f64, w_norm: f64) -> f64 {
    b0 + delta_d * w_norm
}

pub fn side_of(x: &[f32], plane: &Hyperplane) -> Result<Side> {
    check_dims(plane.w.len(), x.len())?;
    Ok(plane.side_of(x))
}

/// Margin of `q` against the shifted bisector of `p1`, `p2`, computed in one
/// pass without materializing `w`. Returns `None` when the anchors coincide.
pub(crate) fn anchor_margin(p1: &[f32], p2: &[f32], delta_d: f64, q: &[f32]) -> Option<f64> {
    let (mut wq, mut ww, mut n1, mut n2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for ((&a, &b), &x) in p1.iter().zip(p2).zip(q) {
        let (a, b, x) = (a as f64, b as f64, x as f64);
        let w = b - a;
        wq += w * x;
        ww += w * w;
        n1 += a * a;
        n2 += b * b;
    }
    if !(ww > 0.0) {
        return None;
    }
    let w_norm = ww.sqrt();
    let b = final_offset(0.5 * (n2 - n1), delta_d, w_norm);
    Some((wq - b) / w_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_and_offset() {
        assert_eq!(normal_vector(&[0.0, 0.0], &[2.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(normal_vector(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(base_offset(&[0.0, 0.0], &[2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(base_offset(&[3.0, 4.0], &[0.0, 5.0]).unwrap(), 0.0);
        assert!(normal_vector(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn signed_distance_examples() {
        let plane = Hyperplane::bisector(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(signed_distance(&[3.0, 0.0], &plane).unwrap(), 2.0);
        assert_eq!(plane.signed_distance(&[0.0, 0.0]), -1.0);
        assert_eq!(plane.signed_distance(&[2.0, 0.0]), 1.0);
    }

    #[test]
    fn degenerate_plane() {
        assert!(matches!(
            Hyperplane::bisector(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::DegeneratePlane)
        ));
        assert!(anchor_margin(&[1.0], &[1.0], 0.0, &[0.0]).is_none());
    }

    #[test]
    fn final_offset_examples() {
        assert_eq!(final_offset(2.0, 0.5, 2.0), 3.0);
        assert_eq!(final_offset(2.0, 0.0, 7.0), 2.0);
    }

    #[test]
    fn side_examples() {
        let plane = Hyperplane::bisector(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(side_of(&[0.0, 0.0], &plane).unwrap(), Side::Left);
        assert_eq!(side_of(&[3.0, 0.0], &plane).unwrap(), Side::Right);
        assert_eq!(side_of(&[1.0, 0.0], &plane).unwrap(), Side::Left);
    }

    #[test]
    fn anchor_margin_matches_plane() {
        let p1 = [0.3f32, -1.0, 2.0];
        let p2 = [1.5f32, 0.25, -0.5];
        let q = [0.1f32, 0.2, 0.3];
        let plane = Hyperplane::from_anchors(&p1, &p2, 0.37).unwrap();
        let m = anchor_margin(&p1, &p2, 0.37, &q).unwrap();
        assert!((m - plane.signed_distance(&q)).abs() < 1e-12);
    }
}
