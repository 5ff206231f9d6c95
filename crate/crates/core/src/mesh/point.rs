use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum PointError {
    #[error("barycentric coordinates {0:?} are not a convex combination")]
    InvalidBarycentric([f64; 3]),
    #[error("face {0} does not exist")]
    NoSuchFace(usize),
}

/// A point inside (or on the boundary of) a face, in barycentric coordinates
/// with respect to the face's corners 0, 1, 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub face: usize,
    pub bary: [f64; 3],
}

impl SurfacePoint {
    pub fn new(face: usize, bary: [f64; 3]) -> Result<Self, PointError> {
        let sum: f64 = bary.iter().sum();
        if bary.iter().any(|&b| !(-1e-12..=1.0 + 1e-12).contains(&b)) || (sum - 1.0).abs() > 1e-12 {
            return Err(PointError::InvalidBarycentric(bary));
        }
        Ok(SurfacePoint { face, bary })
    }

    pub fn barycenter(face: usize) -> Self {
        SurfacePoint { face, bary: [1.0 / 3.0; 3] }
    }

    /// The point at corner `k` of `face`.
    pub fn corner(face: usize, k: usize) -> Self {
        let mut bary = [0.0; 3];
        bary[k] = 1.0;
        SurfacePoint { face, bary }
    }

    /// Position in a planar chart of the face.
    pub fn in_chart(&self, chart: &[Complex64; 3]) -> Complex64 {
        chart[0] * self.bary[0] + chart[1] * self.bary[1] + chart[2] * self.bary[2]
    }

    /// Barycentric coordinates of `z` relative to a planar triangle.
    pub fn bary_in_chart(chart: &[Complex64; 3], z: Complex64) -> [f64; 3] {
        let cross = |a: Complex64, b: Complex64| a.re * b.im - a.im * b.re;
        let total = cross(chart[1] - chart[0], chart[2] - chart[0]);
        let b1 = cross(z - chart[0], chart[2] - chart[0]) / total;
        let b2 = cross(chart[1] - chart[0], z - chart[0]) / total;
        [1.0 - b1 - b2, b1, b2]
    }

    /// Index of the corner with barycentric weight within `tol` of 1.
    pub fn at_corner(&self, tol: f64) -> Option<usize> {
        (0..3).find(|&k| self.bary[k] >= 1.0 - tol)
    }
}
