//! Intrinsic geometry from edge lengths. Every function takes a per-edge
//! length array so the same code serves embedded and intrinsic metrics.

use num_complex::Complex64;
use thiserror::Error;

use super::Topology;

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("face {face} has zero area")]
    DegenerateFace { face: usize },
    #[error("face {face} violates the triangle inequality")]
    TriangleInequality { face: usize },
}

pub fn edge_lengths(topo: &Topology, positions: &[[f64; 3]]) -> Vec<f64> {
    (0..topo.n_edges())
        .map(|e| {
            let h = topo.edge_halfedge(e);
            let (a, b) = (positions[topo.origin(h)], positions[topo.target(h)]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        })
        .collect()
}

fn face_lengths(topo: &Topology, lengths: &[f64], f: usize) -> [f64; 3] {
    [
        lengths[topo.edge(3 * f)],
        lengths[topo.edge(3 * f + 1)],
        lengths[topo.edge(3 * f + 2)],
    ]
}

fn check(l: [f64; 3], face: usize) -> Result<(), GeometryError> {
    for k in 0..3 {
        let (a, b, c) = (l[(k + 1) % 3], l[k], l[(k + 2) % 3]);
        let s = b + c - a;
        if !(s >= 0.0) || !a.is_finite() {
            return Err(GeometryError::TriangleInequality { face });
        }
        if s == 0.0 || a <= 0.0 {
            return Err(GeometryError::DegenerateFace { face });
        }
    }
    Ok(())
}

/// Interior angles of a triangle whose halfedge `k` has length `l[k]`.
/// Angle `k` sits at the origin of halfedge `k`, opposite `l[(k+1)%3]`.
pub fn triangle_angles(l: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let (a, b, c) = (l[(k + 1) % 3], l[k], l[(k + 2) % 3]);
        let num = (a - b + c) * (a + b - c);
        let den = (a + b + c) * (-a + b + c);
        out[k] = 2.0 * (num / den).max(0.0).sqrt().atan();
    }
    out
}

/// Heron's formula in the numerically stable ordering.
pub fn face_area(l: [f64; 3]) -> f64 {
    let mut s = l;
    s.sort_by(|x, y| y.total_cmp(x));
    let (a, b, c) = (s[0], s[1], s[2]);
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * p.max(0.0).sqrt()
}

/// Corner angle per halfedge (the corner at the halfedge's origin).
pub fn corner_angles(topo: &Topology, lengths: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let mut out = vec![0.0; topo.n_halfedges()];
    for f in 0..topo.n_faces() {
        let l = face_lengths(topo, lengths, f);
        check(l, f)?;
        out[3 * f..3 * f + 3].copy_from_slice(&triangle_angles(l));
    }
    Ok(out)
}

pub fn face_areas(topo: &Topology, lengths: &[f64]) -> Result<Vec<f64>, GeometryError> {
    (0..topo.n_faces())
        .map(|f| {
            let l = face_lengths(topo, lengths, f);
            check(l, f)?;
            Ok(face_area(l))
        })
        .collect()
}

/// `2π − Σθ` at every vertex.
pub fn angle_defect(topo: &Topology, lengths: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let angles = corner_angles(topo, lengths)?;
    let mut k = vec![2.0 * std::f64::consts::PI; topo.n_vertices()];
    for (h, a) in angles.iter().enumerate() {
        k[topo.origin(h)] -= a;
    }
    Ok(k)
}

/// Cotangent weight `(cot α + cot β)/2` per edge.
pub fn cotan_weights(topo: &Topology, lengths: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let mut w = vec![0.0; topo.n_edges()];
    for f in 0..topo.n_faces() {
        let l = face_lengths(topo, lengths, f);
        check(l, f)?;
        let area = face_area(l);
        if area <= 0.0 {
            return Err(GeometryError::DegenerateFace { face: f });
        }
        for k in 0..3 {
            // Halfedge k is opposite the corner at origin of halfedge k+2.
            let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
            let cot = (b * b + c * c - a * a) / (4.0 * area);
            w[topo.edge(3 * f + k)] += 0.5 * cot;
        }
    }
    Ok(w)
}

/// Planar layout of face `f`: corner 0 at the origin, corner 1 on the
/// positive real axis, corner 2 in the upper half plane.
pub fn face_chart(topo: &Topology, lengths: &[f64], f: usize) -> [Complex64; 3] {
    chart_from_lengths(face_lengths(topo, lengths, f))
}

pub fn chart_from_lengths(l: [f64; 3]) -> [Complex64; 3] {
    let area = face_area(l);
    let x = (l[0] * l[0] + l[2] * l[2] - l[1] * l[1]) / (2.0 * l[0]);
    let y = 2.0 * area / l[0];
    [Complex64::new(0.0, 0.0), Complex64::new(l[0], 0.0), Complex64::new(x, y)]
}
