//! Closed oriented triangle meshes: connectivity, I/O, geometry queries,
//! curves on the 1-skeleton and slicing.

mod curve;
pub mod generate;
mod geometry;
mod io;
mod point;
mod refine;
mod slice;
mod topology;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curve::{Curve, CurveGraph, CurveKind};
pub use geometry::{
    angle_defect, corner_angles, cotan_weights, edge_lengths, face_area, face_areas,
    chart_from_lengths, face_chart, triangle_angles, GeometryError,
};
pub use io::{load_mesh, load_obj_str, load_ply_bytes, save_obj};
pub use point::{PointError, SurfacePoint};
pub use refine::{insert_points, Refinement};
pub use slice::{slice_along, slice_edges, SliceError, SlicedMesh};
pub use topology::{FlipError, FlipMap, Topology};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported file format: {0}")]
    UnsupportedFormat(String),
    #[error("face {face} is not a triangle")]
    NonTriangleFace { face: usize },
    #[error("face {face} references a vertex out of range")]
    IndexOutOfRange { face: usize },
    #[error("face {face} repeats a vertex")]
    DegenerateFace { face: usize },
    #[error("edge ({v0}, {v1}) has more than two incident faces")]
    NonManifoldEdge { v0: usize, v1: usize },
    #[error("edge ({v0}, {v1}) is used twice in the same direction")]
    InconsistentOrientation { v0: usize, v1: usize },
    #[error("edge ({v0}, {v1}) lies on the boundary")]
    Boundary { v0: usize, v1: usize },
    #[error("vertex {vertex} has a non-disk neighbourhood")]
    NonManifoldVertex { vertex: usize },
    #[error("vertex {vertex} is not referenced by any face")]
    IsolatedVertex { vertex: usize },
    #[error("mesh has {count} connected components")]
    MultipleComponents { count: usize },
    #[error("mesh has no faces")]
    Empty,
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
}

/// A closed, connected, oriented triangle mesh with vertex positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    topology: Topology,
    positions: Vec<[f64; 3]>,
}

impl SurfaceMesh {
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if let Some(v) = positions.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(MeshError::NonFinite { vertex: v });
        }
        let topology = Topology::from_faces(positions.len(), faces)?;
        Ok(SurfaceMesh { topology, positions })
    }

    /// Pair existing connectivity with positions (one per vertex).
    pub fn from_parts(topology: Topology, positions: Vec<[f64; 3]>) -> Self {
        assert_eq!(topology.n_vertices(), positions.len());
        SurfaceMesh { topology, positions }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        load_mesh(path)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }
    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }
    pub fn n_vertices(&self) -> usize {
        self.topology.n_vertices()
    }
    pub fn n_edges(&self) -> usize {
        self.topology.n_edges()
    }
    pub fn n_faces(&self) -> usize {
        self.topology.n_faces()
    }
    pub fn genus(&self) -> usize {
        self.topology.genus()
    }
    pub fn euler_characteristic(&self) -> i64 {
        self.topology.euler_characteristic()
    }
    pub fn edge_lengths(&self) -> Vec<f64> {
        edge_lengths(&self.topology, &self.positions)
    }
    pub fn mean_edge_length(&self) -> f64 {
        let l = self.edge_lengths();
        l.iter().sum::<f64>() / l.len() as f64
    }
    pub fn angle_defect(&self) -> Result<Vec<f64>, GeometryError> {
        angle_defect(&self.topology, &self.edge_lengths())
    }
    pub fn total_area(&self) -> Result<f64, GeometryError> {
        Ok(face_areas(&self.topology, &self.edge_lengths())?.iter().sum())
    }
}

/// Genus from the Euler characteristic.
pub fn genus(mesh: &SurfaceMesh) -> usize {
    mesh.genus()
}

/// Per-vertex angle defect `2π − Σθ` of the embedded mesh.
pub fn angle_defect_curvature(mesh: &SurfaceMesh) -> Result<Vec<f64>, GeometryError> {
    mesh.angle_defect()
}
