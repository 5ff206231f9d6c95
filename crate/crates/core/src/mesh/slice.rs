//! Cutting a closed mesh open along an edge set.
//!
//! Faces and halfedge ids are shared with the closed mesh; only vertices are
//! duplicated, one copy per wedge of faces between consecutive cut edges.

use thiserror::Error;

use super::{CurveGraph, Topology};

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum SliceError {
    #[error("cut splits the surface into {components} pieces")]
    Disconnected { components: usize },
}

#[derive(Clone, Debug)]
pub struct SlicedMesh {
    /// Sliced vertex at the origin of each halfedge (i.e. at each corner).
    pub corner_vertex: Vec<usize>,
    /// Closed-mesh vertex of each sliced vertex.
    pub vertex_origin: Vec<usize>,
    /// Cut flag per closed-mesh edge.
    pub cut: Vec<bool>,
    /// Triangles over sliced vertex ids, same order as the closed mesh.
    pub faces: Vec<[usize; 3]>,
}

impl SlicedMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertex_origin.len()
    }
    pub fn n_cut_edges(&self) -> usize {
        self.cut.iter().filter(|&&c| c).count()
    }
    pub fn euler_characteristic(&self, topo: &Topology) -> i64 {
        let e = topo.n_edges() + self.n_cut_edges();
        self.n_vertices() as i64 - e as i64 + topo.n_faces() as i64
    }
    pub fn is_boundary(&self, topo: &Topology, h: usize) -> bool {
        self.cut[topo.edge(h)]
    }
    /// Next boundary halfedge after `h` along the boundary (interior on the left).
    pub fn next_boundary(&self, topo: &Topology, h: usize) -> usize {
        let mut n = topo.next(h);
        while !self.cut[topo.edge(n)] {
            n = topo.next(topo.twin(n));
        }
        n
    }
    /// Boundary cycles as halfedge sequences, ordered by smallest member.
    pub fn boundary_loops(&self, topo: &Topology) -> Vec<Vec<usize>> {
        let mut seen = vec![false; topo.n_halfedges()];
        let mut loops = Vec::new();
        for h0 in 0..topo.n_halfedges() {
            if seen[h0] || !self.cut[topo.edge(h0)] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut h = h0;
            while !seen[h] {
                seen[h] = true;
                cycle.push(h);
                h = self.next_boundary(topo, h);
            }
            loops.push(cycle);
        }
        loops
    }
    /// Sliced vertex ids that lie on the boundary.
    pub fn boundary_vertices(&self, topo: &Topology) -> Vec<bool> {
        let mut on = vec![false; self.n_vertices()];
        for h in 0..topo.n_halfedges() {
            if self.cut[topo.edge(h)] {
                on[self.corner_vertex[h]] = true;
                on[self.corner_vertex[topo.next(h)]] = true;
            }
        }
        on
    }
}

pub fn slice_along(topo: &Topology, cut: &CurveGraph) -> Result<SlicedMesh, SliceError> {
    slice_edges(topo, &cut.edge_mask(topo))
}

pub fn slice_edges(topo: &Topology, cut: &[bool]) -> Result<SlicedMesh, SliceError> {
    let nh = topo.n_halfedges();
    let mut corner_vertex = vec![usize::MAX; nh];
    let mut vertex_origin = Vec::new();
    for v in 0..topo.n_vertices() {
        let out: Vec<usize> = topo.outgoing(v).collect();
        let start = out.iter().position(|&h| cut[topo.edge(h)]).unwrap_or(0);
        for i in 0..out.len() {
            let h = out[(start + i) % out.len()];
            if i == 0 || cut[topo.edge(h)] {
                vertex_origin.push(v);
            }
            corner_vertex[h] = vertex_origin.len() - 1;
        }
    }
    let nf = topo.n_faces();
    let mut comp = vec![usize::MAX; nf];
    let mut components = 0;
    for s in 0..nf {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = components;
        let mut stack = vec![s];
        while let Some(f) = stack.pop() {
            for k in 0..3 {
                let h = 3 * f + k;
                if cut[topo.edge(h)] {
                    continue;
                }
                let g = topo.face_of(topo.twin(h));
                if comp[g] == usize::MAX {
                    comp[g] = components;
                    stack.push(g);
                }
            }
        }
        components += 1;
    }
    if components > 1 {
        return Err(SliceError::Disconnected { components });
    }
    let faces = (0..nf)
        .map(|f| [corner_vertex[3 * f], corner_vertex[3 * f + 1], corner_vertex[3 * f + 2]])
        .collect();
    Ok(SlicedMesh { corner_vertex, vertex_origin, cut: cut.to_vec(), faces })
}
