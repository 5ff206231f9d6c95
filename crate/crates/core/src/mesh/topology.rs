//! Halfedge connectivity of a closed oriented triangle surface.
//!
//! Halfedge `3f + k` runs from corner `k` of face `f` to corner `k + 1`, so
//! `next`, `prev` and `face` are arithmetic and only `twin` is stored. The
//! same halfedge id also names the corner at its origin.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MeshError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    faces: Vec<[usize; 3]>,
    twin: Vec<usize>,
    edge_of: Vec<usize>,
    edge_halfedge: Vec<usize>,
    vertex_halfedge: Vec<usize>,
}

/// Old-to-new halfedge slots for the six halfedges rewritten by a flip.
#[derive(Clone, Debug)]
pub struct FlipMap {
    pub old: [usize; 6],
    pub new: [usize; 6],
    /// The two faces of the flipped quad (unchanged ids).
    pub faces: [usize; 2],
}

impl FlipMap {
    pub fn map(&self, h: usize) -> usize {
        for k in 0..6 {
            if self.old[k] == h {
                return self.new[k];
            }
        }
        h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlipError {
    /// Both sides of the edge belong to the same face.
    SelfAdjacent,
    /// The new diagonal would join a vertex to itself.
    LoopEdge,
    /// A side of the quad is glued to another side of the same quad.
    FoldedQuad,
}

impl Topology {
    /// Build connectivity from oriented triangles, validating that the result
    /// is a closed, connected, consistently oriented 2-manifold.
    pub fn from_faces(n_vertices: usize, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        for (f, tri) in faces.iter().enumerate() {
            if tri.iter().any(|&v| v >= n_vertices) {
                return Err(MeshError::IndexOutOfRange { face: f });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
                return Err(MeshError::DegenerateFace { face: f });
            }
        }
        let nh = 3 * faces.len();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(nh);
        let mut undirected: HashMap<(usize, usize), u32> = HashMap::with_capacity(nh);
        for (f, tri) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *undirected.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                if directed.insert((a, b), 3 * f + k).is_some() {
                    let count = undirected[&(a.min(b), a.max(b))];
                    return Err(if count > 2 {
                        MeshError::NonManifoldEdge { v0: a, v1: b }
                    } else {
                        MeshError::InconsistentOrientation { v0: a, v1: b }
                    });
                }
            }
        }
        for (&(a, b), &count) in &undirected {
            if count > 2 {
                return Err(MeshError::NonManifoldEdge { v0: a, v1: b });
            }
        }
        let mut twin = vec![usize::MAX; nh];
        for (&(a, b), &h) in &directed {
            match directed.get(&(b, a)) {
                Some(&t) => twin[h] = t,
                None => return Err(MeshError::Boundary { v0: a, v1: b }),
            }
        }
        let mut edge_of = vec![usize::MAX; nh];
        let mut edge_halfedge = Vec::with_capacity(nh / 2);
        for h in 0..nh {
            if edge_of[h] == usize::MAX {
                edge_of[h] = edge_halfedge.len();
                edge_of[twin[h]] = edge_halfedge.len();
                edge_halfedge.push(h);
            }
        }
        let mut vertex_halfedge = vec![usize::MAX; n_vertices];
        let mut outgoing = vec![0usize; n_vertices];
        for h in 0..nh {
            let v = faces[h / 3][h % 3];
            outgoing[v] += 1;
            if vertex_halfedge[v] == usize::MAX {
                vertex_halfedge[v] = h;
            }
        }
        if let Some(v) = vertex_halfedge.iter().position(|&h| h == usize::MAX) {
            return Err(MeshError::IsolatedVertex { vertex: v });
        }
        let topo = Topology { faces, twin, edge_of, edge_halfedge, vertex_halfedge };
        for v in 0..n_vertices {
            if topo.outgoing(v).count() != outgoing[v] {
                return Err(MeshError::NonManifoldVertex { vertex: v });
            }
        }
        let components = topo.face_components();
        if components > 1 {
            return Err(MeshError::MultipleComponents { count: components });
        }
        Ok(topo)
    }

    fn face_components(&self) -> usize {
        let nf = self.n_faces();
        let mut seen = vec![false; nf];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..nf {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(f) = stack.pop() {
                for k in 0..3 {
                    let g = self.face_of(self.twin[3 * f + k]);
                    if !seen[g] {
                        seen[g] = true;
                        stack.push(g);
                    }
                }
            }
        }
        count
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_halfedge.len()
    }
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edge_halfedge.len()
    }
    pub fn n_halfedges(&self) -> usize {
        self.twin.len()
    }
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }
    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }
    #[inline]
    pub fn origin(&self, h: usize) -> usize {
        self.faces[h / 3][h % 3]
    }
    #[inline]
    pub fn target(&self, h: usize) -> usize {
        self.faces[h / 3][(h % 3 + 1) % 3]
    }
    #[inline]
    pub fn next(&self, h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 1) % 3
    }
    #[inline]
    pub fn prev(&self, h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 2) % 3
    }
    #[inline]
    pub fn twin(&self, h: usize) -> usize {
        self.twin[h]
    }
    #[inline]
    pub fn face_of(&self, h: usize) -> usize {
        h / 3
    }
    #[inline]
    pub fn edge(&self, h: usize) -> usize {
        self.edge_of[h]
    }
    /// Canonical halfedge of an edge.
    #[inline]
    pub fn edge_halfedge(&self, e: usize) -> usize {
        self.edge_halfedge[e]
    }
    /// +1 if `h` is the canonical orientation of its edge, −1 otherwise.
    #[inline]
    pub fn edge_sign(&self, h: usize) -> f64 {
        if self.edge_halfedge[self.edge_of[h]] == h {
            1.0
        } else {
            -1.0
        }
    }
    /// Halfedge opposite the corner `h` (the corner at `origin(h)`).
    #[inline]
    pub fn opposite(&self, h: usize) -> usize {
        self.next(h)
    }
    pub fn vertex_halfedge(&self, v: usize) -> usize {
        self.vertex_halfedge[v]
    }

    /// Outgoing halfedges of `v` in counter-clockwise order.
    pub fn outgoing(&self, v: usize) -> Outgoing<'_> {
        let start = self.vertex_halfedge[v];
        Outgoing { topo: self, start, current: Some(start) }
    }

    /// Counter-clockwise successor of an outgoing halfedge around its origin.
    #[inline]
    pub fn ccw(&self, h: usize) -> usize {
        self.twin[self.prev(h)]
    }
    /// Clockwise successor of an outgoing halfedge around its origin.
    #[inline]
    pub fn cw(&self, h: usize) -> usize {
        self.next(self.twin[h])
    }

    pub fn valence(&self, v: usize) -> usize {
        self.outgoing(v).count()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    pub fn genus(&self) -> usize {
        ((2 - self.euler_characteristic()) / 2) as usize
    }

    /// Halfedge from `a` to `b`, if any (first in rotation order).
    pub fn find_halfedge(&self, a: usize, b: usize) -> Option<usize> {
        self.outgoing(a).find(|&h| self.target(h) == b)
    }

    /// Neighbouring vertices of `v` in counter-clockwise order.
    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.outgoing(v).map(move |h| self.target(h))
    }

    /// Flip the edge `e` inside its two incident triangles. Edge and face ids
    /// are stable; the six halfedges of the quad are rewritten and their
    /// old-to-new slot map is returned.
    pub fn flip(&mut self, e: usize) -> Result<FlipMap, FlipError> {
        let h = self.edge_halfedge[e];
        let t = self.twin[h];
        let (f1, f2) = (h / 3, t / 3);
        if f1 == f2 {
            return Err(FlipError::SelfAdjacent);
        }
        let (n1, p1, n2, p2) = (self.next(h), self.prev(h), self.next(t), self.prev(t));
        let (a, b, c, d) = (self.origin(h), self.target(h), self.origin(p1), self.origin(p2));
        if c == d {
            return Err(FlipError::LoopEdge);
        }
        let quad = [h, t, n1, p1, n2, p2];
        for &s in &quad[2..] {
            if quad.contains(&self.twin[s]) {
                return Err(FlipError::FoldedQuad);
            }
        }
        let old = [p1, n2, h, p2, n1, t];
        let new = [3 * f1, 3 * f1 + 1, 3 * f1 + 2, 3 * f2, 3 * f2 + 1, 3 * f2 + 2];
        let map = FlipMap { old, new, faces: [f1, f2] };
        let outer: Vec<(usize, usize, usize)> = old
            .iter()
            .map(|&o| (o, self.twin[o], self.edge_of[o]))
            .collect();
        self.faces[f1] = [c, a, d];
        self.faces[f2] = [d, b, c];
        for k in 0..6 {
            let (o, tw, ed) = outer[k];
            let s = new[k];
            self.edge_of[s] = ed;
            if o == h || o == t {
                continue;
            }
            self.twin[s] = tw;
            self.twin[tw] = s;
            if self.edge_halfedge[ed] == o {
                self.edge_halfedge[ed] = s;
            }
        }
        self.twin[3 * f1 + 2] = 3 * f2 + 2;
        self.twin[3 * f2 + 2] = 3 * f1 + 2;
        self.edge_halfedge[e] = 3 * f1 + 2;
        self.vertex_halfedge[a] = 3 * f1 + 1;
        self.vertex_halfedge[b] = 3 * f2 + 1;
        self.vertex_halfedge[c] = 3 * f1;
        self.vertex_halfedge[d] = 3 * f2;
        Ok(map)
    }

    /// Check the structural invariants; used by tests after mutation.
    pub fn validate(&self) -> Result<(), String> {
        for h in 0..self.n_halfedges() {
            let t = self.twin[h];
            if t == h || self.twin[t] != h {
                return Err(format!("twin mismatch at halfedge {h}"));
            }
            if self.origin(t) != self.target(h) || self.target(t) != self.origin(h) {
                return Err(format!("twin endpoints mismatch at halfedge {h}"));
            }
            if self.edge_of[h] != self.edge_of[t] {
                return Err(format!("edge id mismatch at halfedge {h}"));
            }
        }
        for e in 0..self.n_edges() {
            if self.edge_of[self.edge_halfedge[e]] != e {
                return Err(format!("edge {e} canonical halfedge mismatch"));
            }
        }
        let mut total = 0;
        for v in 0..self.n_vertices() {
            if self.origin(self.vertex_halfedge[v]) != v {
                return Err(format!("vertex {v} halfedge has wrong origin"));
            }
            total += self.valence(v);
        }
        if total != self.n_halfedges() {
            return Err("vertex rotations do not cover all halfedges".into());
        }
        Ok(())
    }
}

pub struct Outgoing<'a> {
    topo: &'a Topology,
    start: usize,
    current: Option<usize>,
}

impl Iterator for Outgoing<'_> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        let h = self.current?;
        let n = self.topo.ccw(h);
        self.current = if n == self.start { None } else { Some(n) };
        Some(h)
    }
}
