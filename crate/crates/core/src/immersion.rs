//! Development of a flat cone metric into the plane.
//!
//! The surface is cut open along a cut graph augmented with a shortest path
//! from every cone vertex, so the remaining disk is flat, and then laid out
//! face by face. Each cut edge carries the rigid motion relating its two
//! planar copies; in a quad-compatible metric its rotation is a quarter turn.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{chart_from_lengths, slice_edges, Curve, CurveGraph, Topology};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ImmersionError {
    #[error("no path from cone vertex {0} to the cut avoids earlier paths; refine the mesh")]
    Disjointness(usize),
    #[error("face {face} violates the triangle inequality")]
    TriangleInequality { face: usize },
    #[error("cut complement is not a disk (Euler characteristic {0})")]
    NotDisk(i64),
    #[error("cone vertex {0} lies inside the cut disk")]
    InteriorCone(usize),
    #[error("texture scale must be nonzero")]
    ZeroScale,
    #[error("{0}")]
    Io(String),
}

/// Rigid motion taking the twin-side copy of a cut edge onto this side:
/// `z ↦ rotation·z + translation`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transition {
    pub edge: usize,
    /// Halfedge whose face is the target side.
    pub halfedge: usize,
    pub rotation_quarter_turns: u8,
    /// Unsnapped rotation angle in degrees, in `(−180, 180]`.
    pub rotation_degrees: f64,
    pub translation: [f64; 2],
}

impl Transition {
    /// Deviation of the raw rotation from its quarter turn, in degrees.
    pub fn quantization_error(&self) -> f64 {
        let snapped = self.rotation_quarter_turns as f64 * 90.0;
        let d = (self.rotation_degrees - snapped).rem_euclid(360.0);
        d.min(360.0 - d)
    }

    pub fn rotation(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.rotation_degrees.to_radians())
    }

    /// Rotation by the snapped quarter turn.
    pub fn snapped_rotation(&self) -> Complex64 {
        [Complex64::new(1.0, 0.0), Complex64::i(), Complex64::new(-1.0, 0.0), -Complex64::i()]
            [self.rotation_quarter_turns as usize]
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        self.rotation() * z + Complex64::new(self.translation[0], self.translation[1])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Immersion {
    /// Planar position of each corner (indexed by halfedge id).
    pub corners: Vec<Complex64>,
    pub cut: Vec<bool>,
    /// Indexed by halfedge; `None` on uncut edges.
    pub transitions: Vec<Option<Transition>>,
    pub seed_face: usize,
    /// Faces laid out with reversed orientation.
    pub foldovers: usize,
}

impl Immersion {
    pub fn face(&self, f: usize) -> [Complex64; 3] {
        [self.corners[3 * f], self.corners[3 * f + 1], self.corners[3 * f + 2]]
    }

    /// One transition per cut edge, from its canonical halfedge.
    pub fn edge_transitions<'a>(&'a self, topo: &'a Topology) -> impl Iterator<Item = &'a Transition> + 'a {
        (0..topo.n_edges()).filter_map(move |e| self.transitions[topo.edge_halfedge(e)].as_ref())
    }

    pub fn max_quantization_error(&self, topo: &Topology) -> f64 {
        self.edge_transitions(topo).map(Transition::quantization_error).fold(0.0, f64::max)
    }

    /// Sum of planar corner angles at each vertex.
    pub fn image_angle_sums(&self, topo: &Topology) -> Vec<f64> {
        let mut out = vec![0.0; topo.n_vertices()];
        for h in 0..topo.n_halfedges() {
            let f = h / 3;
            let k = h % 3;
            let z = self.face(f);
            let (a, b) = (z[(k + 1) % 3] - z[k], z[(k + 2) % 3] - z[k]);
            out[topo.origin(h)] += (b / a).arg().abs();
        }
        out
    }

    /// Largest relative difference between planar and metric edge lengths.
    pub fn max_length_error(&self, topo: &Topology, lengths: &[f64]) -> f64 {
        (0..topo.n_halfedges())
            .map(|h| {
                let z = self.face(h / 3);
                let k = h % 3;
                let l = lengths[topo.edge(h)];
                ((z[(k + 1) % 3] - z[k]).norm() - l).abs() / l
            })
            .fold(0.0, f64::max)
    }

    pub fn transitions_json(&self, topo: &Topology) -> serde_json::Value {
        let list: Vec<&Transition> = self.edge_transitions(topo).collect();
        serde_json::json!({ "transitions": list })
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Dijkstra from `src` to the nearest vertex in `goal`, never entering
/// `blocked`. Returns the halfedge path.
fn shortest_to(
    topo: &Topology,
    lengths: &[f64],
    src: usize,
    goal: &[bool],
    blocked: &[bool],
) -> Option<(f64, Vec<usize>)> {
    let n = topo.n_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut via = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Entry(0.0, src));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if goal[v] {
            let mut path = Vec::new();
            let mut x = v;
            while x != src {
                let h = via[x];
                path.push(h);
                x = topo.origin(h);
            }
            path.reverse();
            return Some((d, path));
        }
        for h in topo.outgoing(v) {
            let w = topo.target(h);
            if blocked[w] && !goal[w] {
                continue;
            }
            let nd = d + lengths[topo.edge(h)];
            if nd < dist[w] {
                dist[w] = nd;
                via[w] = h;
                heap.push(Entry(nd, w));
            }
        }
    }
    None
}

/// Add a shortest path `gamma{i}` from each cone vertex to the cut. Paths are
/// found in increasing length order, each avoiding the vertices of earlier
/// paths and of other cones; they end on the original cut.
pub fn augment_cut_graph(
    topo: &Topology,
    lengths: &[f64],
    cut: &CurveGraph,
    cones: &[usize],
) -> Result<CurveGraph, ImmersionError> {
    let on_cut = cut.vertex_mask(topo);
    let free = vec![false; topo.n_vertices()];
    let mut order: Vec<(f64, usize)> = cones
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let d = shortest_to(topo, lengths, v, &on_cut, &free).map_or(f64::INFINITY, |p| p.0);
            (d, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut blocked = vec![false; topo.n_vertices()];
    for &v in cones {
        blocked[v] = true;
    }
    let mut paths: Vec<Option<Vec<usize>>> = vec![None; cones.len()];
    for (_, i) in order {
        let v = cones[i];
        let (_, path) = shortest_to(topo, lengths, v, &on_cut, &blocked).ok_or(ImmersionError::Disjointness(v))?;
        for &h in &path {
            let w = topo.target(h);
            if !on_cut[w] {
                blocked[w] = true;
            }
        }
        paths[i] = Some(path);
    }
    let mut out = cut.clone();
    for (i, p) in paths.into_iter().enumerate() {
        out.loops.push(Curve::new(format!("gamma{}", i + 1), p.expect("every cone routed")));
    }
    Ok(out)
}

fn valid(l: [f64; 3]) -> bool {
    l.iter().all(|x| x.is_finite() && *x > 0.0) && l[0] < l[1] + l[2] && l[1] < l[0] + l[2] && l[2] < l[0] + l[1]
}

/// Lay out the disk `M \ cut` breadth-first from `seed_face`, whose first
/// corner sits at the origin with its first edge along the positive real
/// axis. `cones` lists vertices that must lie on the cut.
pub fn flatten(
    topo: &Topology,
    lengths: &[f64],
    cut: &[bool],
    cones: &[usize],
    seed_face: usize,
) -> Result<Immersion, ImmersionError> {
    let sliced = slice_edges(topo, cut).map_err(|e| ImmersionError::Io(e.to_string()))?;
    let n_cut = cut.iter().filter(|c| **c).count() as i64;
    let chi = sliced.vertex_origin.len() as i64 - (topo.n_edges() as i64 + n_cut) + topo.n_faces() as i64;
    if chi != 1 {
        return Err(ImmersionError::NotDisk(chi));
    }
    for &v in cones {
        if !topo.outgoing(v).any(|h| cut[topo.edge(h)]) {
            return Err(ImmersionError::InteriorCone(v));
        }
    }
    let nf = topo.n_faces();
    let mut charts = Vec::with_capacity(nf);
    for f in 0..nf {
        let l = [0, 1, 2].map(|k| lengths[topo.edge(3 * f + k)]);
        if !valid(l) {
            return Err(ImmersionError::TriangleInequality { face: f });
        }
        charts.push(chart_from_lengths(l));
    }
    let mut corners = vec![Complex64::new(0.0, 0.0); topo.n_halfedges()];
    let mut placed = vec![false; nf];
    corners[3 * seed_face..3 * seed_face + 3].copy_from_slice(&charts[seed_face]);
    placed[seed_face] = true;
    let mut queue = VecDeque::from([seed_face]);
    let mut count = 1;
    while let Some(f) = queue.pop_front() {
        for k in 0..3 {
            let h = 3 * f + k;
            if cut[topo.edge(h)] {
                continue;
            }
            let t = topo.twin(h);
            let g = t / 3;
            if placed[g] {
                continue;
            }
            // Twin runs B→A; match its chart edge onto the placed copy.
            let (a, b) = (corners[h], corners[topo.next(h)]);
            let c = &charts[g];
            let (bg, ag) = (c[t % 3], c[(t % 3 + 1) % 3]);
            let rot = (a - b) / (ag - bg);
            let rot = rot / rot.norm();
            for j in 0..3 {
                corners[3 * g + j] = b + rot * (c[j] - bg);
            }
            placed[g] = true;
            count += 1;
            queue.push_back(g);
        }
    }
    debug_assert_eq!(count, nf, "disk is connected");
    let mut transitions = vec![None; topo.n_halfedges()];
    for h in 0..topo.n_halfedges() {
        if !cut[topo.edge(h)] {
            continue;
        }
        let t = topo.twin(h);
        let (a, b) = (corners[h], corners[topo.next(h)]);
        let (b2, a2) = (corners[t], corners[topo.next(t)]);
        let rot = (b - a) / (b2 - a2);
        let rot = rot / rot.norm();
        let tr = a - rot * a2;
        let arg = rot.arg();
        let q = (arg / FRAC_PI_2).round().rem_euclid(4.0) as u8;
        transitions[h] = Some(Transition {
            edge: topo.edge(h),
            halfedge: h,
            rotation_quarter_turns: q,
            rotation_degrees: arg.to_degrees(),
            translation: [tr.re, tr.im],
        });
    }
    let foldovers = (0..nf)
        .filter(|&f| {
            let z = [corners[3 * f], corners[3 * f + 1], corners[3 * f + 2]];
            ((z[1] - z[0]).conj() * (z[2] - z[0])).im <= 0.0
        })
        .count();
    Ok(Immersion { corners, cut: cut.to_vec(), transitions, seed_face, foldovers })
}

/// OBJ text with `vt` = corner coordinates × `scale`, one `vt` per corner.
pub fn checkerboard_obj(
    topo: &Topology,
    positions: &[[f64; 3]],
    imm: &Immersion,
    scale: f64,
) -> Result<String, ImmersionError> {
    if scale == 0.0 || !scale.is_finite() {
        return Err(ImmersionError::ZeroScale);
    }
    let mut s = String::new();
    for p in positions {
        writeln!(s, "v {:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]).unwrap();
    }
    for z in &imm.corners {
        writeln!(s, "vt {:.16e} {:.16e}", z.re * scale, z.im * scale).unwrap();
    }
    for f in 0..topo.n_faces() {
        let v = topo.face(f);
        writeln!(s, "f {}/{} {}/{} {}/{}", v[0] + 1, 3 * f + 1, v[1] + 1, 3 * f + 2, v[2] + 1, 3 * f + 3).unwrap();
    }
    Ok(s)
}

pub fn write_checkerboard_obj(
    path: impl AsRef<Path>,
    topo: &Topology,
    positions: &[[f64; 3]],
    imm: &Immersion,
    scale: f64,
) -> Result<(), ImmersionError> {
    let text = checkerboard_obj(topo, positions, imm, scale)?;
    std::fs::write(path, text).map_err(|e| ImmersionError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_face_seed_convention() {
        let z = chart_from_lengths([1.0, 1.0, 1.0]);
        assert!((z[0] - Complex64::new(0.0, 0.0)).norm() < 1e-15);
        assert!((z[1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((z[2] - Complex64::new(0.5, 3f64.sqrt() / 2.0)).norm() < 1e-15);
    }
}
