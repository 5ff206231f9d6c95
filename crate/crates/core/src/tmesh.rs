//! Critical trajectories of the quartic differential, the motor graph they
//! form under the first-arrival rule, and the rectangular patches it cuts.
//!
//! Trajectories run straight in the developed coordinates of the immersion.
//! Directions are always one of `±1, ±i` in the current face's layout frame;
//! crossing a cut edge applies the snapped quarter turn, so axis alignment
//! is exact for the whole run.
//!
//! The motor graph is a global event simulation: all trajectories leave at
//! arc length zero with unit speed, and an intersection stops whichever
//! trajectory arrives later. Events are processed in increasing arrival
//! time, which makes the result independent of input order.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::immersion::Immersion;
use crate::mesh::{SurfacePoint, Topology};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TmeshError {
    #[error("cone angle at vertex {vertex} is {degrees}°, not a multiple of 90°")]
    ConeAngle { vertex: usize, degrees: f64 },
    #[error("vertex {vertex} emits {found} rays, expected {expected}")]
    RayCount { vertex: usize, found: usize, expected: usize },
    #[error("trajectory cannot leave face {face}")]
    Degenerate { face: usize },
    #[error("arrangement face with {corners} corners is not a rectangle")]
    NotRectangular { corners: usize, darts: Vec<usize> },
    #[error("T-mesh has no patches")]
    EmptyTMesh,
    #[error("{0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Origin {
    /// A mesh vertex, normally a cone.
    Vertex(usize),
    /// A point given in the layout coordinates of `face`.
    Point { face: usize, z: Complex64 },
}

impl Origin {
    fn key(&self) -> (usize, usize, u64, u64) {
        match *self {
            Origin::Vertex(v) => (0, v, 0, 0),
            Origin::Point { face, z } => (1, face, z.re.to_bits(), z.im.to_bits()),
        }
    }
}

/// Initial direction of a trajectory. `index` counts quarter turns
/// counter-clockwise from the fan's first ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Origin,
    pub index: usize,
    pub face: usize,
    pub z: Complex64,
    pub dir: Complex64,
}

/// A straight piece inside one face, from arc length `s0` to `s1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub face: usize,
    pub a: Complex64,
    pub b: Complex64,
    pub s0: f64,
    pub s1: f64,
    pub dir: Complex64,
}

impl Segment {
    fn at(&self, s: f64) -> Complex64 {
        self.a + self.dir * (s - self.s0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Singularity(usize),
    /// Stopped by the trail of trajectory `by`.
    Motor { by: usize },
    /// Came back to its own origin.
    Closed,
    LengthCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub ray: Ray,
    pub segments: Vec<Segment>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.s1)
    }

    /// Surface points with their arc length, one per segment end.
    pub fn polyline(&self, imm: &Immersion) -> Vec<(SurfacePoint, f64)> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        for (i, s) in self.segments.iter().enumerate() {
            let chart = imm.face(s.face);
            if i == 0 {
                out.push((SurfacePoint { face: s.face, bary: SurfacePoint::bary_in_chart(&chart, s.a) }, s.s0));
            }
            out.push((SurfacePoint { face: s.face, bary: SurfacePoint::bary_in_chart(&chart, s.b) }, s.s1));
        }
        out
    }

    fn truncate(&mut self, s: f64) {
        self.segments.retain(|g| g.s0 < s);
        if let Some(last) = self.segments.last_mut() {
            if last.s1 > s {
                last.b = last.at(s);
                last.s1 = s;
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceConfig {
    pub length_cap: f64,
    pub max_segments: usize,
    /// Arrival radius at singularities.
    pub snap: f64,
    /// Scale for degenerate-crossing tests (mean edge length).
    pub scale: f64,
}

impl TraceConfig {
    /// Cap at 64 × a diameter bound (twice the eccentricity of vertex 0),
    /// snap at 1e-6 × mean edge.
    pub fn for_surface(topo: &Topology, lengths: &[f64]) -> Self {
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        let ecc = eccentricity(topo, lengths, 0);
        TraceConfig { length_cap: 64.0 * 2.0 * ecc, max_segments: 4_000_000, snap: 1e-6 * mean, scale: mean }
    }
}

fn eccentricity(topo: &Topology, lengths: &[f64], src: usize) -> f64 {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut dist = vec![f64::INFINITY; topo.n_vertices()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push((Reverse(0u64), src));
    while let Some((Reverse(db), v)) = heap.pop() {
        let d = f64::from_bits(db);
        if d > dist[v] {
            continue;
        }
        for h in topo.outgoing(v) {
            let w = topo.target(h);
            let nd = d + lengths[topo.edge(h)];
            if nd < dist[w] {
                dist[w] = nd;
                heap.push((Reverse(nd.to_bits()), w));
            }
        }
    }
    dist.into_iter().filter(|d| d.is_finite()).fold(0.0, f64::max)
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

const AXES: [Complex64; 4] = [
    Complex64 { re: 1.0, im: 0.0 },
    Complex64 { re: 0.0, im: 1.0 },
    Complex64 { re: -1.0, im: 0.0 },
    Complex64 { re: 0.0, im: -1.0 },
];

/// Angular layout of the corners around one vertex.
#[derive(Clone, Debug)]
struct Fan {
    /// Corner halfedges in counter-clockwise order, starting at the corner
    /// holding the first ray.
    corners: Vec<usize>,
    /// Raw angle from the first ray to the first edge of each corner.
    offsets: Vec<f64>,
    /// Snapped cone angle, `k·π/2`.
    period: f64,
}

pub struct Tracer<'a> {
    pub topo: &'a Topology,
    pub imm: &'a Immersion,
    pub is_cone: Vec<bool>,
    pub cfg: TraceConfig,
    fans: HashMap<usize, Fan>,
}

impl<'a> Tracer<'a> {
    pub fn new(topo: &'a Topology, imm: &'a Immersion, cones: &[usize], cfg: TraceConfig) -> Self {
        let mut is_cone = vec![false; topo.n_vertices()];
        for &v in cones {
            is_cone[v] = true;
        }
        Tracer { topo, imm, is_cone, cfg, fans: HashMap::new() }
    }

    fn corner_sector(&self, c: usize) -> (Complex64, f64) {
        let z = self.imm.face(c / 3);
        let k = c % 3;
        let e1 = z[(k + 1) % 3] - z[k];
        let e2 = z[(k + 2) % 3] - z[k];
        (e1, (e2 / e1).arg())
    }

    /// Axis-aligned rays at `v`, one per quarter turn of its cone angle.
    pub fn emit(&mut self, v: usize) -> Result<Vec<Ray>, TmeshError> {
        let corners: Vec<usize> = self.topo.outgoing(v).collect();
        let total: f64 = corners.iter().map(|&c| self.corner_sector(c).1).sum();
        let k = (total / FRAC_PI_2).round() as usize;
        if (total - k as f64 * FRAC_PI_2).abs().to_degrees() > 0.5 || k == 0 {
            return Err(TmeshError::ConeAngle { vertex: v, degrees: total.to_degrees() });
        }
        // Rays per corner: axis directions in [e1, e2).
        let mut found: Vec<(usize, Complex64, f64)> = Vec::new();
        for (ci, &c) in corners.iter().enumerate() {
            let (e1, sector) = self.corner_sector(c);
            let mut here: Vec<(f64, Complex64)> = AXES
                .iter()
                .map(|&d| {
                    let a = (d / e1).arg().rem_euclid(TAU);
                    (if a > TAU - 1e-9 { 0.0 } else { a }, d)
                })
                .filter(|&(a, _)| a < sector - 1e-9)
                .collect();
            here.sort_by(|a, b| a.0.total_cmp(&b.0));
            found.extend(here.into_iter().map(|(a, d)| (ci, d, a)));
        }
        if found.len() != k {
            return Err(TmeshError::RayCount { vertex: v, found: found.len(), expected: k });
        }
        let first = found.iter().position(|r| r.1 == AXES[0]).unwrap_or(0);
        let start_corner = found[first].0;
        let n = corners.len();
        let rotated: Vec<usize> = (0..n).map(|i| corners[(start_corner + i) % n]).collect();
        let mut offsets = Vec::with_capacity(n);
        let mut acc = -found[first].2;
        for &c in &rotated {
            offsets.push(acc);
            acc += self.corner_sector(c).1;
        }
        self.fans.insert(v, Fan { corners: rotated, offsets, period: k as f64 * FRAC_PI_2 });
        let rays = (0..k)
            .map(|j| {
                let (ci, dir, _) = found[(first + j) % k];
                let c = corners[ci];
                Ray { origin: Origin::Vertex(v), index: j, face: c / 3, z: self.imm.corners[c], dir }
            })
            .collect();
        Ok(rays)
    }

    /// Rays from every vertex in `cones`, in the given order.
    pub fn emit_separatrices(&mut self, cones: &[usize]) -> Result<Vec<Ray>, TmeshError> {
        let mut out = Vec::new();
        for &v in cones {
            out.extend(self.emit(v)?);
        }
        Ok(out)
    }

    /// Angle around `v` after which arc ends repeat.
    pub fn period(&self, v: usize) -> f64 {
        self.fans.get(&v).map_or(TAU, |f| f.period)
    }

    /// Angle of direction `d` (layout frame of `face`) in the fan of `v`,
    /// measured from the first ray.
    fn fan_angle(&self, v: usize, face: usize, d: Complex64) -> f64 {
        let Some(fan) = self.fans.get(&v) else {
            return d.arg().rem_euclid(TAU);
        };
        for (i, &c) in fan.corners.iter().enumerate() {
            if c / 3 == face {
                let (e1, _) = self.corner_sector(c);
                return (fan.offsets[i] + (d / e1).arg().rem_euclid(TAU)).rem_euclid(fan.period);
            }
        }
        d.arg().rem_euclid(TAU)
    }

    pub fn trace(&self, ray: &Ray) -> Result<Trajectory, TmeshError> {
        let topo = self.topo;
        let imm = self.imm;
        let tiny = 1e-12 * self.cfg.scale;
        let mut f = ray.face;
        let mut p = ray.z;
        let d0 = ray.dir;
        let mut d = d0;
        let mut s = 0.0;
        let mut entry: Option<usize> = None;
        let mut segments = Vec::new();
        let start_vertex = match ray.origin {
            Origin::Vertex(v) => Some(v),
            Origin::Point { .. } => None,
        };
        let mut nudges = 0;
        loop {
            let z = imm.face(f);
            let mut best: Option<(f64, usize, f64)> = None;
            for k in 0..3 {
                if Some(k) == entry {
                    continue;
                }
                let a = z[k];
                let e = z[(k + 1) % 3] - a;
                let den = cross(d, e);
                if den.abs() < 1e-300 {
                    continue;
                }
                let w = a - p;
                let sh = cross(w, e) / den;
                let t = cross(w, d) / den;
                if sh > tiny && (-1e-12..=1.0 + 1e-12).contains(&t) && best.is_none_or(|b| sh < b.0) {
                    best = Some((sh, k, t.clamp(0.0, 1.0)));
                }
            }
            let Some((sh, k, t)) = best else {
                return Err(TmeshError::Degenerate { face: f });
            };
            // Stops inside this face: a singularity or the own origin.
            let mut stop: Option<(f64, Termination)> = None;
            for j in 0..3 {
                let v = topo.origin(3 * f + j);
                if !self.is_cone[v] || (Some(v) == start_vertex && s == 0.0) {
                    continue;
                }
                if let Some(tau) = arrival(p, d, z[j], sh, self.cfg.snap, tiny) {
                    if stop.is_none_or(|b| tau < b.0) {
                        stop = Some((tau, Termination::Singularity(v)));
                    }
                }
            }
            if let Origin::Point { face, z: z0 } = ray.origin {
                if face == f && s > 0.0 {
                    if let Some(tau) = arrival(p, d, z0, sh, self.cfg.snap, tiny) {
                        if stop.is_none_or(|b| tau < b.0) {
                            stop = Some((tau, Termination::Closed));
                        }
                    }
                }
            }
            if let Some((tau, why)) = stop {
                if s + tau <= self.cfg.length_cap {
                    segments.push(Segment { face: f, a: p, b: p + d * tau, s0: s, s1: s + tau, dir: d });
                    return Ok(Trajectory { ray: *ray, segments, termination: why });
                }
            }
            if s + sh >= self.cfg.length_cap || segments.len() >= self.cfg.max_segments {
                let rest = (self.cfg.length_cap - s).clamp(0.0, sh);
                segments.push(Segment { face: f, a: p, b: p + d * rest, s0: s, s1: s + rest, dir: d });
                return Ok(Trajectory { ray: *ray, segments, termination: Termination::LengthCap });
            }
            // Grazing a vertex: nudge to the left of travel and retry.
            if (t < 1e-9 || t > 1.0 - 1e-9) && nudges < 8 {
                nudges += 1;
                log::debug!("trajectory grazes a vertex of face {f}; nudging left");
                p += Complex64::i() * d * (1e-9 * self.cfg.scale);
                continue;
            }
            nudges = 0;
            segments.push(Segment { face: f, a: p, b: p + d * sh, s0: s, s1: s + sh, dir: d });
            s += sh;
            let h = 3 * f + k;
            let tw = topo.twin(h);
            let g = tw / 3;
            let zg = imm.face(g);
            let (a2, b2) = (zg[(tw % 3 + 1) % 3], zg[tw % 3]);
            p = a2 + (b2 - a2) * t;
            if let Some(tr) = &imm.transitions[tw] {
                d *= tr.snapped_rotation();
            }
            entry = Some(tw % 3);
            f = g;
        }
    }
}

/// Arc length along `p + τd` at which the ray passes within `snap` of `q`,
/// if that happens before `limit`.
fn arrival(p: Complex64, d: Complex64, q: Complex64, limit: f64, snap: f64, tiny: f64) -> Option<f64> {
    let rel = (q - p) * d.conj();
    (rel.re > tiny && rel.re <= limit + snap && rel.im.abs() <= snap).then_some(rel.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TJunction {
    pub face: usize,
    pub z: Complex64,
    /// Trajectory that continues through the junction, and its arc length.
    pub on: usize,
    pub s_on: f64,
    pub stopped: usize,
    pub s_stopped: f64,
}

/// Two trails crossing where neither stops: a saddle connection `b`
/// reached late by `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XCrossing {
    pub face: usize,
    pub z: Complex64,
    pub a: usize,
    pub s_a: f64,
    pub b: usize,
    pub s_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Singularity(usize),
    Point,
    TJunction(usize),
    Crossing(usize),
    /// Free end of a trajectory that hit the length cap.
    End(usize),
}

/// An arc end at a node, `angle` counter-clockwise in the node's frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcEnd {
    pub arc: usize,
    pub at_start: bool,
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    /// Total angle around the node.
    pub period: f64,
    /// Sorted by angle.
    pub ends: Vec<ArcEnd>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub trajectory: usize,
    pub s0: f64,
    pub s1: f64,
    pub from: usize,
    pub to: usize,
}

impl Arc {
    pub fn length(&self) -> f64 {
        self.s1 - self.s0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorGraph {
    /// Sorted by origin and ray index, truncated by the first-arrival rule.
    /// The second ray of each saddle connection is dropped.
    pub trajectories: Vec<Trajectory>,
    pub junctions: Vec<TJunction>,
    pub xings: Vec<XCrossing>,
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    /// Crossings whose arrival times tied within 1e-9.
    pub ties: usize,
}

impl MotorGraph {
    pub fn capped(&self) -> usize {
        self.trajectories.iter().filter(|t| t.termination == Termination::LengthCap).count()
    }
}

/// A crossing of two trail segments, with each trajectory's arc length there.
#[derive(Clone, Copy, Debug)]
pub struct Crossing {
    pub face: usize,
    pub z: Complex64,
    pub i: usize,
    pub si: f64,
    pub j: usize,
    pub sj: f64,
}

/// All proper crossings between trails, away from origins and singularities.
pub fn crossings(trajs: &[Trajectory], keep_out: f64) -> Vec<Crossing> {
    let mut by_face: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for (ti, t) in trajs.iter().enumerate() {
        for (si, s) in t.segments.iter().enumerate() {
            by_face.entry(s.face).or_default().push((ti, si));
        }
    }
    let mut faces: Vec<usize> = by_face.keys().copied().collect();
    faces.sort_unstable();
    let mut out = Vec::new();
    for f in faces {
        let segs = &by_face[&f];
        for x in 0..segs.len() {
            for y in x + 1..segs.len() {
                let (ti, si) = segs[x];
                let (tj, sj) = segs[y];
                if ti == tj && si.abs_diff(sj) <= 1 {
                    continue;
                }
                let (a, b) = (&trajs[ti].segments[si], &trajs[tj].segments[sj]);
                let den = cross(a.dir, b.dir);
                if den.abs() < 1e-12 {
                    continue;
                }
                let w = b.a - a.a;
                let ua = cross(w, b.dir) / den;
                let ub = cross(w, a.dir) / den;
                let (la, lb) = (a.s1 - a.s0, b.s1 - b.s0);
                if ua < 0.0 || ua >= la || ub < 0.0 || ub >= lb {
                    continue;
                }
                let (s_a, s_b) = (a.s0 + ua, b.s0 + ub);
                if s_a < keep_out || s_b < keep_out {
                    continue;
                }
                let end_a = trajs[ti].length() - s_a;
                let end_b = trajs[tj].length() - s_b;
                let ends_at_node = |t: &Trajectory, rest: f64| {
                    rest < keep_out && matches!(t.termination, Termination::Singularity(_) | Termination::Closed)
                };
                if ends_at_node(&trajs[ti], end_a) || ends_at_node(&trajs[tj], end_b) {
                    continue;
                }
                out.push(Crossing { face: f, z: a.at(s_a), i: ti, si: s_a, j: tj, sj: s_b });
            }
        }
    }
    out
}

/// Index of the ray at the arrival singularity that retraces `t` backwards.
fn arrival_ray(tracer: &Tracer, t: &Trajectory) -> Option<(usize, usize)> {
    let Termination::Singularity(w) = t.termination else {
        return None;
    };
    let last = t.segments.last()?;
    tracer.fans.get(&w)?;
    let angle = tracer.fan_angle(w, last.face, -last.dir);
    let q = (angle / FRAC_PI_2).round();
    let k = (tracer.period(w) / FRAC_PI_2).round() as usize;
    ((angle - q * FRAC_PI_2).abs() < 0.1).then_some((w, q as usize % k))
}

/// Resolve all crossings by first arrival and build the graph.
///
/// A trajectory that reaches another singularity is a saddle connection:
/// the ray leaving that singularity in the opposite direction retraces it.
/// The pair is kept as one trail, present at arc length `s` from time
/// `min(s, L - s)`, and never truncated; a crossing trail that arrives
/// before it continues through an X node instead.
pub fn motor_graph(tracer: &Tracer, mut trajs: Vec<Trajectory>) -> MotorGraph {
    trajs.sort_by(|a, b| a.ray.origin.key().cmp(&b.ray.origin.key()).then(a.ray.index.cmp(&b.ray.index)));
    let n = trajs.len();
    let mut arrival: Vec<Option<usize>> = vec![None; n];
    let mut drop = vec![false; n];
    for i in 0..n {
        if drop[i] {
            continue;
        }
        let Some((w, q)) = arrival_ray(tracer, &trajs[i]) else {
            if let Termination::Singularity(w) = trajs[i].termination {
                log::warn!("trajectory {i} reaches vertex {w} off its fan directions");
            }
            continue;
        };
        arrival[i] = Some(q);
        let partner = (0..n).find(|&j| {
            j != i && !drop[j] && trajs[j].ray.origin == Origin::Vertex(w) && trajs[j].ray.index == q
        });
        if let Some(j) = partner {
            if j > i {
                drop[j] = true;
            }
        }
    }
    let mut kept = Vec::new();
    let mut kept_arrival = Vec::new();
    for (i, t) in trajs.into_iter().enumerate() {
        if !drop[i] {
            kept.push(t);
            kept_arrival.push(arrival[i]);
        }
    }
    let trajs = kept;
    let arrival = kept_arrival;
    let connection: Vec<bool> = arrival.iter().map(Option::is_some).collect();
    let len: Vec<f64> = trajs.iter().map(Trajectory::length).collect();
    let time = |i: usize, s: f64| if connection[i] { s.min(len[i] - s) } else { s };

    let keep_out = 10.0 * tracer.cfg.snap.max(1e-12 * tracer.cfg.scale);
    let mut events: Vec<(f64, usize, usize, f64, Crossing)> = Vec::new();
    let mut ties = 0;
    for c in crossings(&trajs, keep_out) {
        let (ti, tj) = (time(c.i, c.si), time(c.j, c.sj));
        let i_late = if (ti - tj).abs() <= 1e-9 {
            ties += 1;
            log::info!("arrival tie between trajectories {} and {}; lower id continues", c.i, c.j);
            c.i > c.j
        } else {
            ti > tj
        };
        let (late, early) = if i_late { (c.i, c.j) } else { (c.j, c.i) };
        events.push((ti.max(tj), late, early, ti.min(tj), c));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.total_cmp(&b.3)));
    let mut alive = len.clone();
    let mut junctions = Vec::new();
    let mut xings = Vec::new();
    for (_, late, early, _, c) in events {
        let (s_late, s_early) = if late == c.i { (c.si, c.sj) } else { (c.sj, c.si) };
        if alive[late] <= s_late || alive[early] < s_early {
            continue;
        }
        if connection[late] {
            xings.push(XCrossing { face: c.face, z: c.z, a: early, s_a: s_early, b: late, s_b: s_late });
            continue;
        }
        alive[late] = s_late;
        junctions.push(TJunction { face: c.face, z: c.z, on: early, s_on: s_early, stopped: late, s_stopped: s_late });
    }
    // A later truncation can remove the trail under an earlier junction only
    // if that trail was cut before the junction, which the order rules out.
    let mut trajs = trajs;
    for (i, t) in trajs.iter_mut().enumerate() {
        if alive[i] < t.length() {
            let by = junctions.iter().find(|j| j.stopped == i).map(|j| j.on).expect("stopped by a junction");
            t.truncate(alive[i]);
            t.termination = Termination::Motor { by };
        }
    }
    build_graph(tracer, trajs, arrival, junctions, xings, ties)
}

fn build_graph(
    tracer: &Tracer,
    trajs: Vec<Trajectory>,
    arrival: Vec<Option<usize>>,
    junctions: Vec<TJunction>,
    xings: Vec<XCrossing>,
    ties: usize,
) -> MotorGraph {
    let mut nodes: Vec<Node> = Vec::new();
    let mut origin_node: HashMap<(usize, usize, u64, u64), usize> = HashMap::new();
    let mut vertex_node: HashMap<usize, usize> = HashMap::new();
    for t in &trajs {
        let key = t.ray.origin.key();
        if origin_node.contains_key(&key) {
            continue;
        }
        let kind = match t.ray.origin {
            Origin::Vertex(v) => {
                vertex_node.insert(v, nodes.len());
                NodeKind::Singularity(v)
            }
            Origin::Point { .. } => NodeKind::Point,
        };
        origin_node.insert(key, nodes.len());
        nodes.push(Node { kind, period: TAU, ends: Vec::new() });
    }
    let junction_node: Vec<usize> = (0..junctions.len())
        .map(|k| {
            nodes.push(Node { kind: NodeKind::TJunction(k), period: TAU, ends: Vec::new() });
            nodes.len() - 1
        })
        .collect();
    let xing_node: Vec<usize> = (0..xings.len())
        .map(|k| {
            nodes.push(Node { kind: NodeKind::Crossing(k), period: TAU, ends: Vec::new() });
            nodes.len() - 1
        })
        .collect();
    let mut arcs = Vec::new();
    for (ti, t) in trajs.iter().enumerate() {
        let start = origin_node[&t.ray.origin.key()];
        let mut cuts: Vec<(f64, usize)> =
            junctions.iter().enumerate().filter(|(_, j)| j.on == ti).map(|(k, j)| (j.s_on, junction_node[k])).collect();
        for (k, x) in xings.iter().enumerate() {
            if x.a == ti {
                cuts.push((x.s_a, xing_node[k]));
            }
            if x.b == ti {
                cuts.push((x.s_b, xing_node[k]));
            }
        }
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let end = match t.termination {
            Termination::Singularity(v) => match vertex_node.get(&v) {
                Some(&n) => n,
                None => {
                    nodes.push(Node { kind: NodeKind::Singularity(v), period: TAU, ends: Vec::new() });
                    vertex_node.insert(v, nodes.len() - 1);
                    nodes.len() - 1
                }
            },
            Termination::Closed => start,
            Termination::Motor { .. } => {
                let k = junctions.iter().position(|j| j.stopped == ti).expect("stopping junction");
                junction_node[k]
            }
            Termination::LengthCap => {
                nodes.push(Node { kind: NodeKind::End(ti), period: TAU, ends: Vec::new() });
                nodes.len() - 1
            }
        };
        let mut prev = (0.0, start);
        for c in cuts.into_iter().chain(std::iter::once((t.length(), end))) {
            arcs.push(Arc { trajectory: ti, s0: prev.0, s1: c.0, from: prev.1, to: c.1 });
            prev = c;
        }
    }
    // Angles of arc ends at each node.
    for (ai, arc) in arcs.iter().enumerate() {
        let t = &trajs[arc.trajectory];
        for at_start in [true, false] {
            let node = if at_start { arc.from } else { arc.to };
            let (seg, outward) = if at_start {
                let seg = segment_at(t, arc.s0, true);
                (seg, seg.dir)
            } else {
                let seg = segment_at(t, arc.s1, false);
                (seg, -seg.dir)
            };
            let angle = match nodes[node].kind {
                NodeKind::Singularity(_) if at_start && arc.s0 == 0.0 => t.ray.index as f64 * FRAC_PI_2,
                NodeKind::Singularity(v) => match arrival[arc.trajectory] {
                    Some(q) => q as f64 * FRAC_PI_2,
                    None => tracer.fan_angle(v, seg.face, outward),
                },
                _ => outward.arg().rem_euclid(TAU),
            };
            nodes[node].ends.push(ArcEnd { arc: ai, at_start, angle });
        }
    }
    for n in &mut nodes {
        if let NodeKind::Singularity(v) = n.kind {
            n.period = tracer.period(v);
        }
        n.ends.sort_by(|a, b| a.angle.total_cmp(&b.angle).then(a.arc.cmp(&b.arc)).then(a.at_start.cmp(&b.at_start)));
    }
    MotorGraph { trajectories: trajs, junctions, xings, nodes, arcs, ties }
}

fn segment_at(t: &Trajectory, s: f64, forward: bool) -> Segment {
    let idx = if forward {
        t.segments.iter().position(|g| g.s1 > s).unwrap_or(t.segments.len() - 1)
    } else {
        t.segments.iter().rposition(|g| g.s0 < s).unwrap_or(0)
    };
    t.segments[idx]
}

/// One side of a patch: arcs in order, `true` when traversed forward.
pub type Chain = Vec<(usize, bool)>;

/// Rectangle `[0, width] × [0, height]`; side 0 runs along `+x` from the
/// origin, then sides 1–3 counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub corners: [usize; 4],
    pub sides: [Chain; 4],
    pub corner_angles: [f64; 4],
    pub width: f64,
    pub height: f64,
    /// Largest difference between opposite side lengths.
    pub mismatch: f64,
    /// Intrinsic area of the region, from its developed boundary.
    pub area: f64,
    /// Gap between the ends of the developed boundary.
    pub closure: f64,
}

impl Patch {
    /// Area of the rectangle model, `width × height`.
    pub fn rect_area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    pub arc: usize,
    pub patch: usize,
    pub side: usize,
    pub other: usize,
    pub other_side: usize,
    /// Rotation from `patch`'s frame to `other`'s.
    pub quarter_turns: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcRecord {
    pub trajectory: usize,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub polyline: Vec<SurfacePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TMesh {
    pub schema: String,
    pub patches: Vec<Patch>,
    pub adjacency: Vec<Adjacency>,
    pub junctions: Vec<TJunction>,
    pub xings: Vec<XCrossing>,
    /// Kind of each node named by `ArcRecord::from` and `to`.
    pub nodes: Vec<NodeKind>,
    pub arcs: Vec<ArcRecord>,
}

pub const TMESH_SCHEMA: &str = "tmesh-v1";

fn dart_end(mg: &MotorGraph, dart: usize) -> (usize, usize) {
    // Arriving node and the position of this arc end in its rotation.
    let arc = &mg.arcs[dart / 2];
    let forward = dart % 2 == 0;
    let node = if forward { arc.to } else { arc.from };
    let at_start = !forward;
    let pos = mg.nodes[node]
        .ends
        .iter()
        .position(|e| e.arc == dart / 2 && e.at_start == at_start)
        .expect("arc end registered");
    (node, pos)
}

/// Faces of the arrangement, traced with the face on the left.
pub fn extract_patches(mg: &MotorGraph, topo: &Topology, imm: &Immersion) -> Result<TMesh, TmeshError> {
    let n_darts = 2 * mg.arcs.len();
    let mut seen = vec![false; n_darts];
    let mut cycles: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for d0 in 0..n_darts {
        if seen[d0] {
            continue;
        }
        let mut darts = Vec::new();
        let mut sectors = Vec::new();
        let mut d = d0;
        while !seen[d] {
            seen[d] = true;
            darts.push(d);
            let (node, pos) = dart_end(mg, d);
            let ends = &mg.nodes[node].ends;
            let m = ends.len();
            let next = &ends[(pos + m - 1) % m];
            let period = mg.nodes[node].period;
            let sector = if m == 1 { period } else { (ends[pos].angle - next.angle).rem_euclid(period) };
            sectors.push(sector);
            d = 2 * next.arc + usize::from(!next.at_start);
        }
        cycles.push((darts, sectors));
    }
    let mut patches = Vec::new();
    let mut dart_side: Vec<(usize, usize)> = vec![(usize::MAX, 0); n_darts];
    for (darts, sectors) in cycles {
        let q: Vec<i64> = sectors.iter().map(|s| (s / FRAC_PI_2).round() as i64).collect();
        let corners: Vec<usize> = (0..darts.len()).filter(|&i| q[i] == 1).collect();
        if corners.len() != 4 || q.iter().any(|&x| x != 1 && x != 2) {
            return Err(TmeshError::NotRectangular { corners: corners.len(), darts });
        }
        // Side k starts after corner k-1 (the dart following a corner).
        let n = darts.len();
        let start = (corners[3] + 1) % n;
        let mut sides: [Chain; 4] = Default::default();
        let mut lens = [0.0; 4];
        let mut corner_nodes = [0usize; 4];
        let mut corner_angles = [0.0; 4];
        let mut side = 0;
        let pid = patches.len();
        for i in 0..n {
            let idx = (start + i) % n;
            let d = darts[idx];
            let arc = &mg.arcs[d / 2];
            sides[side].push((d / 2, d % 2 == 0));
            lens[side] += arc.length();
            dart_side[d] = (pid, side);
            if q[idx] == 1 {
                corner_nodes[side] = dart_end(mg, d).0;
                corner_angles[side] = sectors[idx];
                side += 1;
            }
        }
        // Corner k ends side k; rotate so corner 0 is the rectangle origin.
        let corners_out = [corner_nodes[3], corner_nodes[0], corner_nodes[1], corner_nodes[2]];
        let angles_out = [corner_angles[3], corner_angles[0], corner_angles[1], corner_angles[2]];
        let mismatch = (lens[0] - lens[2]).abs().max((lens[1] - lens[3]).abs());
        let polygon = develop(mg, topo, imm, &darts);
        let closure = (polygon[0] - polygon[polygon.len() - 1]).norm();
        let area = 0.5 * polygon.windows(2).map(|w| cross(w[0], w[1])).sum::<f64>()
            + 0.5 * cross(polygon[polygon.len() - 1], polygon[0]);
        patches.push(Patch {
            corners: corners_out,
            sides,
            corner_angles: angles_out,
            width: 0.5 * (lens[0] + lens[2]),
            height: 0.5 * (lens[1] + lens[3]),
            mismatch,
            area,
            closure,
        });
    }
    let mut adjacency = Vec::new();
    for a in 0..mg.arcs.len() {
        let (p, s) = dart_side[2 * a];
        let (o, t) = dart_side[2 * a + 1];
        adjacency.push(Adjacency {
            arc: a,
            patch: p,
            side: s,
            other: o,
            other_side: t,
            quarter_turns: ((2 + s as i64 - t as i64).rem_euclid(4)) as u8,
        });
    }
    let arcs = mg
        .arcs
        .iter()
        .map(|a| {
            let t = &mg.trajectories[a.trajectory];
            let polyline = t
                .polyline(imm)
                .into_iter()
                .filter(|(_, s)| *s > a.s0 && *s < a.s1)
                .map(|(p, _)| p)
                .collect::<Vec<_>>();
            let at = |s: f64, fwd: bool| {
                let g = segment_at(t, s, fwd);
                SurfacePoint { face: g.face, bary: SurfacePoint::bary_in_chart(&imm.face(g.face), g.at(s)) }
            };
            let mut pl = vec![at(a.s0, true)];
            pl.extend(polyline);
            pl.push(at(a.s1, false));
            ArcRecord { trajectory: a.trajectory, from: a.from, to: a.to, length: a.length(), polyline: pl }
        })
        .collect();
    Ok(TMesh { schema: TMESH_SCHEMA.to_string(), patches, adjacency, junctions: mg.junctions.clone(), xings: mg.xings.clone(), nodes: mg.nodes.iter().map(|n| n.kind).collect(), arcs })
}

/// Rigid motion `z ↦ rot·z + tr`.
#[derive(Clone, Copy, Debug)]
struct Motion {
    rot: Complex64,
    tr: Complex64,
}

impl Motion {
    const ID: Motion = Motion { rot: Complex64 { re: 1.0, im: 0.0 }, tr: Complex64 { re: 0.0, im: 0.0 } };

    fn apply(&self, z: Complex64) -> Complex64 {
        self.rot * z + self.tr
    }

    /// `self` after the inverse of the transition out of `h`'s face into
    /// its twin's, if the edge is cut.
    fn cross_edge(self, imm: &Immersion, topo: &Topology, h: usize) -> Motion {
        match &imm.transitions[topo.twin(h)] {
            Some(t) => {
                let (r, tr) = (t.rotation(), Complex64::new(t.translation[0], t.translation[1]));
                let inv = Motion { rot: r.conj(), tr: -r.conj() * tr };
                Motion { rot: self.rot * inv.rot, tr: self.rot * inv.tr + self.tr }
            }
            None => self,
        }
    }
}

fn arc_segments(t: &Trajectory, s0: f64, s1: f64) -> Vec<Segment> {
    t.segments
        .iter()
        .filter(|g| g.s1 > s0 && g.s0 < s1)
        .map(|g| {
            let (a, b) = (g.s0.max(s0), g.s1.min(s1));
            Segment { a: g.at(a), b: g.at(b), s0: a, s1: b, ..*g }
        })
        .collect()
}

/// Halfedge of `f` whose twin lies in `g`, nearest to `z`.
fn shared_edge(topo: &Topology, imm: &Immersion, f: usize, g: usize, z: Complex64) -> Option<usize> {
    let chart = imm.face(f);
    (0..3)
        .filter(|&k| topo.twin(3 * f + k) / 3 == g)
        .min_by(|&a, &b| {
            let d = |k: usize| {
                let (p, q) = (chart[k], chart[(k + 1) % 3]);
                let t = (((z - p) * (q - p).conj()).re / (q - p).norm_sqr()).clamp(0.0, 1.0);
                (p + (q - p) * t - z).norm()
            };
            d(a).total_cmp(&d(b))
        })
        .map(|k| 3 * f + k)
}

/// Motion of the chart of `c2`'s face relative to `c1`'s, both corners at
/// one vertex, turning clockwise from direction `from` (in `c1`) to `to`
/// (in `c2`).
fn around_vertex(topo: &Topology, imm: &Immersion, c1: usize, from: Complex64, c2: usize, to: Complex64) -> Motion {
    let local = |c: usize, d: Complex64| {
        let z = imm.face(c / 3);
        let k = c % 3;
        let a = (d / (z[(k + 1) % 3] - z[k])).arg().rem_euclid(TAU);
        if a > TAU - 1e-9 {
            0.0
        } else {
            a
        }
    };
    let sector = |c: usize| {
        let z = imm.face(c / 3);
        let k = c % 3;
        ((z[(k + 2) % 3] - z[k]) / (z[(k + 1) % 3] - z[k])).arg()
    };
    let target = local(c2, to);
    let mut m = Motion::ID;
    let mut cur = c1;
    let mut pos = local(c1, from);
    for _ in 0..4 * topo.n_faces() {
        if cur == c2 && target <= pos + 1e-9 {
            return m;
        }
        m = m.cross_edge(imm, topo, cur);
        cur = topo.next(topo.twin(cur));
        pos = sector(cur);
    }
    m
}

/// Boundary of an arrangement face laid out in one chart.
fn develop(mg: &MotorGraph, topo: &Topology, imm: &Immersion, darts: &[usize]) -> Vec<Complex64> {
    let mut pts = Vec::new();
    let mut m = Motion::ID;
    let mut prev: Option<Segment> = None;
    for &d in darts {
        let arc = &mg.arcs[d / 2];
        let t = &mg.trajectories[arc.trajectory];
        let mut segs = arc_segments(t, arc.s0, arc.s1);
        if d % 2 == 1 {
            segs.reverse();
            for g in &mut segs {
                std::mem::swap(&mut g.a, &mut g.b);
                g.dir = -g.dir;
            }
        }
        let node = if d % 2 == 0 { arc.from } else { arc.to };
        for (i, g) in segs.iter().enumerate() {
            if let Some(p) = prev {
                if p.face != g.face {
                    m = match (i, mg.nodes[node].kind) {
                        (0, NodeKind::Singularity(v)) => {
                            let corner = |f: usize| (0..3).map(|k| 3 * f + k).find(|&h| topo.origin(h) == v);
                            match (corner(p.face), corner(g.face)) {
                                (Some(c1), Some(c2)) => {
                                    let r = around_vertex(topo, imm, c1, -p.dir, c2, g.dir);
                                    Motion { rot: m.rot * r.rot, tr: m.rot * r.tr + m.tr }
                                }
                                _ => m,
                            }
                        }
                        _ => match shared_edge(topo, imm, p.face, g.face, p.b) {
                            Some(h) => m.cross_edge(imm, topo, h),
                            None => m,
                        },
                    };
                }
            }
            if pts.is_empty() {
                pts.push(m.apply(g.a));
            }
            pts.push(m.apply(g.b));
            prev = Some(*g);
        }
    }
    pts
}

impl TMesh {
    /// Sum of intrinsic patch areas.
    pub fn total_area(&self) -> f64 {
        self.patches.iter().map(|p| p.area).sum()
    }

    /// Sum of `width × height` over patches.
    pub fn rect_area(&self) -> f64 {
        self.patches.iter().map(Patch::rect_area).sum()
    }

    pub fn max_corner_error(&self) -> f64 {
        self.patches
            .iter()
            .flat_map(|p| p.corner_angles.iter())
            .map(|a| (a - FRAC_PI_2).abs())
            .fold(0.0, f64::max)
    }

    /// Arc ends at each node.
    pub fn valences(&self) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        for a in &self.arcs {
            out[a.from] += 1;
            out[a.to] += 1;
        }
        out
    }

    pub fn to_json(&self) -> Result<String, TmeshError> {
        if self.patches.is_empty() {
            return Err(TmeshError::EmptyTMesh);
        }
        serde_json::to_string_pretty(self).map_err(|e| TmeshError::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, TmeshError> {
        let t: TMesh = serde_json::from_str(s).map_err(|e| TmeshError::Io(e.to_string()))?;
        if t.schema != TMESH_SCHEMA {
            return Err(TmeshError::Io(format!("unknown schema {}", t.schema)));
        }
        Ok(t)
    }

    /// Motor-graph polylines as OBJ lines, grouped per patch side with a
    /// per-patch colour in the vertex records and rectangle UVs.
    pub fn preview_obj(&self, topo: &Topology, positions: &[[f64; 3]]) -> Result<String, TmeshError> {
        if self.patches.is_empty() {
            return Err(TmeshError::EmptyTMesh);
        }
        let xyz = |p: &SurfacePoint| {
            let v = topo.face(p.face);
            let mut out = [0.0; 3];
            for k in 0..3 {
                for c in 0..3 {
                    out[c] += p.bary[k] * positions[v[k]][c];
                }
            }
            out
        };
        let mut s = String::new();
        let mut nv = 0;
        for (pi, patch) in self.patches.iter().enumerate() {
            let hue = (pi as f64 * 0.618_033_988_749_895).fract();
            let rgb = [hue, (hue + 1.0 / 3.0).fract(), (hue + 2.0 / 3.0).fract()];
            writeln!(s, "g patch{pi}").unwrap();
            let mut uv = Complex64::new(0.0, 0.0);
            for (side, chain) in patch.sides.iter().enumerate() {
                let dir = AXES[side];
                let first = nv + 1;
                for &(a, fwd) in chain {
                    let rec = &self.arcs[a];
                    let pts: Vec<&SurfacePoint> =
                        if fwd { rec.polyline.iter().collect() } else { rec.polyline.iter().rev().collect() };
                    let n = pts.len().max(2) - 1;
                    for (i, p) in pts.iter().enumerate() {
                        let q = xyz(p);
                        let w = uv + dir * (rec.length * i as f64 / n as f64);
                        writeln!(s, "v {:.16e} {:.16e} {:.16e} {:.6} {:.6} {:.6}", q[0], q[1], q[2], rgb[0], rgb[1], rgb[2])
                            .unwrap();
                        writeln!(s, "vt {:.16e} {:.16e}", w.re, w.im).unwrap();
                        nv += 1;
                    }
                    uv += dir * rec.length;
                }
                let idx: Vec<String> = (first..=nv).map(|i| format!("{i}/{i}")).collect();
                if idx.len() >= 2 {
                    writeln!(s, "l {}", idx.join(" ")).unwrap();
                }
            }
        }
        Ok(s)
    }

    pub fn write(&self, dir: impl AsRef<Path>, topo: &Topology, positions: &[[f64; 3]]) -> Result<(), TmeshError> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| TmeshError::Io(e.to_string());
        std::fs::write(dir.join("tmesh.json"), self.to_json()?).map_err(io)?;
        std::fs::write(dir.join("tmesh_preview.obj"), self.preview_obj(topo, positions)?).map_err(io)?;
        Ok(())
    }
}

/// Intrinsic angle between consecutive rays of a fan, for audits.
pub fn fan_gaps(tracer: &Tracer, rays: &[Ray]) -> Vec<f64> {
    let Some(Origin::Vertex(v)) = rays.first().map(|r| r.origin) else {
        return Vec::new();
    };
    let pos: Vec<f64> = rays.iter().map(|r| tracer.fan_angle(v, r.face, r.dir)).collect();
    let period = tracer.period(v);
    let k = pos.len();
    (0..k).map(|j| (pos[(j + 1) % k] - pos[j]).rem_euclid(period)).map(|g| if g == 0.0 { period } else { g }).collect()
}
