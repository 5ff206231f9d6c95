//! Discrete Ricci flow by vertex scaling on an intrinsic Delaunay
//! triangulation, and holonomy of loops in the resulting cone metric.
//!
//! Edge lengths are `l_ij = e^{u_i} β_ij e^{u_j}`. Between Newton steps,
//! non-Delaunay edges are flipped intrinsically: the new diagonal gets its
//! Euclidean length in the unfolded quad and `β` is rescaled to match, so the
//! current metric is unchanged by a flip.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jacobi::Divisor;
use crate::linalg::{PinnedLaplacian, SolveError};
use crate::mesh::{chart_from_lengths, triangle_angles, FlipMap, Topology};

#[derive(Clone, Debug, Error)]
pub enum RicciError {
    #[error("target curvature sums to {found}, Gauss-Bonnet requires {expected}")]
    GaussBonnet { found: f64, expected: f64 },
    #[error("face {face} violates the triangle inequality")]
    TriangleInequality { face: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("flow stalled after {iterations} iterations with curvature error {max_error:e}")]
    Stalled { iterations: usize, max_error: f64, metric: Box<ConeMetric> },
    #[error("loop passes through cone vertex {0}")]
    ThroughCone(usize),
    #[error("crossing sequence is not a closed dual loop")]
    OpenLoop,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RicciConfig {
    /// Max per-vertex curvature error at convergence (radians).
    pub tol: f64,
    pub max_iters: usize,
    pub armijo: f64,
}

impl Default for RicciConfig {
    fn default() -> Self {
        RicciConfig { tol: 1e-8, max_iters: 500, armijo: 1e-4 }
    }
}

/// `K̄ = −n·π/2` at the vertex carrying each divisor point, zero elsewhere.
pub fn target_curvature(
    topo: &Topology,
    point_vertex: &[usize],
    d: &Divisor,
) -> Result<Vec<f64>, RicciError> {
    let mut k = vec![0.0; topo.n_vertices()];
    let mut quarters = 0i64;
    for (t, &v) in d.terms.iter().zip(point_vertex) {
        k[v] += -(t.order as f64) * PI / 2.0;
        quarters -= t.order as i64;
    }
    let expected = 2.0 * PI * topo.euler_characteristic() as f64;
    // Compare in exact quarter-turn units.
    if quarters != 4 * topo.euler_characteristic() {
        return Err(RicciError::GaussBonnet { found: quarters as f64 * PI / 2.0, expected });
    }
    Ok(k)
}

/// Lobachevsky function `Л(θ) = −∫_0^θ log|2 sin t| dt = Cl₂(2θ)/2`.
pub fn lobachevsky(theta: f64) -> f64 {
    0.5 * clausen2(2.0 * theta)
}

/// Clausen function `Cl₂(x) = −∫_0^x log|2 sin(t/2)| dt`, reduced to
/// `[−π, π]` and summed with its Bernoulli series.
pub fn clausen2(x: f64) -> f64 {
    let mut t = x % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t < -PI {
        t += 2.0 * PI;
    }
    if t == 0.0 {
        return 0.0;
    }
    let mut sum = t - t * t.abs().ln();
    let r = (t / (2.0 * PI)).powi(2);
    let mut pow = t * r;
    for n in 1..60 {
        let zeta = if n == 1 { PI * PI / 6.0 } else { zeta_even(n) };
        let term = zeta * pow / (n as f64 * (2 * n + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        pow *= r;
    }
    sum
}

/// `ζ(2n)` for `n ≥ 2` by direct summation with an Euler-Maclaurin tail.
fn zeta_even(n: i32) -> f64 {
    const N: f64 = 64.0;
    let s = 2 * n;
    let head: f64 = (1..=64).map(|k| (k as f64).powi(-s)).sum();
    let sf = s as f64;
    head + N.powi(1 - s) / (sf - 1.0) - 0.5 * N.powi(-s) + sf / 12.0 * N.powi(-s - 1)
        - sf * (sf + 1.0) * (sf + 2.0) / 720.0 * N.powi(-s - 3)
}

/// Intrinsic triangulation with a conformal factor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeMetric {
    /// Connectivity before any flip.
    pub initial: Topology,
    pub topo: Topology,
    pub u: Vec<f64>,
    /// Per edge of `topo`.
    pub beta: Vec<f64>,
    pub target: Vec<f64>,
    /// Edges flipped, in order, replayable on `initial`.
    pub flips: Vec<usize>,
    pub iterations: usize,
    pub epochs: usize,
    /// Newton iterations in each Delaunay epoch.
    pub epoch_iterations: Vec<usize>,
    /// Max curvature error after each iteration.
    pub history: Vec<f64>,
    /// Delaunay epoch and Ricci energy at the start of each Newton step.
    pub energy: Vec<(usize, f64)>,
    /// Worst `|Σ K − 2πχ|` observed over all iterates.
    pub gauss_bonnet_drift: f64,
}

impl ConeMetric {
    pub fn new(topo: &Topology, lengths: &[f64], target: Vec<f64>) -> Self {
        ConeMetric {
            initial: topo.clone(),
            topo: topo.clone(),
            u: vec![0.0; topo.n_vertices()],
            beta: lengths.to_vec(),
            target,
            flips: Vec::new(),
            iterations: 0,
            epochs: 0,
            epoch_iterations: Vec::new(),
            history: Vec::new(),
            energy: Vec::new(),
            gauss_bonnet_drift: 0.0,
        }
    }

    pub fn lengths_at(&self, u: &[f64]) -> Vec<f64> {
        (0..self.topo.n_edges())
            .map(|e| {
                let h = self.topo.edge_halfedge(e);
                (u[self.topo.origin(h)] + u[self.topo.target(h)]).exp() * self.beta[e]
            })
            .collect()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let h = self.topo.edge_halfedge(e);
        (self.u[self.topo.origin(h)] + self.u[self.topo.target(h)]).exp() * self.beta[e]
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.lengths_at(&self.u)
    }

    /// Per corner, with triangle-inequality checking.
    pub fn corner_angles(&self) -> Result<Vec<f64>, RicciError> {
        corner_angles(&self.topo, &self.lengths())
    }

    pub fn curvature(&self) -> Result<Vec<f64>, RicciError> {
        Ok(curvature(&self.topo, &self.corner_angles()?))
    }

    pub fn max_error(&self) -> Result<f64, RicciError> {
        let k = self.curvature()?;
        Ok(k.iter().zip(&self.target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Cone angle `Σθ` at every vertex.
    pub fn cone_angles(&self) -> Result<Vec<f64>, RicciError> {
        let a = self.corner_angles()?;
        let mut out = vec![0.0; self.topo.n_vertices()];
        for (c, x) in a.iter().enumerate() {
            out[self.topo.origin(c)] += x;
        }
        Ok(out)
    }

    /// Replay the flips on `initial`, transporting each crossing sequence.
    pub fn transport_loops(&self, loops: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut topo = self.initial.clone();
        let mut out: Vec<Vec<usize>> = loops.to_vec();
        for &e in &self.flips {
            let before = topo.clone();
            let map = topo.flip(e).expect("recorded flips replay");
            for l in out.iter_mut() {
                *l = transport_crossings(&before, &topo, &map, l);
            }
        }
        out
    }
}

fn valid(l: [f64; 3]) -> bool {
    l.iter().all(|x| x.is_finite() && *x > 0.0) && l[0] < l[1] + l[2] && l[1] < l[0] + l[2] && l[2] < l[0] + l[1]
}

fn face_lengths(topo: &Topology, lengths: &[f64], f: usize) -> [f64; 3] {
    [0, 1, 2].map(|k| lengths[topo.edge(3 * f + k)])
}

/// Euclidean corner angles; corner `h` is at `origin(h)`.
pub fn corner_angles(topo: &Topology, lengths: &[f64]) -> Result<Vec<f64>, RicciError> {
    let mut out = vec![0.0; topo.n_halfedges()];
    for f in 0..topo.n_faces() {
        let l = face_lengths(topo, lengths, f);
        if !valid(l) {
            return Err(RicciError::TriangleInequality { face: f });
        }
        let a = triangle_angles(l);
        out[3 * f..3 * f + 3].copy_from_slice(&a);
    }
    Ok(out)
}

/// `K_v = 2π − Σ θ` (sign convention of the angle defect).
pub fn curvature(topo: &Topology, angles: &[f64]) -> Vec<f64> {
    let mut k = vec![2.0 * PI; topo.n_vertices()];
    for (c, a) in angles.iter().enumerate() {
        k[topo.origin(c)] -= a;
    }
    k
}

/// Per-edge `(cot θ_k + cot θ_l)/2` from corner angles.
pub fn cotan_weights_from_angles(topo: &Topology, angles: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; topo.n_edges()];
    for h in 0..topo.n_halfedges() {
        let opp = topo.prev(h);
        w[topo.edge(h)] += 0.5 / angles[opp].tan();
    }
    w
}

/// Gradient `K̄ − K` and its Jacobian in `u`, as full symmetric triplets.
/// With `w_ij = (cot θ_k + cot θ_l)/2` the Jacobian has off-diagonal `2w_ij`
/// and diagonal `−Σ_j 2w_ij`: each `u_i` enters the log-length of an edge
/// with unit weight, twice the half-exponent scaling the cotan weight fits.
pub struct RicciTerms {
    pub gradient: Vec<f64>,
    pub hessian: Vec<(usize, usize, f64)>,
    pub weights: Vec<f64>,
}

pub fn ricci_energy_terms(topo: &Topology, lengths: &[f64], target: &[f64]) -> Result<RicciTerms, RicciError> {
    let angles = corner_angles(topo, lengths)?;
    let k = curvature(topo, &angles);
    let gradient = target.iter().zip(&k).map(|(t, x)| t - x).collect();
    let weights = cotan_weights_from_angles(topo, &angles);
    let mut diag = vec![0.0; topo.n_vertices()];
    let mut hessian = Vec::new();
    for e in 0..topo.n_edges() {
        let h = topo.edge_halfedge(e);
        let (i, j) = (topo.origin(h), topo.target(h));
        let w = 2.0 * weights[e];
        hessian.push((i, j, w));
        hessian.push((j, i, w));
        diag[i] -= w;
        diag[j] -= w;
    }
    hessian.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    Ok(RicciTerms { gradient, hessian, weights })
}

/// Convex energy with gradient `K − K̄` (the negative of the flow gradient):
/// `Σ_f Σ_k [(θ_k − π/2) log l_k + Л(θ_k)] + Σ_v (2π − K̄_v) u_v`, with `θ_k`
/// the angle opposite edge `k`. Fixed triangulation; flips shift it.
pub fn ricci_energy(topo: &Topology, beta: &[f64], u: &[f64], target: &[f64]) -> Option<f64> {
    let mut e = 0.0;
    for f in 0..topo.n_faces() {
        let mut l = [0.0; 3];
        for k in 0..3 {
            let h = 3 * f + k;
            l[k] = (u[topo.origin(h)] + u[topo.target(h)]).exp() * beta[topo.edge(h)];
        }
        if !valid(l) {
            return None;
        }
        let a = triangle_angles(l);
        for k in 0..3 {
            // Angle at corner k+2 is opposite edge k.
            let opp = a[(k + 2) % 3];
            e += (opp - PI / 2.0) * l[k].ln() + lobachevsky(opp);
        }
    }
    for v in 0..topo.n_vertices() {
        e += (2.0 * PI - target[v]) * u[v];
    }
    Some(e)
}

/// Flip edges until every one is locally Delaunay under the current
/// lengths. Returns the number of flips.
pub fn make_delaunay(metric: &mut ConeMetric) -> Result<usize, RicciError> {
    let mut count = 0;
    let mut queue: std::collections::VecDeque<usize> = (0..metric.topo.n_edges()).collect();
    let mut queued = vec![true; metric.topo.n_edges()];
    let mut budget = 50 * metric.topo.n_edges() + 1000;
    while let Some(e) = queue.pop_front() {
        queued[e] = false;
        budget -= 1;
        if budget == 0 {
            break;
        }
        let topo = &metric.topo;
        let h = topo.edge_halfedge(e);
        let t = topo.twin(h);
        let len = |x: usize| metric.edge_length(topo.edge(x));
        let l1 = [0, 1, 2].map(|k| len(3 * (h / 3) + k));
        let l2 = [0, 1, 2].map(|k| len(3 * (t / 3) + k));
        if !valid(l1) {
            return Err(RicciError::TriangleInequality { face: h / 3 });
        }
        if !valid(l2) {
            return Err(RicciError::TriangleInequality { face: t / 3 });
        }
        let a1 = triangle_angles(l1);
        let a2 = triangle_angles(l2);
        let opp1 = a1[(h % 3 + 2) % 3];
        let opp2 = a2[(t % 3 + 2) % 3];
        if 1.0 / opp1.tan() + 1.0 / opp2.tan() >= -1e-12 {
            continue;
        }
        // Unfold: angle at a = origin(h) between edges a→c and a→d.
        let (n2, p1) = (topo.next(t), topo.prev(h));
        let (c, d) = (topo.origin(p1), topo.origin(topo.prev(t)));
        let theta = a1[h % 3] + a2[n2 % 3];
        let (lac, lad) = (len(p1), len(n2));
        let lcd = (lac * lac + lad * lad - 2.0 * lac * lad * theta.cos()).max(0.0).sqrt();
        let (uc, ud) = (metric.u[c], metric.u[d]);
        if metric.topo.flip(e).is_err() {
            continue;
        }
        metric.beta[e] = lcd * (-uc - ud).exp();
        metric.flips.push(e);
        count += 1;
        let topo = &metric.topo;
        for f in [topo.edge_halfedge(e) / 3, topo.twin(topo.edge_halfedge(e)) / 3] {
            for k in 0..3 {
                let ee = topo.edge(3 * f + k);
                if ee != e && !queued[ee] {
                    queued[ee] = true;
                    queue.push_back(ee);
                }
            }
        }
    }
    Ok(count)
}

fn project_mean_zero(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Newton's method on the Ricci energy with Delaunay flips between steps.
pub fn flow_to_metric(
    topo: &Topology,
    lengths: &[f64],
    target: &[f64],
    cfg: &RicciConfig,
) -> Result<ConeMetric, RicciError> {
    let chi = topo.euler_characteristic() as f64;
    let sum: f64 = target.iter().sum();
    if (sum - 2.0 * PI * chi).abs() > 1e-9 {
        return Err(RicciError::GaussBonnet { found: sum, expected: 2.0 * PI * chi });
    }
    let mut m = ConeMetric::new(topo, lengths, target.to_vec());
    let mut epoch_iters = 0;
    let stalled = |m: ConeMetric, err: f64| RicciError::Stalled {
        iterations: m.iterations,
        max_error: err,
        metric: Box::new(m),
    };
    loop {
        if make_delaunay(&mut m)? > 0 || m.epochs == 0 {
            if m.epochs > 0 {
                m.epoch_iterations.push(epoch_iters);
            }
            m.epochs += 1;
            epoch_iters = 0;
        }
        let lengths = m.lengths();
        let terms = ricci_energy_terms(&m.topo, &lengths, &m.target)?;
        let k_sum: f64 = m.target.iter().zip(&terms.gradient).map(|(t, g)| t - g).sum();
        m.gauss_bonnet_drift = m.gauss_bonnet_drift.max((k_sum - 2.0 * PI * chi).abs());
        let err = max_abs(&terms.gradient);
        m.history.push(err);
        if err <= cfg.tol {
            m.epoch_iterations.push(epoch_iters);
            return Ok(m);
        }
        if m.iterations >= cfg.max_iters {
            return Err(stalled(m, err));
        }
        m.iterations += 1;
        epoch_iters += 1;

        // Newton direction: L δ = K̄ − K with L the (PSD) cotan Laplacian.
        let w2: Vec<f64> = terms.weights.iter().map(|w| 2.0 * w).collect();
        let lap = PinnedLaplacian::new(&m.topo, &w2, 0)?;
        let mut g = terms.gradient.clone();
        project_mean_zero(&mut g);
        let mut delta = lap.solve(&g, 1e-13).or_else(|_| lap.solve(&g, 1e-9))?;
        project_mean_zero(&mut delta);
        let e0 = ricci_energy(&m.topo, &m.beta, &m.u, &m.target).expect("current metric is valid");
        m.energy.push((m.epochs, e0));
        // Directional derivative of the convex energy: (K − K̄)·δ.
        let slope: f64 = -terms.gradient.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = m.u.iter().zip(&delta).map(|(u, d)| u + alpha * d).collect();
            if let Some(e1) = ricci_energy(&m.topo, &m.beta, &trial, &m.target) {
                let armijo = e1 <= e0 + cfg.armijo * alpha * slope;
                // Near convergence energy differences drown in roundoff; fall
                // back to the curvature error itself.
                let roundoff = (e1 - e0).abs() <= 1e-12 * e0.abs().max(1.0);
                let better = roundoff && {
                    let l = m.lengths_at(&trial);
                    ricci_energy_terms(&m.topo, &l, &m.target)
                        .map(|t| max_abs(&t.gradient) <= 0.5 * err)
                        .unwrap_or(false)
                };
                if armijo || better {
                    m.u = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(stalled(m, err));
        }
    }
}

/// Remap a crossing sequence through one flip. `before` and `after` are the
/// connectivities around the flip described by `map`.
pub fn transport_crossings(before: &Topology, after: &Topology, map: &FlipMap, seq: &[usize]) -> Vec<usize> {
    let [f1, f2] = map.faces;
    let in_quad = |f: usize| f == f1 || f == f2;
    let n = seq.len();
    let Some(start) = (0..n).find(|&i| !in_quad(seq[i] / 3)) else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(n + 2);
    let mut i = 0;
    while i < n {
        let c = seq[(start + i) % n];
        if !in_quad(before.twin(c) / 3) {
            out.push(c);
            i += 1;
            continue;
        }
        // Entering the quad through an outer edge; skip diagonal crossings
        // until the exit.
        out.push(c);
        let entry_face = after.twin(c) / 3;
        let mut j = i + 1;
        let exit = loop {
            let x = seq[(start + j) % n];
            if !in_quad(before.twin(x) / 3) {
                break x;
            }
            j += 1;
        };
        let exit_new = map.map(exit);
        let exit_face = exit_new / 3;
        if exit_face != entry_face {
            out.push(3 * entry_face + 2);
        }
        out.push(exit_new);
        i = j + 1;
    }
    reduce_cyclic(after, out)
}

/// Cancel crossings immediately undone by crossing back.
pub fn reduce_cyclic(topo: &Topology, seq: Vec<usize>) -> Vec<usize> {
    let mut stack: Vec<usize> = Vec::with_capacity(seq.len());
    for c in seq {
        if stack.last() == Some(&topo.twin(c)) {
            stack.pop();
        } else {
            stack.push(c);
        }
    }
    while stack.len() >= 2 && stack[0] == topo.twin(*stack.last().unwrap()) {
        stack.pop();
        stack.remove(0);
    }
    stack
}

/// Crossings of a loop running counterclockwise around `v` through its
/// incident faces.
pub fn vertex_link_crossings(topo: &Topology, v: usize) -> Vec<usize> {
    topo.outgoing(v).map(|c| topo.prev(c)).collect()
}

/// Rotation (degrees in `[0, 360)`) of the developing map along a closed
/// sequence of edge crossings.
pub fn holonomy(metric: &ConeMetric, crossings: &[usize]) -> Result<f64, RicciError> {
    let topo = &metric.topo;
    if crossings.is_empty() {
        return Ok(0.0);
    }
    let lengths = metric.lengths();
    for w in 0..crossings.len() {
        let (a, b) = (crossings[w], crossings[(w + 1) % crossings.len()]);
        if topo.twin(a) / 3 != b / 3 {
            return Err(RicciError::OpenLoop);
        }
    }
    let chart = |f: usize| chart_from_lengths(face_lengths(topo, &lengths, f));
    let mut rot = Complex64::new(1.0, 0.0);
    for &c in crossings {
        let (zf, zg) = (chart(c / 3), chart(topo.twin(c) / 3));
        let tw = topo.twin(c);
        let e_f = zf[(c % 3 + 1) % 3] - zf[c % 3];
        let e_g = zg[tw % 3] - zg[(tw % 3 + 1) % 3];
        let r = e_f / e_g;
        rot *= r / r.norm();
    }
    let deg = rot.arg().to_degrees();
    Ok(if deg < 0.0 { deg + 360.0 } else { deg }.rem_euclid(360.0))
}

/// Holonomy of a closed halfedge loop on the input mesh, measured along its
/// left pushoff after transport through the recorded flips.
pub fn loop_holonomy(metric: &ConeMetric, lp: &[usize]) -> Result<f64, RicciError> {
    let topo = &metric.initial;
    for &h in lp {
        let v = topo.origin(h);
        if metric.target[v].abs() > 1e-12 {
            return Err(RicciError::ThroughCone(v));
        }
    }
    pushoff_holonomy(metric, lp)
}

/// Like [`loop_holonomy`] without the cone check: the left pushoff is a dual
/// loop and never meets a vertex, so it is well defined for any loop.
pub fn pushoff_holonomy(metric: &ConeMetric, lp: &[usize]) -> Result<f64, RicciError> {
    let topo = &metric.initial;
    let seq = reduce_cyclic(topo, crate::homology::pushoff_crossings(topo, lp));
    let moved = metric.transport_loops(&[seq]).pop().expect("one loop in, one out");
    holonomy(metric, &moved)
}

/// Serialized metric: conformal factors, current intrinsic lengths and the
/// flip record replayable on the input connectivity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricFile {
    pub u: Vec<f64>,
    pub faces: Vec<[usize; 3]>,
    pub lengths: Vec<f64>,
    pub flips: Vec<usize>,
    pub iterations: usize,
    pub max_error: f64,
}

impl ConeMetric {
    pub fn to_file(&self) -> Result<MetricFile, RicciError> {
        Ok(MetricFile {
            u: self.u.clone(),
            faces: self.topo.faces().to_vec(),
            lengths: self.lengths(),
            flips: self.flips.clone(),
            iterations: self.iterations,
            max_error: self.max_error()?,
        })
    }
}

/// Distance on the circle between two angles in degrees.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}
