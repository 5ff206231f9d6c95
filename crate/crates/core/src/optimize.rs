//! Initial divisor construction and gradient descent on the Abel-Jacobi
//! residual.
//!
//! Points live in face charts. A step walks each point along a straight line
//! through the triangle strip; crossing a cut edge adds `n_i` times the
//! edge's lattice jump to the held integers `(s, t)`, so the residual stays
//! continuous without re-rooting the cut.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jacobi::{reduce_mod_lattice, AbelJacobiImage, AbelJacobiMap, Divisor, DivisorTerm, JacobiError};
use crate::mesh::{angle_defect, GeometryError, SurfacePoint, Topology};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("only {found} curvature {kind} available, {needed} needed")]
    NotEnoughCritical { found: usize, needed: usize, kind: &'static str },
    #[error("divisor degree {found}, expected {expected}")]
    Degree { found: i64, expected: i64 },
    #[error("no convergence after {iterations} iterations (best residual² {best_energy:e})")]
    IterationCap { iterations: usize, best_energy: f64, best: Box<OptimizationState> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizeConfig {
    /// Stop once `‖μ‖² ≤ epsilon` ...
    pub epsilon: f64,
    /// ... and every residual component has modulus at most this.
    pub component_tol: f64,
    pub max_iters: usize,
    pub armijo: f64,
    /// Largest point displacement per step, in mean edge lengths.
    pub step_fraction: f64,
    /// Minimum distance between points sharing a face, in local edge lengths.
    pub min_separation: f64,
    pub lattice_cap: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            epsilon: 3.0e-4,
            component_tol: 1e-3,
            max_iters: 100_000,
            armijo: 1e-4,
            step_fraction: 0.1,
            min_separation: 1e-3,
            lattice_cap: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizationState {
    pub divisor: Divisor,
    /// `4(φ)`.
    pub reference: Divisor,
    pub s: Vec<i64>,
    pub t: Vec<i64>,
    pub energy: f64,
    /// Per point, in its face chart.
    pub gradient: Vec<Complex64>,
    pub iteration: usize,
    pub step: f64,
}

impl OptimizationState {
    pub fn coords(&self) -> Vec<i64> {
        self.s.iter().chain(&self.t).copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub residual_norm: f64,
    pub step: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,energy,residual_norm,step\n");
    for r in rows {
        out.push_str(&format!("{},{:e},{:e},{:e}\n", r.iteration, r.energy, r.residual_norm, r.step));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub divisor: Divisor,
    pub image: AbelJacobiImage,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

/// Fill the divisor up to degree `8g − 8`: order +1 points at local minima of
/// the angle defect, order −1 points at local maxima, strongest first. Each
/// new point sits at the barycenter of a face incident to its vertex.
pub fn initialize_divisor(
    topo: &Topology,
    lengths: &[f64],
    features: Option<&Divisor>,
) -> Result<Divisor, OptimizeError> {
    let g = topo.genus() as i64;
    let target = 8 * g - 8;
    let mut d = features.cloned().unwrap_or_default();
    let deficit = target - d.degree();
    if deficit == 0 {
        return Ok(d);
    }
    let k = angle_defect(topo, lengths)?;
    let want_min = deficit > 0;
    let mut used_faces: Vec<usize> = d.terms.iter().map(|t| t.point.face).collect();
    let mut used_vertices: Vec<usize> = d
        .terms
        .iter()
        .map(|t| {
            let c = (0..3).max_by(|&a, &b| t.point.bary[a].total_cmp(&t.point.bary[b])).unwrap();
            topo.face(t.point.face)[c]
        })
        .collect();
    let mut critical: Vec<usize> = (0..topo.n_vertices())
        .filter(|&v| {
            topo.neighbours(v).all(|w| if want_min { k[v] < k[w] } else { k[v] > k[w] })
        })
        .collect();
    critical.sort_by(|&a, &b| {
        let o = k[a].total_cmp(&k[b]);
        (if want_min { o } else { o.reverse() }).then(a.cmp(&b))
    });
    let needed = deficit.unsigned_abs() as usize;
    let mut added = 0;
    for v in critical.iter().copied() {
        if added == needed {
            break;
        }
        if used_vertices.contains(&v) {
            continue;
        }
        let Some(face) = topo.outgoing(v).map(|h| h / 3).find(|f| !used_faces.contains(f)) else { continue };
        used_faces.push(face);
        used_vertices.push(v);
        d.terms.push(DivisorTerm { point: SurfacePoint::barycenter(face), order: if want_min { 1 } else { -1 } });
        added += 1;
    }
    if added < needed {
        return Err(OptimizeError::NotEnoughCritical {
            found: added,
            needed,
            kind: if want_min { "minima" } else { "maxima" },
        });
    }
    Ok(d)
}

/// The quantities the optimizer needs from the surface.
pub struct Objective<'a> {
    pub topo: &'a Topology,
    pub map: &'a AbelJacobiMap,
    /// `Φ(4(φ))` evaluated once.
    pub reference_image: Vec<Complex64>,
    pub mean_edge: f64,
    pub face_edge: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(topo: &'a Topology, lengths: &[f64], map: &'a AbelJacobiMap, reference: &Divisor) -> Self {
        let reference_image = image_lenient(map, reference);
        let mean_edge = lengths.iter().sum::<f64>() / lengths.len() as f64;
        let face_edge =
            (0..topo.n_faces()).map(|f| (0..3).map(|k| lengths[topo.edge(3 * f + k)]).sum::<f64>() / 3.0).collect();
        Objective { topo, map, reference_image, mean_edge, face_edge }
    }

    /// `r = Φ(D) − Σ s λ_a − Σ t λ_b − Φ(4(φ))`.
    pub fn residual(&self, d: &Divisor, coords: &[i64]) -> Vec<Complex64> {
        let phi = image_lenient(self.map, d);
        let lp = self.map.lattice.point(coords);
        (0..phi.len()).map(|j| phi[j] - lp[j] - self.reference_image[j]).collect()
    }

    pub fn energy(&self, d: &Divisor, coords: &[i64]) -> f64 {
        self.residual(d, coords).iter().map(|z| z.norm_sqr()).sum()
    }

    /// `∂E/∂p_i = 2 n_i Σ_j (r_j conj(h_j) + conj(r_j) k_j)` as a vector in the
    /// face chart of `p_i`, where `φ_j = h_j dz + k_j dz̄` on that face.
    pub fn gradient(&self, d: &Divisor, coords: &[i64]) -> Vec<Complex64> {
        let r = self.residual(d, coords);
        d.terms
            .iter()
            .map(|t| {
                let c = &self.map.coefficients[t.point.face];
                let sum: Complex64 = (0..r.len()).map(|j| r[j] * c[j].0.conj() + r[j].conj() * c[j].1).sum();
                sum * (2.0 * t.order as f64)
            })
            .collect()
    }
}

fn image_lenient(map: &AbelJacobiMap, d: &Divisor) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); map.genus()];
    for t in &d.terms {
        let v = map.point_in_face(&t.point);
        for j in 0..out.len() {
            out[j] += v[j] * t.order as f64;
        }
    }
    out
}

/// Result of walking a point along a straight line.
#[derive(Clone, Debug, PartialEq)]
pub struct Walk {
    pub end: SurfacePoint,
    /// Halfedges of cut edges crossed, in order, each oriented with the
    /// face being left on its left.
    pub crossed: Vec<usize>,
    /// Unit complex factor taking directions in the start chart to the end
    /// chart.
    pub rotation: Complex64,
}

/// Walk `p` by `delta` (in its face chart) across faces along a straight
/// line.
pub fn walk(topo: &Topology, map: &AbelJacobiMap, p: &SurfacePoint, delta: Complex64) -> Walk {
    let mut face = p.face;
    let mut z = p.in_chart(&map.charts[face]);
    let mut rest = delta;
    let mut rotation = Complex64::new(1.0, 0.0);
    let mut crossed = Vec::new();
    for _ in 0..256 {
        let chart = map.charts[face];
        let end = z + rest;
        let b_end = SurfacePoint::bary_in_chart(&chart, end);
        if b_end.iter().all(|&b| b >= 0.0) {
            return Walk { end: SurfacePoint { face, bary: normalize_bary(b_end) }, crossed, rotation };
        }
        let b0 = SurfacePoint::bary_in_chart(&chart, z);
        // Leave through the edge whose opposite barycentric hits zero first.
        let mut exit: Option<(f64, usize)> = None;
        for c in 0..3 {
            if b_end[c] < 0.0 {
                let t = (b0[c].max(0.0) / (b0[c].max(0.0) - b_end[c])).clamp(0.0, 1.0);
                if exit.map_or(true, |(te, _)| t < te) {
                    exit = Some((t, c));
                }
            }
        }
        let (t, c) = exit.expect("end point outside the face");
        let k = (c + 1) % 3;
        let h = 3 * face + k;
        let a = chart[k];
        let e = chart[(k + 1) % 3] - a;
        let hit = z + rest * t;
        let alpha = (((hit - a) * e.conj()).re / e.norm_sqr()).clamp(0.0, 1.0);
        let tw = topo.twin(h);
        let nf = tw / 3;
        let nc = map.charts[nf];
        let (ka, kb) = (tw % 3, (tw % 3 + 1) % 3);
        let e2 = nc[kb] - nc[ka];
        let rot = (-e2 / e2.norm()) / (e / e.norm());
        rest = rest * (1.0 - t) * rot;
        rotation *= rot;
        z = nc[ka] + e2 * (1.0 - alpha);
        if map.sliced.cut[topo.edge(h)] {
            crossed.push(h);
        }
        face = nf;
    }
    let b = SurfacePoint::bary_in_chart(&map.charts[face], z);
    Walk { end: SurfacePoint { face, bary: normalize_bary(b) }, crossed, rotation }
}

fn normalize_bary(b: [f64; 3]) -> [f64; 3] {
    let c = b.map(|x| x.max(0.0));
    let s: f64 = c.iter().sum();
    c.map(|x| x / s)
}

/// Gradient descent with Armijo backtracking until the residual meets both
/// the squared-norm and per-component tolerances.
pub fn optimize_divisor(
    obj: &Objective,
    d0: &Divisor,
    reference: &Divisor,
    cfg: &OptimizeConfig,
) -> Result<OptimizeResult, OptimizeError> {
    let g = obj.map.genus() as i64;
    if d0.degree() != 8 * g - 8 {
        return Err(OptimizeError::Degree { found: d0.degree(), expected: 8 * g - 8 });
    }
    let lattice = &obj.map.lattice;
    let half_shortest = 0.5 * lattice.shortest_vector();
    let initial = obj.residual(d0, &vec![0; 2 * g as usize]);
    let mut coords = reduce_mod_lattice(&initial, lattice, cfg.lattice_cap)?.coords();
    let mut d = d0.clone();
    let mut r = obj.residual(&d, &coords);
    let mut e: f64 = r.iter().map(|z| z.norm_sqr()).sum();
    let mut trace = Vec::new();
    let max_step = cfg.step_fraction * obj.mean_edge;
    let mut alpha = f64::INFINITY;
    let converged = |r: &[Complex64], e: f64| e <= cfg.epsilon && r.iter().all(|z| z.norm() <= cfg.component_tol);

    let mut it = 0;
    while !converged(&r, e) {
        if it >= cfg.max_iters {
            let gradient = obj.gradient(&d, &coords);
            let (s, t) = coords.split_at(g as usize);
            return Err(OptimizeError::IterationCap {
                iterations: it,
                best_energy: e,
                best: Box::new(OptimizationState {
                    divisor: d,
                    reference: reference.clone(),
                    s: s.to_vec(),
                    t: t.to_vec(),
                    energy: e,
                    gradient,
                    iteration: it,
                    step: alpha,
                }),
            });
        }
        it += 1;
        let r_norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r_norm > half_shortest {
            let phi: Vec<Complex64> = {
                let lp = lattice.point(&coords);
                (0..r.len()).map(|j| r[j] + lp[j]).collect()
            };
            let fresh = reduce_mod_lattice(&phi, lattice, cfg.lattice_cap)?.coords();
            // The covering radius can exceed half the shortest vector, so a
            // large residual may already be the closest one.
            if fresh != coords {
                coords = fresh;
                r = obj.residual(&d, &coords);
                e = r.iter().map(|z| z.norm_sqr()).sum();
                continue;
            }
        }
        let grad = obj.gradient(&d, &coords);
        let gmax = grad.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let gsq: f64 = grad.iter().map(|z| z.norm_sqr()).sum();
        if gmax == 0.0 {
            break;
        }
        let cap = max_step / gmax;
        let mut a = (2.0 * alpha).min(cap);
        let mut accepted = None;
        for _ in 0..60 {
            let (trial, trial_coords) = displace(obj, &d, &coords, &grad, a);
            if separated(obj, &trial, cfg.min_separation) {
                let et = obj.energy(&trial, &trial_coords);
                if et <= e - cfg.armijo * a * gsq {
                    accepted = Some((trial, trial_coords, et));
                    break;
                }
            }
            a *= 0.5;
        }
        let Some((nd, nc, ne)) = accepted else {
            log::warn!("line search stalled at residual² {e:e}");
            alpha = 0.0;
            it = cfg.max_iters;
            continue;
        };
        alpha = a;
        d = nd;
        coords = nc;
        e = ne;
        r = obj.residual(&d, &coords);
        trace.push(TraceRow { iteration: it, energy: e, residual_norm: e.sqrt(), step: a });
    }

    // Recompute from scratch: lenient evaluation, then a fresh reduction.
    let mut full = image_lenient(obj.map, &d);
    for j in 0..full.len() {
        full[j] -= obj.reference_image[j];
    }
    let red = reduce_mod_lattice(&full, lattice, cfg.lattice_cap)?;
    let image = AbelJacobiImage { phi: full, s: red.s, t: red.t, residual: red.residual };
    Ok(OptimizeResult { divisor: d, image, iterations: it, trace })
}

/// Move every point by `−a·grad_i`, folding cut crossings into the integers.
pub fn displace(
    obj: &Objective,
    d: &Divisor,
    coords: &[i64],
    grad: &[Complex64],
    a: f64,
) -> (Divisor, Vec<i64>) {
    let mut out = d.clone();
    let mut c = coords.to_vec();
    for (t, gr) in out.terms.iter_mut().zip(grad) {
        let w = walk(obj.topo, obj.map, &t.point, -*gr * a);
        for h in w.crossed {
            for (ci, ji) in c.iter_mut().zip(&obj.map.jumps[h]) {
                *ci += t.order as i64 * ji;
            }
        }
        t.point = w.end;
    }
    (out, c)
}

fn separated(obj: &Objective, d: &Divisor, min_sep: f64) -> bool {
    let n = d.terms.len();
    for i in 0..n {
        for j in i + 1..n {
            let (p, q) = (&d.terms[i].point, &d.terms[j].point);
            if p.face == q.face {
                let chart = &obj.map.charts[p.face];
                if (p.in_chart(chart) - q.in_chart(chart)).norm() < min_sep * obj.face_edge[p.face] {
                    return false;
                }
            }
        }
    }
    true
}
