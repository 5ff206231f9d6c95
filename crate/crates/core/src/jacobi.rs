//! Divisors, the period lattice, lattice reduction and the Abel-Jacobi map.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{FormContext, HolomorphicBasis};
use crate::homology::HomologyBasis;
use crate::mesh::{slice_edges, SlicedMesh, SurfacePoint, Topology};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum JacobiError {
    #[error("a-period matrix deviates from identity by {0:e}")]
    NotNormalized(f64),
    #[error("period lattice is degenerate (real Gram determinant {0:e})")]
    DegenerateLattice(f64),
    #[error("lattice dimension {dim} exceeds the exact-search cap {cap}; enable approximate reduction")]
    DimensionCap { dim: usize, cap: usize },
    #[error("point in face {face} lies on the cut graph")]
    PointOnCut { face: usize },
    #[error("vector has {found} components, lattice has dimension {expected}")]
    Dimension { found: usize, expected: usize },
    #[error("cut jump across edge {edge} is not a lattice vector (off by {off:e})")]
    NonLatticeJump { edge: usize, off: f64 },
    #[error("cut graph does not leave a disk: {0}")]
    Slice(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorTerm {
    #[serde(flatten)]
    pub point: SurfacePoint,
    pub order: i32,
}

/// `Σ n_p p`, serialized as a list of `{face, bary, order}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Divisor {
    pub terms: Vec<DivisorTerm>,
}

impl Divisor {
    /// Drops zero-order terms.
    pub fn new(terms: Vec<DivisorTerm>) -> Self {
        Divisor { terms: terms.into_iter().filter(|t| t.order != 0).collect() }
    }

    pub fn degree(&self) -> i64 {
        self.terms.iter().map(|t| t.order as i64).sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, k: i32) -> Divisor {
        Divisor::new(self.terms.iter().map(|t| DivisorTerm { point: t.point, order: t.order * k }).collect())
    }

    pub fn plus(&self, other: &Divisor) -> Divisor {
        Divisor::new(self.terms.iter().chain(&other.terms).copied().collect())
    }

    pub fn minus(&self, other: &Divisor) -> Divisor {
        self.plus(&other.scaled(-1))
    }
}

/// `a[(j, i)] = ∫_{a_i} φ_j`, `b[(j, i)] = ∫_{b_i} φ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodMatrix {
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
}

impl PeriodMatrix {
    pub fn genus(&self) -> usize {
        self.a.nrows()
    }

    /// Largest entry of `A − I`.
    pub fn identity_deviation(&self) -> f64 {
        let g = self.genus();
        (0..g)
            .flat_map(|j| (0..g).map(move |i| (j, i)))
            .map(|(j, i)| (self.a[(j, i)] - if i == j { 1.0 } else { 0.0 }).norm())
            .fold(0.0, f64::max)
    }

    /// Max asymmetry of B and the smallest eigenvalue of Im B.
    pub fn riemann_health(&self) -> (f64, f64) {
        let asym = (&self.b - self.b.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let im = self.b.map(|z| z.im);
        let sym = (&im + im.transpose()) * 0.5;
        (asym, sym.symmetric_eigenvalues().min())
    }
}

pub fn period_matrix(forms: &HolomorphicBasis, loops: &HomologyBasis) -> Result<PeriodMatrix, JacobiError> {
    let g = forms.genus();
    let a = DMatrix::from_fn(g, g, |j, i| forms.forms[j].period(&loops.a[i]));
    let b = DMatrix::from_fn(g, g, |j, i| forms.forms[j].period(&loops.b[i]));
    let pm = PeriodMatrix { a, b };
    let dev = pm.identity_deviation();
    if !(dev <= 1e-6) {
        return Err(JacobiError::NotNormalized(dev));
    }
    Ok(pm)
}

/// `[Re v, Im v]`.
pub fn realify(v: &[Complex64]) -> DVector<f64> {
    let g = v.len();
    DVector::from_fn(2 * g, |k, _| if k < g { v[k].re } else { v[k - g].im })
}

pub fn complexify(x: &DVector<f64>) -> Vec<Complex64> {
    let g = x.len() / 2;
    (0..g).map(|k| Complex64::new(x[k], x[k + g])).collect()
}

/// Generators `λ_{a_1..a_g}, λ_{b_1..b_g}` of the period lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianLattice {
    pub generators: Vec<Vec<Complex64>>,
}

pub fn build_lattice(pm: &PeriodMatrix) -> Result<JacobianLattice, JacobiError> {
    let g = pm.genus();
    let mut generators: Vec<Vec<Complex64>> = (0..g).map(|i| pm.a.column(i).iter().copied().collect()).collect();
    generators.extend((0..g).map(|i| pm.b.column(i).iter().copied().collect()));
    let lat = JacobianLattice { generators };
    let det = lat.gram().determinant();
    let scale = lat.gram().diagonal().product();
    if !(det.abs() > 1e-12 * scale.abs()) {
        return Err(JacobiError::DegenerateLattice(det));
    }
    Ok(lat)
}

impl JacobianLattice {
    pub fn genus(&self) -> usize {
        self.generators.len() / 2
    }

    /// Real 2g×2g matrix whose columns are the realified generators.
    pub fn real_basis(&self) -> DMatrix<f64> {
        let n = self.generators.len();
        DMatrix::from_fn(n, n, |r, c| realify(&self.generators[c])[r])
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let b = self.real_basis();
        b.transpose() * b
    }

    /// `Σ s_k λ_{a_k} + Σ t_k λ_{b_k}` for `coords = [s, t]`.
    pub fn point(&self, coords: &[i64]) -> Vec<Complex64> {
        let g = self.genus();
        let mut out = vec![Complex64::new(0.0, 0.0); g];
        for (c, gen) in coords.iter().zip(&self.generators) {
            for j in 0..g {
                out[j] += gen[j] * *c as f64;
            }
        }
        out
    }

    /// Real lattice coordinates of `v`.
    pub fn coordinates(&self, v: &[Complex64]) -> DVector<f64> {
        self.real_basis().lu().solve(&realify(v)).expect("lattice basis is nonsingular")
    }

    /// Length of the shortest nonzero lattice vector.
    pub fn shortest_vector(&self) -> f64 {
        let b = self.real_basis();
        let (red, _) = lll(&b);
        let n = b.ncols();
        let mut best = (0..n).map(|k| red.column(k).norm()).fold(f64::INFINITY, f64::min);
        let gs = GramSchmidt::new(&red);
        let zero = vec![0.0; n];
        let mut radius = best * best * (1.0 + 1e-9);
        let mut x = vec![0i64; n];
        enumerate(&gs, &zero, n, 0.0, &mut radius, &mut x, &mut |x, d, _| {
            if x.iter().any(|&c| c != 0) && d > 0.0 {
                best = best.min(d.sqrt());
            }
        });
        best
    }
}

/// Result of reducing a vector modulo the lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub s: Vec<i64>,
    pub t: Vec<i64>,
    pub residual: Vec<Complex64>,
}

impl Reduction {
    pub fn coords(&self) -> Vec<i64> {
        self.s.iter().chain(&self.t).copied().collect()
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// LLL reduction (δ = 3/4) of the columns of `b`. Returns the reduced basis
/// and the unimodular `u` with `reduced = b · u`.
pub fn lll(b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<i64>) {
    let n = b.ncols();
    let mut red = b.clone();
    let mut u = DMatrix::<i64>::identity(n, n);
    let mut k = 1;
    let mut guard = 0;
    while k < n && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let gs = GramSchmidt::new(&red);
            let q = gs.mu[(k, j)].round();
            if q != 0.0 {
                let col = red.column(j).clone_owned();
                red.column_mut(k).axpy(-q, &col, 1.0);
                let ucol = u.column(j).clone_owned();
                for r in 0..n {
                    u[(r, k)] -= q as i64 * ucol[r];
                }
            }
        }
        let gs2 = GramSchmidt::new(&red);
        let lhs = gs2.norms[k];
        let rhs = (0.75 - gs2.mu[(k, k - 1)].powi(2)) * gs2.norms[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            red.swap_columns(k, k - 1);
            u.swap_columns(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    (red, u)
}

struct GramSchmidt {
    /// `mu[(i, j)] = ⟨b_i, b*_j⟩ / ‖b*_j‖²` for j < i.
    mu: DMatrix<f64>,
    /// `‖b*_i‖²`.
    norms: Vec<f64>,
    star: DMatrix<f64>,
}

impl GramSchmidt {
    fn new(b: &DMatrix<f64>) -> Self {
        let n = b.ncols();
        let mut star = b.clone();
        let mut mu = DMatrix::zeros(n, n);
        let mut norms = vec![0.0; n];
        for i in 0..n {
            for j in 0..i {
                let m = b.column(i).dot(&star.column(j)) / norms[j];
                mu[(i, j)] = m;
                let sj = star.column(j).clone_owned();
                star.column_mut(i).axpy(-m, &sj, 1.0);
            }
            norms[i] = star.column(i).norm_squared();
        }
        GramSchmidt { mu, norms, star }
    }
}

/// Depth-first enumeration of all `x` with `‖Σ x_i b_i − y‖² ≤ radius` where
/// the target's Gram-Schmidt coordinates are folded into `centre`. Calls
/// `visit(x, dist²)` at each leaf.
fn enumerate(
    gs: &GramSchmidt,
    ystar: &[f64],
    level: usize,
    partial: f64,
    radius: &mut f64,
    x: &mut Vec<i64>,
    visit: &mut dyn FnMut(&[i64], f64, &mut f64),
) {
    if level == 0 {
        visit(x, partial, radius);
        return;
    }
    let i = level - 1;
    let n = x.len();
    let mut c = ystar[i];
    for j in i + 1..n {
        c -= x[j] as f64 * gs.mu[(j, i)];
    }
    let bi = gs.norms[i];
    let width = ((*radius - partial).max(0.0) / bi).sqrt();
    let lo = (c - width).ceil() as i64;
    let hi = (c + width).floor() as i64;
    // Zig-zag from the nearest integer outward so good solutions come first.
    let mut order: Vec<i64> = (lo..=hi).collect();
    order.sort_by(|a, b| ((*a as f64 - c).abs()).total_cmp(&((*b as f64 - c).abs())).then(a.cmp(b)));
    for xi in order {
        let d = partial + (xi as f64 - c).powi(2) * bi;
        if d > *radius {
            continue;
        }
        x[i] = xi;
        enumerate(gs, ystar, i, d, radius, x, visit);
    }
    x[i] = 0;
}

/// Closest lattice vector to `v`: LLL, a nearest-plane incumbent, then
/// exhaustive branch-and-bound. Equidistant candidates resolve to the
/// lexicographically smallest `(s, t)`.
pub fn reduce_mod_lattice(v: &[Complex64], lattice: &JacobianLattice, cap: usize) -> Result<Reduction, JacobiError> {
    let g = lattice.genus();
    let n = 2 * g;
    if v.len() != g {
        return Err(JacobiError::Dimension { found: v.len(), expected: g });
    }
    if n > cap {
        return Err(JacobiError::DimensionCap { dim: n, cap });
    }
    let b = lattice.real_basis();
    let y = realify(v);
    let (red, u) = lll(&b);
    let gs = GramSchmidt::new(&red);
    let ystar: Vec<f64> = (0..n).map(|i| y.dot(&gs.star.column(i)) / gs.norms[i]).collect();

    // Nearest plane incumbent.
    let mut babai = vec![0i64; n];
    let mut babai_d = 0.0;
    for i in (0..n).rev() {
        let mut c = ystar[i];
        for j in i + 1..n {
            c -= babai[j] as f64 * gs.mu[(j, i)];
        }
        babai[i] = c.round() as i64;
        babai_d += (babai[i] as f64 - c).powi(2) * gs.norms[i];
    }
    let scale = y.norm_squared().max(gs.norms.iter().cloned().fold(0.0, f64::max));
    let slack = 1e-12 * scale;
    let mut radius = babai_d + slack;
    let mut best_d = babai_d;
    let mut candidates: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut x = vec![0i64; n];
    enumerate(&gs, &ystar, n, 0.0, &mut radius, &mut x, &mut |x, d, radius| {
        if d < best_d {
            best_d = d;
            *radius = d + slack;
            candidates.retain(|(_, cd)| *cd <= *radius);
        }
        candidates.push((x.to_vec(), d));
    });
    if candidates.is_empty() {
        candidates.push((babai, babai_d));
    }
    let best = candidates
        .into_iter()
        .filter(|(_, d)| *d <= best_d + slack)
        .map(|(x, _)| {
            let xv = DVector::from_iterator(n, x.iter().copied());
            (&u * xv).iter().copied().collect::<Vec<i64>>()
        })
        .min()
        .expect("non-empty candidate set");
    Ok(reduction_from_coords(v, lattice, &best))
}

fn reduction_from_coords(v: &[Complex64], lattice: &JacobianLattice, coords: &[i64]) -> Reduction {
    let g = lattice.genus();
    let p = lattice.point(coords);
    Reduction {
        s: coords[..g].to_vec(),
        t: coords[g..].to_vec(),
        residual: v.iter().zip(&p).map(|(a, b)| a - b).collect(),
    }
}

/// Residual from rounding the real lattice coordinates independently.
pub fn round_mod_lattice(v: &[Complex64], lattice: &JacobianLattice) -> Reduction {
    let c: Vec<i64> = lattice.coordinates(v).iter().map(|x| x.round() as i64).collect();
    reduction_from_coords(v, lattice, &c)
}

/// `Φ`, its reduction `(s, t)` and the residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbelJacobiImage {
    pub phi: Vec<Complex64>,
    pub s: Vec<i64>,
    pub t: Vec<i64>,
    pub residual: Vec<Complex64>,
}

impl AbelJacobiImage {
    pub fn residual_norm_sqr(&self) -> f64 {
        self.residual.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Abel-Jacobi integrals of a normalized basis over the disk left by
/// slicing the surface along a cut graph.
#[derive(Clone, Debug)]
pub struct AbelJacobiMap {
    pub sliced: SlicedMesh,
    /// Disk vertex used as base point.
    pub base_vertex: usize,
    pub base: SurfacePoint,
    /// Disk vertices on the boundary.
    pub boundary: Vec<bool>,
    /// `∫_{base}^{v} φ_j` per disk vertex.
    pub potentials: Vec<Vec<Complex64>>,
    /// Per halfedge on a cut edge: lattice coordinates of the potential jump
    /// from `face(h)` to `face(twin h)`; empty otherwise.
    pub jumps: Vec<Vec<i64>>,
    /// Per face and form: dz- and dz̄-coefficients in the face chart.
    pub coefficients: Vec<Vec<(Complex64, Complex64)>>,
    pub charts: Vec<[Complex64; 3]>,
    pub lattice: JacobianLattice,
}

impl AbelJacobiMap {
    pub fn new(
        ctx: &FormContext,
        forms: &HolomorphicBasis,
        cut: &[bool],
        lattice: &JacobianLattice,
    ) -> Result<Self, JacobiError> {
        Self::with_base(ctx, forms, cut, lattice, None)
    }

    /// As [`new`](Self::new) with an explicit base disk vertex instead of
    /// the one farthest from the cut.
    pub fn with_base(
        ctx: &FormContext,
        forms: &HolomorphicBasis,
        cut: &[bool],
        lattice: &JacobianLattice,
        base: Option<usize>,
    ) -> Result<Self, JacobiError> {
        let topo = ctx.topo;
        let sliced = slice_edges(topo, cut).map_err(|e| JacobiError::Slice(e.to_string()))?;
        if sliced.euler_characteristic(topo) != 1 {
            return Err(JacobiError::Slice(format!(
                "sliced surface has Euler characteristic {}",
                sliced.euler_characteristic(topo)
            )));
        }
        let nd = sliced.n_vertices();
        let g = forms.genus();

        // Base: disk vertex farthest from the boundary.
        let boundary = sliced.boundary_vertices(topo);
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nd];
        for h in 0..topo.n_halfedges() {
            if !cut[topo.edge(h)] {
                adj[sliced.corner_vertex[h]].push((sliced.corner_vertex[topo.next(h)], h));
            }
        }
        let mut dist = vec![usize::MAX; nd];
        let mut queue = std::collections::VecDeque::new();
        for v in 0..nd {
            if boundary[v] {
                dist[v] = 0;
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let base_vertex = base
            .filter(|&b| b < nd)
            .unwrap_or_else(|| (0..nd).max_by(|&a, &b| dist[a].cmp(&dist[b]).then(b.cmp(&a))).unwrap_or(0));
        let base_corner = (0..topo.n_halfedges())
            .find(|&c| sliced.corner_vertex[c] == base_vertex)
            .expect("every disk vertex has a corner");
        let base = SurfacePoint::corner(base_corner / 3, base_corner % 3);

        // Propagate corner potentials face by face across uncut edges.
        let mut potentials: Vec<Option<Vec<Complex64>>> = vec![None; nd];
        potentials[base_vertex] = Some(vec![Complex64::new(0.0, 0.0); g]);
        let mut visited = vec![false; topo.n_faces()];
        visited[base_corner / 3] = true;
        let mut faces = std::collections::VecDeque::from([base_corner / 3]);
        while let Some(f) = faces.pop_front() {
            let start = (0..3).find(|&k| potentials[sliced.corner_vertex[3 * f + k]].is_some()).expect("face reached through a known corner");
            for i in 0..2 {
                let c = 3 * f + (start + i) % 3;
                let n = topo.next(c);
                if potentials[sliced.corner_vertex[n]].is_none() {
                    let pc = potentials[sliced.corner_vertex[c]].as_ref().unwrap();
                    let v = (0..g).map(|j| pc[j] + forms.forms[j].value(c)).collect();
                    potentials[sliced.corner_vertex[n]] = Some(v);
                }
            }
            for k in 0..3 {
                let h = 3 * f + k;
                let nf = topo.twin(h) / 3;
                if !cut[topo.edge(h)] && !visited[nf] {
                    visited[nf] = true;
                    faces.push_back(nf);
                }
            }
        }
        let potentials: Vec<Vec<Complex64>> = potentials.into_iter().map(|p| p.expect("disk is connected")).collect();

        let mut jumps = vec![Vec::new(); topo.n_halfedges()];
        for h in 0..topo.n_halfedges() {
            if !cut[topo.edge(h)] {
                continue;
            }
            let here = &potentials[sliced.corner_vertex[h]];
            let there = &potentials[sliced.corner_vertex[topo.next(topo.twin(h))]];
            let j: Vec<Complex64> = (0..g).map(|k| there[k] - here[k]).collect();
            let x = lattice.coordinates(&j);
            let r: Vec<i64> = x.iter().map(|c| c.round() as i64).collect();
            let off = x.iter().zip(&r).map(|(a, b)| (a - *b as f64).abs()).fold(0.0, f64::max);
            if off > 1e-6 {
                return Err(JacobiError::NonLatticeJump { edge: topo.edge(h), off });
            }
            jumps[h] = r;
        }
        let coefficients = (0..topo.n_faces())
            .map(|f| forms.forms.iter().map(|phi| ctx.face_coefficients(phi, f)).collect())
            .collect();
        Ok(AbelJacobiMap {
            sliced,
            base_vertex,
            base,
            boundary,
            potentials,
            jumps,
            coefficients,
            charts: ctx.charts.clone(),
            lattice: lattice.clone(),
        })
    }

    pub fn genus(&self) -> usize {
        self.lattice.genus()
    }

    /// Potential of corner `k` of face `f`.
    pub fn corner_potential(&self, f: usize, k: usize) -> &[Complex64] {
        &self.potentials[self.sliced.corner_vertex[3 * f + k]]
    }

    /// Whether `p` touches the cut graph.
    pub fn on_cut(&self, topo: &Topology, p: &SurfacePoint) -> bool {
        let tol = 1e-12;
        for k in 0..3 {
            let h = 3 * p.face + k;
            if p.bary[(k + 2) % 3] <= tol && self.sliced.cut[topo.edge(h)] {
                return true;
            }
            if p.bary[k] >= 1.0 - tol && self.boundary[self.sliced.corner_vertex[h]] {
                return true;
            }
        }
        false
    }

    /// `∫_{base}^{p} φ` along a path inside the disk.
    pub fn point(&self, topo: &Topology, p: &SurfacePoint) -> Result<Vec<Complex64>, JacobiError> {
        if self.on_cut(topo, p) {
            return Err(JacobiError::PointOnCut { face: p.face });
        }
        Ok(self.point_in_face(p))
    }

    /// Like [`point`](Self::point) but evaluates points on the cut using the
    /// given face's side.
    pub fn point_in_face(&self, p: &SurfacePoint) -> Vec<Complex64> {
        let g = self.genus();
        let u = [0, 1, 2].map(|k| self.corner_potential(p.face, k));
        (0..g).map(|j| u[0][j] * p.bary[0] + u[1][j] * p.bary[1] + u[2][j] * p.bary[2]).collect()
    }

    /// Same value integrated from corner 0 with the face's `(h, k)`
    /// representation.
    pub fn point_by_segment(&self, p: &SurfacePoint) -> Vec<Complex64> {
        let z = self.charts[p.face];
        let d = p.in_chart(&z) - z[0];
        let u0 = self.corner_potential(p.face, 0);
        (0..self.genus())
            .map(|j| {
                let (h, k) = self.coefficients[p.face][j];
                u0[j] + h * d + k * d.conj()
            })
            .collect()
    }

    pub fn divisor(&self, topo: &Topology, d: &Divisor) -> Result<Vec<Complex64>, JacobiError> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.genus()];
        for t in &d.terms {
            let v = self.point(topo, &t.point)?;
            for j in 0..out.len() {
                out[j] += v[j] * t.order as f64;
            }
        }
        Ok(out)
    }

    /// Sum of form values along a halfedge path that never crosses the cut.
    pub fn integrate_in_disk(&self, topo: &Topology, forms: &HolomorphicBasis, path: &[usize]) -> Option<Vec<Complex64>> {
        if path.iter().any(|&h| self.sliced.cut[topo.edge(h)]) {
            return None;
        }
        Some(integrate_path(forms, path))
    }
}

/// `Σ_h φ_j(h)` along any halfedge path.
pub fn integrate_path(forms: &HolomorphicBasis, path: &[usize]) -> Vec<Complex64> {
    forms.forms.iter().map(|phi| phi.period(path)).collect()
}

/// Abel-Jacobi image of a divisor, reduced modulo the lattice.
pub fn abel_jacobi_divisor(
    topo: &Topology,
    map: &AbelJacobiMap,
    d: &Divisor,
    cap: usize,
) -> Result<AbelJacobiImage, JacobiError> {
    let phi = map.divisor(topo, d)?;
    let r = reduce_mod_lattice(&phi, &map.lattice, cap)?;
    Ok(AbelJacobiImage { phi, s: r.s, t: r.t, residual: r.residual })
}
