//! Discrete 1-forms: cohomology basis, harmonic projection, Hodge star, the
//! holomorphic basis and zeros of holomorphic forms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homology::{pushoff_cochain, HomologyBasis};
use crate::jacobi::{Divisor, DivisorTerm};
use crate::linalg::{PinnedLaplacian, SolveError};
use crate::mesh::{
    angle_defect, cotan_weights, face_area, face_chart, GeometryError, SurfacePoint, Topology,
};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FormsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("holomorphic forms span rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("a-period matrix condition number {0:e} exceeds 1e12")]
    IllConditioned(f64),
    #[error("zero divisor has degree {found}, expected {expected}")]
    DegreeMismatch { found: i64, expected: i64 },
    #[error("expected {expected} coefficients, got {found}")]
    CoefficientCount { found: usize, expected: usize },
    #[error("the form vanishes identically")]
    ZeroForm,
}

/// A real value per halfedge with `value(twin h) = −value(h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteOneForm {
    pub values: Vec<f64>,
}

impl DiscreteOneForm {
    pub fn zeros(topo: &Topology) -> Self {
        DiscreteOneForm { values: vec![0.0; topo.n_halfedges()] }
    }

    /// Form from a value on each edge's canonical halfedge.
    pub fn from_edge_values(topo: &Topology, edge: &[f64]) -> Self {
        let values = (0..topo.n_halfedges()).map(|h| topo.edge_sign(h) * edge[topo.edge(h)]).collect();
        DiscreteOneForm { values }
    }

    /// `df` for a vertex function `f`.
    pub fn exact(topo: &Topology, f: &[f64]) -> Self {
        let values = (0..topo.n_halfedges()).map(|h| f[topo.target(h)] - f[topo.origin(h)]).collect();
        DiscreteOneForm { values }
    }

    pub fn integrate(&self, path: &[usize]) -> f64 {
        path.iter().map(|&h| self.values[h]).sum()
    }

    pub fn face_sum(&self, f: usize) -> f64 {
        self.values[3 * f] + self.values[3 * f + 1] + self.values[3 * f + 2]
    }

    /// Largest face sum relative to the mean absolute value.
    pub fn closedness_residual(&self) -> f64 {
        let mean = self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64;
        let worst = (0..self.values.len() / 3).map(|f| self.face_sum(f).abs()).fold(0.0, f64::max);
        if mean == 0.0 {
            worst
        } else {
            worst / mean
        }
    }

    /// `Σ_j w_ij ω(h_ij)` at each vertex.
    pub fn codifferential(&self, topo: &Topology, weights: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; topo.n_vertices()];
        for h in 0..topo.n_halfedges() {
            if topo.edge_halfedge(topo.edge(h)) == h {
                let w = weights[topo.edge(h)] * self.values[h];
                d[topo.origin(h)] += w;
                d[topo.target(h)] -= w;
            }
        }
        d
    }

    /// Norm of the codifferential relative to the norm of its summands.
    pub fn harmonic_residual(&self, topo: &Topology, weights: &[f64]) -> f64 {
        let d = self.codifferential(topo, weights);
        let mut scale = vec![0.0; topo.n_vertices()];
        for h in 0..topo.n_halfedges() {
            scale[topo.origin(h)] += (weights[topo.edge(h)] * self.values[h]).abs();
        }
        let num = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let den = scale.iter().map(|x| x * x).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    pub fn axpy(&mut self, a: f64, x: &DiscreteOneForm) {
        for (v, xv) in self.values.iter_mut().zip(&x.values) {
            *v += a * xv;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        DiscreteOneForm { values: self.values.iter().map(|v| a * v).collect() }
    }
}

/// Per-face planar charts and cotangent weights shared by all form
/// computations on one metric.
pub struct FormContext<'a> {
    pub topo: &'a Topology,
    pub lengths: &'a [f64],
    pub weights: Vec<f64>,
    pub charts: Vec<[Complex64; 3]>,
    pub areas: Vec<f64>,
    pub laplacian: PinnedLaplacian,
    pub tol: f64,
}

impl<'a> FormContext<'a> {
    pub fn new(topo: &'a Topology, lengths: &'a [f64], tol: f64) -> Result<Self, FormsError> {
        let weights = cotan_weights(topo, lengths)?;
        let charts = (0..topo.n_faces()).map(|f| face_chart(topo, lengths, f)).collect();
        let areas = (0..topo.n_faces())
            .map(|f| face_area([0, 1, 2].map(|k| lengths[topo.edge(3 * f + k)])))
            .collect();
        let laplacian = PinnedLaplacian::new(topo, &weights, 0)?;
        Ok(FormContext { topo, lengths, weights, charts, areas, laplacian, tol })
    }

    /// Constant vector field (as a complex number in the face chart) whose
    /// edge integrals reproduce a real closed form on face `f`.
    pub fn face_field(&self, values: &[f64], f: usize) -> Complex64 {
        let z = self.charts[f];
        let vx = values[3 * f] / z[1].re;
        let vy = (-values[3 * f + 2] - vx * z[2].re) / z[2].im;
        Complex64::new(vx, vy)
    }

    /// `ω = λ + df` with zero codifferential.
    pub fn harmonize(&self, lambda: &DiscreteOneForm) -> Result<DiscreteOneForm, FormsError> {
        let b = lambda.codifferential(self.topo, &self.weights);
        let f = self.laplacian.solve(&b, self.tol)?;
        let mut out = lambda.clone();
        out.axpy(1.0, &DiscreteOneForm::exact(self.topo, &f));
        Ok(out)
    }

    /// Edge values of the per-face field rotated by +π/2; not closed in
    /// general since neighbouring faces disagree on shared edges.
    pub fn rotated_face_values(&self, omega: &DiscreteOneForm) -> Vec<f64> {
        let mut out = vec![0.0; self.topo.n_halfedges()];
        for f in 0..self.topo.n_faces() {
            let v = self.face_field(&omega.values, f) * Complex64::i();
            let z = self.charts[f];
            for k in 0..3 {
                let e = z[(k + 1) % 3] - z[k];
                out[3 * f + k] = v.re * e.re + v.im * e.im;
            }
        }
        out
    }

    /// `Σ_F area · (V_a · V_b)` and `Σ_F area · (iV_a · V_b)`.
    fn pairings(&self, a: &DiscreteOneForm, b: &DiscreteOneForm) -> (f64, f64) {
        let (mut dot, mut rot) = (0.0, 0.0);
        for f in 0..self.topo.n_faces() {
            let (va, vb) = (self.face_field(&a.values, f), self.face_field(&b.values, f));
            let ia = va * Complex64::i();
            dot += self.areas[f] * (va.re * vb.re + va.im * vb.im);
            rot += self.areas[f] * (ia.re * vb.re + ia.im * vb.im);
        }
        (dot, rot)
    }

    /// Harmonic energy `Σ_F area |V|²`.
    pub fn energy(&self, omega: &DiscreteOneForm) -> f64 {
        self.pairings(omega, omega).0
    }

    /// dz- and dz̄-coefficients `(h, k)` of a complex form on face `f`:
    /// `φ(e) = h·e + k·ē` for every edge vector `e` of the face chart.
    pub fn face_coefficients(&self, phi: &HolomorphicOneForm, f: usize) -> (Complex64, Complex64) {
        let z = self.charts[f];
        let (a, b) = (z[1] - z[0], z[2] - z[0]);
        let p = phi.value(3 * f);
        let q = -phi.value(3 * f + 2);
        let den = a * b.conj() - a.conj() * b;
        ((p * b.conj() - q * a.conj()) / den, (a * q - b * p) / den)
    }
}

/// Closed forms `λ_γ = η_γ + d(rand)`, one per basis loop in the order
/// a1..ag, b1..bg. `η_γ` is the dual cochain of γ's left pushoff, so
/// `∫_x λ_γ = x·γ`; the random exact part is drawn from `seed`.
pub fn cohomology_basis(topo: &Topology, basis: &HomologyBasis, seed: u64) -> Vec<DiscreteOneForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    basis
        .loops()
        .iter()
        .map(|l| {
            let eta = pushoff_cochain(topo, l);
            let r: Vec<f64> = (0..topo.n_vertices()).map(|_| rng.random::<f64>()).collect();
            let mut lambda = DiscreteOneForm::exact(topo, &r);
            for (v, e) in lambda.values.iter_mut().zip(&eta) {
                *v += *e as f64;
            }
            lambda
        })
        .collect()
}

pub fn harmonize(
    topo: &Topology,
    lengths: &[f64],
    lambda: &DiscreteOneForm,
    tol: f64,
) -> Result<DiscreteOneForm, FormsError> {
    FormContext::new(topo, lengths, tol)?.harmonize(lambda)
}

/// Harmonic representatives of the cohomology basis with the Hodge star
/// written as a matrix on their span.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    /// `ω_γ` for γ = a1..ag, b1..bg.
    pub forms: Vec<DiscreteOneForm>,
    /// `∫_{loop i} ω_m`.
    pub periods: DMatrix<f64>,
    /// Energy inner products `⟨ω_k, ω_m⟩`.
    pub gram: DMatrix<f64>,
    /// `⋆ω_k = Σ_m star[(m, k)] ω_m`; squares to −I and preserves `gram`.
    pub star: DMatrix<f64>,
    pub loops: Vec<Vec<usize>>,
}

fn sym_pow(m: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.max(0.0).powf(p)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

impl HarmonicBasis {
    pub fn new(ctx: &FormContext, basis: &HomologyBasis, seed: u64) -> Result<Self, FormsError> {
        let forms = cohomology_basis(ctx.topo, basis, seed)
            .iter()
            .map(|l| ctx.harmonize(l))
            .collect::<Result<Vec<_>, _>>()?;
        let loops = basis.loops();
        let n = forms.len();
        let periods = DMatrix::from_fn(n, n, |i, m| forms[m].integrate(&loops[i]));
        let mut gram = DMatrix::zeros(n, n);
        let mut s = DMatrix::zeros(n, n);
        for k in 0..n {
            for m in 0..n {
                let (dot, rot) = ctx.pairings(&forms[k], &forms[m]);
                gram[(k, m)] = dot;
                s[(k, m)] = rot;
            }
        }
        gram = (&gram + gram.transpose()) * 0.5;
        s = (&s - s.transpose()) * 0.5;
        // Raw projection X = −G⁻¹S; conjugating by G^{1/2} makes it skew, and
        // its orthogonal polar factor is an exact complex structure.
        let gh = sym_pow(&gram, 0.5);
        let gih = sym_pow(&gram, -0.5);
        let y = -(&gih * &s * &gih);
        let yp = &y * sym_pow(&(-(&y * &y)), -0.5);
        let star = &gih * yp * &gh;
        Ok(HarmonicBasis { forms, periods, gram, star, loops })
    }

    pub fn dim(&self) -> usize {
        self.forms.len()
    }

    pub fn combine(&self, c: &[f64]) -> DiscreteOneForm {
        let mut out = DiscreteOneForm { values: vec![0.0; self.forms[0].values.len()] };
        for (w, f) in c.iter().zip(&self.forms) {
            if *w != 0.0 {
                out.axpy(*w, f);
            }
        }
        out
    }

    /// Coordinates of a closed form's cohomology class in this basis.
    pub fn coordinates(&self, omega: &DiscreteOneForm) -> DVector<f64> {
        let p = DVector::from_iterator(self.dim(), self.loops.iter().map(|l| omega.integrate(l)));
        self.periods.clone().lu().solve(&p).expect("period matrix is unimodular")
    }

    /// Hodge star of a harmonic form.
    pub fn hodge_star(&self, omega: &DiscreteOneForm) -> DiscreteOneForm {
        let c = &self.star * self.coordinates(omega);
        self.combine(c.as_slice())
    }

    /// `ω_k + i⋆ω_k`.
    pub fn holomorphic(&self, k: usize) -> HolomorphicOneForm {
        let c = self.star.column(k).clone_owned();
        HolomorphicOneForm { re: self.forms[k].clone(), im: self.combine(c.as_slice()) }
    }
}

/// `ω + i·⋆ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolomorphicOneForm {
    pub re: DiscreteOneForm,
    pub im: DiscreteOneForm,
}

impl HolomorphicOneForm {
    pub fn value(&self, h: usize) -> Complex64 {
        Complex64::new(self.re.values[h], self.im.values[h])
    }

    pub fn period(&self, path: &[usize]) -> Complex64 {
        Complex64::new(self.re.integrate(path), self.im.integrate(path))
    }

    pub fn zero_like(&self) -> Self {
        HolomorphicOneForm {
            re: DiscreteOneForm { values: vec![0.0; self.re.values.len()] },
            im: DiscreteOneForm { values: vec![0.0; self.re.values.len()] },
        }
    }

    /// `self += c·other` for complex `c`.
    pub fn add_scaled(&mut self, c: Complex64, other: &HolomorphicOneForm) {
        for h in 0..self.re.values.len() {
            let v = c * other.value(h);
            self.re.values[h] += v.re;
            self.im.values[h] += v.im;
        }
    }
}

#[derive(Clone, Debug)]
pub struct HolomorphicBasis {
    /// `φ_γ` for γ = a1..ag, b1..bg (the real-linear generating set).
    pub generators: Vec<HolomorphicOneForm>,
    /// g complex-independent forms.
    pub forms: Vec<HolomorphicOneForm>,
    pub normalized: bool,
}

impl HolomorphicBasis {
    pub fn genus(&self) -> usize {
        self.forms.len()
    }

    /// `∫_{a_i} φ_j` as a g×g matrix (row = loop, column = form).
    pub fn a_periods(&self, basis: &HomologyBasis) -> DMatrix<Complex64> {
        let g = self.genus();
        DMatrix::from_fn(g, g, |i, j| self.forms[j].period(&basis.a[i]))
    }
}

fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Unnormalized holomorphic basis: the best-conditioned g-subset of the 2g
/// generators, measured on the a-period matrix.
pub fn holomorphic_basis(harmonic: &HarmonicBasis, basis: &HomologyBasis) -> Result<HolomorphicBasis, FormsError> {
    let g = basis.genus();
    let generators: Vec<HolomorphicOneForm> = (0..2 * g).map(|k| harmonic.holomorphic(k)).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for s in subsets(2 * g, g) {
        let a = DMatrix::from_fn(g, g, |i, j| generators[s[j]].period(&basis.a[i]));
        let c = condition_number(&a);
        if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
            best = Some((c, s));
        }
    }
    let (cond, chosen) = best.expect("at least one subset");
    if !cond.is_finite() || cond > 1e12 {
        let a = DMatrix::from_fn(g, g, |i, j| generators[j].period(&basis.a[i]));
        let sv = a.singular_values();
        let rank = sv.iter().filter(|&&s| s > 1e-12 * sv.max()).count();
        return Err(FormsError::RankDeficient { rank, expected: g });
    }
    let forms = chosen.iter().map(|&k| generators[k].clone()).collect();
    Ok(HolomorphicBasis { generators, forms, normalized: false })
}

/// Solve the g×g system so that `∫_{a_i} φ_j = δ_ij`.
pub fn normalize_basis(raw: &HolomorphicBasis, basis: &HomologyBasis) -> Result<HolomorphicBasis, FormsError> {
    let a = raw.a_periods(basis);
    let cond = condition_number(&a);
    if !cond.is_finite() || cond > 1e12 {
        return Err(FormsError::IllConditioned(cond));
    }
    let inv = a.try_inverse().ok_or(FormsError::IllConditioned(f64::INFINITY))?;
    let g = raw.genus();
    let forms = (0..g)
        .map(|j| {
            let mut phi = raw.forms[0].zero_like();
            for k in 0..g {
                phi.add_scaled(inv[(k, j)], &raw.forms[k]);
            }
            phi
        })
        .collect();
    Ok(HolomorphicBasis { generators: raw.generators.clone(), forms, normalized: true })
}

/// `Σ α_k φ_{a_k} + Σ β_l φ_{b_l}` with real coefficients (α then β).
pub fn combined_form(basis: &HolomorphicBasis, coefficients: &[f64]) -> Result<HolomorphicOneForm, FormsError> {
    if coefficients.len() != basis.generators.len() {
        return Err(FormsError::CoefficientCount {
            found: coefficients.len(),
            expected: basis.generators.len(),
        });
    }
    let mut phi = basis.generators[0].zero_like();
    for (c, g) in coefficients.iter().zip(&basis.generators) {
        if *c != 0.0 {
            phi.add_scaled(Complex64::new(*c, 0.0), g);
        }
    }
    Ok(phi)
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Discrete index of `φ` at every vertex: the winding of its per-face
/// dz-coefficient around the vertex, compared in edge-aligned frames and
/// corrected by the angle defect. Indices always sum to `2g − 2`.
pub fn vertex_indices(ctx: &FormContext, phi: &HolomorphicOneForm) -> Result<Vec<i64>, FormsError> {
    let topo = ctx.topo;
    let h: Vec<Complex64> = (0..topo.n_faces()).map(|f| ctx.face_coefficients(phi, f).0).collect();
    let k = angle_defect(topo, ctx.lengths)?;
    let dir = |c: usize, to: usize| {
        let z = ctx.charts[c / 3];
        z[to] - z[c % 3]
    };
    let mut out = vec![0i64; topo.n_vertices()];
    for v in 0..topo.n_vertices() {
        let mut total = 0.0;
        for c in topo.outgoing(v) {
            let n = topo.ccw(c);
            let out_dir = dir(c, (c % 3 + 2) % 3);
            let in_dir = dir(n, (n % 3 + 1) % 3);
            let a0 = (h[c / 3] * out_dir).arg();
            let a1 = (h[n / 3] * in_dir).arg();
            total += wrap_angle(a1 - a0);
        }
        out[v] = ((total - k[v]) / (2.0 * PI)).round() as i64;
    }
    Ok(out)
}

/// Zeros of a holomorphic form with multiplicities. Each vertex of positive
/// index is refined to a surface point by fitting the ratio `φ/ψ` as a
/// polynomial in the local conformal coordinate `w = ∫ψ` over the vertex's
/// two-ring, `ψ` being whichever helper form is largest there.
pub fn locate_zeros(
    ctx: &FormContext,
    phi: &HolomorphicOneForm,
    helpers: &[HolomorphicOneForm],
) -> Result<Divisor, FormsError> {
    let topo = ctx.topo;
    if phi.re.values.iter().chain(&phi.im.values).all(|&v| v == 0.0) {
        return Err(FormsError::ZeroForm);
    }
    let expected = 2 * topo.genus() as i64 - 2;
    let idx = vertex_indices(ctx, phi)?;
    if idx.iter().any(|&m| m < 0) {
        let found = idx.iter().filter(|&&m| m > 0).sum();
        return Err(FormsError::DegreeMismatch { found, expected });
    }
    let h_phi: Vec<Complex64> = (0..topo.n_faces()).map(|f| ctx.face_coefficients(phi, f).0).collect();
    let mut terms = Vec::new();
    for v in 0..topo.n_vertices() {
        let m = idx[v];
        if m == 0 {
            continue;
        }
        let points = refine_zero(ctx, v, m as usize, &h_phi, helpers);
        for p in points {
            terms.push(DivisorTerm { point: p, order: 1 });
        }
    }
    let d = Divisor::new(terms);
    if d.degree() != expected {
        return Err(FormsError::DegreeMismatch { found: d.degree(), expected });
    }
    Ok(d)
}

fn two_ring(topo: &Topology, v: usize) -> (Vec<usize>, Vec<usize>) {
    let mut verts = vec![v];
    verts.extend(topo.neighbours(v));
    let mut faces: Vec<usize> = Vec::new();
    for &u in &verts {
        for h in topo.outgoing(u) {
            faces.push(h / 3);
        }
    }
    faces.sort_unstable();
    faces.dedup();
    let mut all: Vec<usize> = faces.iter().flat_map(|&f| topo.face(f)).collect();
    all.sort_unstable();
    all.dedup();
    (faces, all)
}

fn refine_zero(
    ctx: &FormContext,
    v: usize,
    m: usize,
    h_phi: &[Complex64],
    helpers: &[HolomorphicOneForm],
) -> Vec<SurfacePoint> {
    let topo = ctx.topo;
    let fallback = || {
        let c = topo.vertex_halfedge(v);
        vec![SurfacePoint::corner(c / 3, c % 3); m]
    };
    let (faces, _) = two_ring(topo, v);
    // Helper with the largest minimum |h| over the patch.
    let mut best: Option<(f64, Vec<Complex64>, &HolomorphicOneForm)> = None;
    for psi in helpers {
        let hs: Vec<Complex64> = faces.iter().map(|&f| ctx.face_coefficients(psi, f).0).collect();
        let lo = hs.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let scale = hs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let score = if scale > 0.0 { lo / scale } else { 0.0 };
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, hs, psi));
        }
    }
    let Some((score, h_psi, psi)) = best else { return fallback() };
    if score < 1e-3 {
        return fallback();
    }
    // Potential of ψ over the patch by breadth-first integration from v.
    let in_patch = |f: usize| faces.binary_search(&f).is_ok();
    let mut w: std::collections::HashMap<usize, Complex64> = std::collections::HashMap::new();
    w.insert(v, Complex64::new(0.0, 0.0));
    let mut queue = std::collections::VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        for h in topo.outgoing(u) {
            if !in_patch(h / 3) && !in_patch(topo.twin(h) / 3) {
                continue;
            }
            let t = topo.target(h);
            if !w.contains_key(&t) {
                w.insert(t, w[&u] + psi.value(h));
                queue.push_back(t);
            }
        }
    }
    let corner_w = |f: usize| topo.face(f).map(|x| w.get(&x).copied());
    let mut samples = Vec::new();
    for (i, &f) in faces.iter().enumerate() {
        let cw = corner_w(f);
        if cw.iter().any(|c| c.is_none()) {
            continue;
        }
        let c = (cw[0].unwrap() + cw[1].unwrap() + cw[2].unwrap()) / 3.0;
        samples.push((c, h_phi[f] / h_psi[i]));
    }
    let deg = m + 1;
    if samples.len() < deg + 2 {
        return fallback();
    }
    let scale = samples.iter().map(|s| s.0.norm()).fold(0.0, f64::max).max(1e-300);
    let a = DMatrix::from_fn(samples.len(), deg + 1, |r, c| (samples[r].0 / scale).powu(c as u32));
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let Ok(coef) = a.svd(true, true).solve(&b, 1e-14) else { return fallback() };
    let mut roots = polynomial_roots(coef.as_slice());
    roots.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    let mut out = Vec::with_capacity(m);
    for r in roots.into_iter().take(m) {
        let target = r * scale;
        let hit = faces.iter().find_map(|&f| {
            let cw = corner_w(f);
            if cw.iter().any(|c| c.is_none()) {
                return None;
            }
            let tri = [cw[0].unwrap(), cw[1].unwrap(), cw[2].unwrap()];
            let b = SurfacePoint::bary_in_chart(&tri, target);
            (b.iter().all(|&x| x >= -1e-9)).then(|| {
                let b = b.map(|x| x.max(0.0));
                let s: f64 = b.iter().sum();
                SurfacePoint { face: f, bary: b.map(|x| x / s) }
            })
        });
        out.push(hit.unwrap_or_else(|| fallback()[0]));
    }
    out
}

/// Roots of `Σ c_k z^k` by the Durand-Kerner iteration.
fn polynomial_roots(c: &[Complex64]) -> Vec<Complex64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() < 1e-300 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z + k);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durand_kerner_finds_roots() {
        // (z − 1)(z + 2i) = z² + (2i − 1) z − 2i
        let c = [Complex64::new(0.0, -2.0), Complex64::new(-1.0, 2.0), Complex64::new(1.0, 0.0)];
        let mut r = polynomial_roots(&c);
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((r[0] - Complex64::new(0.0, -2.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn subsets_enumerate_binomial() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(8, 4).len(), 70);
    }
}
