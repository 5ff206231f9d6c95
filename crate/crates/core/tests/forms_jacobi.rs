use num_complex::Complex64;
use proptest::prelude::*;

use quartic::forms::{
    cohomology_basis, combined_form, holomorphic_basis, locate_zeros, normalize_basis, DiscreteOneForm,
    FormContext, HarmonicBasis, HolomorphicBasis,
};
use quartic::homology::{homology_basis, HomologyBasis, TreeCotree};
use quartic::jacobi::{
    abel_jacobi_divisor, build_lattice, integrate_path, period_matrix, reduce_mod_lattice, round_mod_lattice,
    AbelJacobiMap, Divisor, DivisorTerm, JacobianLattice,
};
use quartic::mesh::generate::{flat_torus, holed_plate};
use quartic::mesh::{SurfaceMesh, SurfacePoint, Topology};

const TOL: f64 = 1e-12;

/// Vertex (i, j) of the flat torus grid sits at (i·w/n, j·h/m).
fn grid_coordinate(topo: &Topology, n: usize, m: usize, w: f64, h: f64) -> (DiscreteOneForm, DiscreteOneForm) {
    let wrap = |d: i64, k: usize| {
        let k = k as i64;
        let d = d.rem_euclid(k);
        if d > k / 2 {
            d - k
        } else {
            d
        }
    };
    let mut du = DiscreteOneForm::zeros(topo);
    let mut dv = DiscreteOneForm::zeros(topo);
    for he in 0..topo.n_halfedges() {
        let (a, b) = (topo.origin(he), topo.target(he));
        du.values[he] = wrap((b / m) as i64 - (a / m) as i64, n) as f64 * w / n as f64;
        dv.values[he] = wrap((b % m) as i64 - (a % m) as i64, m) as f64 * h / m as f64;
    }
    (du, dv)
}

struct Setup {
    mesh: SurfaceMesh,
    lengths: Vec<f64>,
    basis: HomologyBasis,
}

fn plate(genus: usize) -> Setup {
    let mesh = holed_plate(genus, 2, 10);
    let lengths = mesh.edge_lengths();
    let basis = homology_basis(mesh.topology()).unwrap();
    Setup { mesh, lengths, basis }
}

fn square_torus() -> Setup {
    let (mesh, lengths) = flat_torus(12, 12, 1.0, 1.0);
    let basis = homology_basis(mesh.topology()).unwrap();
    Setup { mesh, lengths, basis }
}

fn normalized(s: &Setup, ctx: &FormContext) -> (HarmonicBasis, HolomorphicBasis) {
    let hb = HarmonicBasis::new(ctx, &s.basis, 7).unwrap();
    let raw = holomorphic_basis(&hb, &s.basis).unwrap();
    let nb = normalize_basis(&raw, &s.basis).unwrap();
    (hb, nb)
}

#[test]
fn cohomology_basis_pairs_with_loops() {
    let s = plate(2);
    let topo = s.mesh.topology();
    let lambdas = cohomology_basis(topo, &s.basis, 3);
    let loops = s.basis.loops();
    let g = s.basis.genus();
    for (k, l) in lambdas.iter().enumerate() {
        assert!(l.closedness_residual() < 1e-13);
        for (i, lp) in loops.iter().enumerate() {
            // a_i·b_i = 1, b_i·a_i = −1, zero otherwise.
            let expected = if i + g == k {
                1.0
            } else if k + g == i {
                -1.0
            } else {
                0.0
            };
            assert!((l.integrate(lp) - expected).abs() < 1e-12, "loop {i} form {k}");
        }
    }
}

#[test]
fn harmonic_forms_are_closed_harmonic_and_seed_independent() {
    let s = plate(2);
    let topo = s.mesh.topology();
    let ctx = FormContext::new(topo, &s.lengths, 1e-12).unwrap();
    let h1 = HarmonicBasis::new(&ctx, &s.basis, 1).unwrap();
    let h2 = HarmonicBasis::new(&ctx, &s.basis, 99).unwrap();
    for (a, b) in h1.forms.iter().zip(&h2.forms) {
        assert!(a.closedness_residual() < 1e-10);
        assert!(a.harmonic_residual(topo, &ctx.weights) < 1e-10);
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "seed dependence {diff}");
        // Idempotent.
        let again = ctx.harmonize(a).unwrap();
        let d2 = a.values.iter().zip(&again.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d2 < 1e-10);
    }
    // Star squares to −1 and preserves the energy inner product.
    let j = &h1.star;
    let n = j.nrows();
    assert!((j * j + nalgebra::DMatrix::identity(n, n)).norm() < 1e-8);
    assert!((j.transpose() * &h1.gram * j - &h1.gram).norm() < 1e-8 * h1.gram.norm());
    for k in 0..n {
        let w = &h1.forms[k];
        let sw = h1.hodge_star(w);
        let ssw = h1.hodge_star(&sw);
        let e = ctx.energy(w);
        assert!((ctx.energy(&sw) - e).abs() < 1e-8 * e);
        let d = w.values.iter().zip(&ssw.values).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-8);
        assert!(sw.closedness_residual() < 1e-10);
    }
}

#[test]
fn flat_torus_star_of_du_is_dv() {
    let (n, m) = (10, 10);
    let (mesh, lengths) = flat_torus(n, m, 1.0, 1.0);
    let topo = mesh.topology();
    let basis = homology_basis(topo).unwrap();
    let ctx = FormContext::new(topo, &lengths, 1e-12).unwrap();
    let hb = HarmonicBasis::new(&ctx, &basis, 5).unwrap();
    let (du, dv) = grid_coordinate(topo, n, m, 1.0, 1.0);
    assert!(du.harmonic_residual(topo, &ctx.weights) < 1e-12);
    // Harmonization of a straight-loop form is constant on parallel edges.
    for w in &hb.forms {
        let c = hb.coordinates(w);
        let mut pred = du.scaled(0.0);
        let cu = hb.coordinates(&du);
        let cv = hb.coordinates(&dv);
        let det = cu[0] * cv[1] - cu[1] * cv[0];
        let x = (c[0] * cv[1] - c[1] * cv[0]) / det;
        let y = (cu[0] * c[1] - cu[1] * c[0]) / det;
        pred.axpy(x, &du);
        pred.axpy(y, &dv);
        let d = w.values.iter().zip(&pred.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-9, "harmonic form is not constant-coefficient: {d}");
    }
    let star = hb.hodge_star(&du);
    let d = star.values.iter().zip(&dv.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d < 1e-9, "⋆du differs from dv by {d}");
}

#[test]
fn square_torus_normalized_periods() {
    let s = square_torus();
    let topo = s.mesh.topology();
    let ctx = FormContext::new(topo, &s.lengths, 1e-12).unwrap();
    let (_, nb) = normalized(&s, &ctx);
    assert_eq!(nb.genus(), 1);
    let pm = period_matrix(&nb, &s.basis).unwrap();
    assert!(pm.identity_deviation() < 1e-8);
    assert!((pm.b[(0, 0)] - Complex64::i()).norm() < 1e-6, "b-period {}", pm.b[(0, 0)]);
    let lat = build_lattice(&pm).unwrap();
    assert_eq!(lat.generators.len(), 2);
    assert!((lat.shortest_vector() - 1.0).abs() < 1e-6);
    // Normalizing twice changes nothing.
    let again = normalize_basis(&nb, &s.basis).unwrap();
    for (a, b) in nb.forms.iter().zip(&again.forms) {
        let d = a.re.values.iter().zip(&b.re.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10);
    }
    // A torus form has no zeros.
    let phi = combined_form(&nb, &[1.0, 1.0]).unwrap();
    assert!(locate_zeros(&ctx, &phi, &nb.forms).unwrap().is_empty());
}

#[test]
fn genus_two_periods_and_zeros() {
    let s = plate(2);
    let topo = s.mesh.topology();
    let ctx = FormContext::new(topo, &s.lengths, 1e-12).unwrap();
    let (_, nb) = normalized(&s, &ctx);
    assert_eq!(nb.genus(), 2);
    let pm = period_matrix(&nb, &s.basis).unwrap();
    assert!(pm.identity_deviation() < 1e-8);
    let (asym, min_im) = pm.riemann_health();
    assert!(asym < 1e-6 * pm.b.norm().max(1.0), "B asymmetry {asym}");
    assert!(min_im > 0.0);
    for phi in nb.forms.iter().chain(&nb.generators) {
        assert!(phi.re.closedness_residual() < 1e-10);
        assert!(phi.im.closedness_residual() < 1e-10);
        assert!(phi.im.harmonic_residual(topo, &ctx.weights) < 1e-9);
    }
    let phi = combined_form(&nb, &[1.0; 4]).unwrap();
    let zeros = locate_zeros(&ctx, &phi, &nb.forms).unwrap();
    assert_eq!(zeros.degree(), 2);
}

#[test]
fn combined_form_is_linear() {
    let s = plate(1);
    let topo = s.mesh.topology();
    let ctx = FormContext::new(topo, &s.lengths, 1e-12).unwrap();
    let (_, nb) = normalized(&s, &ctx);
    let a = combined_form(&nb, &[0.3, -1.2]).unwrap();
    let b = combined_form(&nb, &[2.0, 0.5]).unwrap();
    let c = combined_form(&nb, &[2.3, -0.7]).unwrap();
    for h in 0..topo.n_halfedges() {
        assert!((a.value(h) + b.value(h) - c.value(h)).norm() < 1e-12);
    }
    let z = combined_form(&nb, &[0.0, 0.0]).unwrap();
    assert!(z.re.values.iter().all(|&v| v == 0.0));
    assert!(combined_form(&nb, &[1.0]).is_err());
}

fn abel_jacobi_setup(s: &Setup, ctx: &FormContext) -> (HolomorphicBasis, AbelJacobiMap) {
    let (_, nb) = normalized(s, ctx);
    let pm = period_matrix(&nb, &s.basis).unwrap();
    let lat = build_lattice(&pm).unwrap();
    let topo = s.mesh.topology();
    let cut = TreeCotree::new(topo, 0).cut_mask(topo);
    let map = AbelJacobiMap::new(ctx, &nb, &cut, &lat).unwrap();
    (nb, map)
}

/// Shortest in-disk halfedge path between two disk vertices.
fn disk_path(topo: &Topology, map: &AbelJacobiMap, from: usize, to: usize, avoid: Option<usize>) -> Option<Vec<usize>> {
    let nd = map.sliced.n_vertices();
    let mut prev: Vec<Option<usize>> = vec![None; nd];
    let mut seen = vec![false; nd];
    seen[from] = true;
    let mut q = std::collections::VecDeque::from([from]);
    while let Some(v) = q.pop_front() {
        if v == to {
            break;
        }
        for h in 0..topo.n_halfedges() {
            if map.sliced.corner_vertex[h] != v || map.sliced.cut[topo.edge(h)] || Some(topo.edge(h)) == avoid {
                continue;
            }
            let w = map.sliced.corner_vertex[topo.next(h)];
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some(h);
                q.push_back(w);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let mut path = Vec::new();
    let mut v = to;
    while v != from {
        let h = prev[v].unwrap();
        path.push(h);
        v = map.sliced.corner_vertex[h];
    }
    path.reverse();
    Some(path)
}

#[test]
fn abel_jacobi_is_path_independent_and_winds_by_periods() {
    let s = plate(2);
    let topo = s.mesh.topology();
    let ctx = FormContext::new(topo, &s.lengths, 1e-12).unwrap();
    let (nb, map) = abel_jacobi_setup(&s, &ctx);
    let interior: Vec<usize> = (0..map.sliced.n_vertices()).filter(|&v| !map.boundary[v]).collect();
    let target = interior[interior.len() / 2];
    let p1 = disk_path(topo, &map, map.base_vertex, target, None).unwrap();
    let p2 = disk_path(topo, &map, map.base_vertex, target, Some(topo.edge(p1[0]))).unwrap();
    assert_ne!(p1, p2);
    let i1 = map.integrate_in_disk(topo, &nb, &p1).unwrap();
    let i2 = map.integrate_in_disk(topo, &nb, &p2).unwrap();
    let corner = (0..topo.n_halfedges()).find(|&c| map.sliced.corner_vertex[c] == target).unwrap();
    let at = map.point(topo, &SurfacePoint::corner(corner / 3, corner % 3)).unwrap();
    for j in 0..2 {
        assert!((i1[j] - i2[j]).norm() < 1e-10);
        assert!((i1[j] - at[j]).norm() < 1e-10);
    }
    // Detouring once around a_k on the closed surface adds λ_{a_k}.
    let v0 = s.basis.base;
    let c0 = (0..topo.n_halfedges()).find(|&c| topo.origin(c) == v0).unwrap();
    let q = disk_path(topo, &map, map.base_vertex, map.sliced.corner_vertex[c0], None).unwrap();
    let q_back = quartic::homology::reverse_path(topo, &q);
    for k in 0..2 {
        let mut detour = q.clone();
        detour.extend(&s.basis.a[k]);
        detour.extend(&q_back);
        detour.extend(&p1);
        let wound = integrate_path(&nb, &detour);
        let lambda = &map.lattice.generators[k];
        for j in 0..2 {
            assert!((wound[j] - i1[j] - lambda[j]).norm() < 1e-9);
        }
    }
    // Point value agrees with the segment integral from corner 0.
    for f in [0, topo.n_faces() / 3, topo.n_faces() - 1] {
        let p = SurfacePoint::new(f, [0.2, 0.5, 0.3]).unwrap();
        let a = map.point_in_face(&p);
        let b = map.point_by_segment(&p);
        for j in 0..2 {
            assert!((a[j] - b[j]).norm() < 1e-12);
        }
    }
}

#[test]
fn divisor_images_are_linear_mod_lattice() {
    let s = plate(2);
    let topo = s.mesh.topology();
    let ctx = FormContext::new(topo, &s.lengths, 1e-12).unwrap();
    let (_, map) = abel_jacobi_setup(&s, &ctx);
    let pt = |f: usize| DivisorTerm { point: SurfacePoint::barycenter(f), order: 1 };
    let nf = topo.n_faces();
    let d1 = Divisor::new(vec![pt(3), pt(nf / 2)]);
    let d2 = Divisor::new(vec![pt(nf / 3), DivisorTerm { order: -2, ..pt(nf - 5) }]);
    let i1 = abel_jacobi_divisor(topo, &map, &d1, 16).unwrap();
    let i2 = abel_jacobi_divisor(topo, &map, &d2, 16).unwrap();
    let i12 = abel_jacobi_divisor(topo, &map, &d1.plus(&d2), 16).unwrap();
    let diff: Vec<Complex64> = (0..2).map(|j| i12.residual[j] - i1.residual[j] - i2.residual[j]).collect();
    let r = reduce_mod_lattice(&diff, &map.lattice, 16).unwrap();
    assert!(r.residual_norm() < 1e-9);
    let zero = abel_jacobi_divisor(topo, &map, &d1.minus(&d1), 16).unwrap();
    assert!(zero.residual_norm_sqr() == 0.0);
    // Arithmetic identity Φ = lattice part + residual.
    let lp = map.lattice.point(&i1.s.iter().chain(&i1.t).copied().collect::<Vec<_>>());
    for j in 0..2 {
        assert!((i1.phi[j] - lp[j] - i1.residual[j]).norm() < 1e-14);
    }
}

fn brute_force(v: &[Complex64], lat: &JacobianLattice, r: i64) -> f64 {
    let n = lat.generators.len();
    let mut best = f64::INFINITY;
    let mut x = vec![-r; n];
    loop {
        let p = lat.point(&x);
        let d: f64 = v.iter().zip(&p).map(|(a, b)| (a - b).norm_sqr()).sum();
        best = best.min(d);
        let mut k = 0;
        while k < n {
            x[k] += 1;
            if x[k] <= r {
                break;
            }
            x[k] = -r;
            k += 1;
        }
        if k == n {
            return best.sqrt();
        }
    }
}

fn random_lattice(g: usize, seed: &[f64]) -> JacobianLattice {
    // A = I, B = X + iY with Y symmetric positive definite.
    let mut generators = Vec::new();
    for i in 0..g {
        let mut col = vec![Complex64::new(0.0, 0.0); g];
        col[i] = Complex64::new(1.0, 0.0);
        generators.push(col);
    }
    let at = |k: usize| seed[k % seed.len()];
    for i in 0..g {
        let col = (0..g)
            .map(|j| {
                let (a, b) = (i.min(j), i.max(j));
                let x = at(a * 7 + b * 3) - 0.5;
                let y = if i == j { 0.8 + at(a + b * 5 + 1) } else { 0.3 * (at(a * 11 + b * 13 + 2) - 0.5) };
                Complex64::new(x, y)
            })
            .collect();
        generators.push(col);
    }
    JacobianLattice { generators }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closest_vector_matches_exhaustive_search(
        g in 1usize..=2,
        seed in proptest::collection::vec(0.0f64..1.0, 8),
        v in proptest::collection::vec(-1.5f64..1.5, 4),
    ) {
        let lat = random_lattice(g, &seed);
        let target: Vec<Complex64> = (0..g).map(|j| Complex64::new(v[2 * j], v[2 * j + 1])).collect();
        let r = reduce_mod_lattice(&target, &lat, 16).unwrap();
        let brute = brute_force(&target, &lat, 3);
        prop_assert!((r.residual_norm() - brute).abs() < 1e-12);
        let naive = round_mod_lattice(&target, &lat);
        prop_assert!(r.residual_norm() <= naive.residual_norm() + TOL);
        let len = target.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(r.residual_norm() <= len + TOL);
    }

    #[test]
    fn harmonization_ignores_exact_perturbations(seed in 0u64..1000) {
        let s = plate(1);
        let topo = s.mesh.topology();
        let ctx = FormContext::new(topo, &s.lengths, 1e-12).unwrap();
        let lambda = &cohomology_basis(topo, &s.basis, seed)[0];
        let f: Vec<f64> = (0..topo.n_vertices()).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 100.0).collect();
        let mut perturbed = lambda.clone();
        perturbed.axpy(1.0, &DiscreteOneForm::exact(topo, &f));
        for lp in s.basis.loops() {
            prop_assert!((perturbed.integrate(&lp) - lambda.integrate(&lp)).abs() < 1e-10);
        }
        let a = ctx.harmonize(lambda).unwrap();
        let b = ctx.harmonize(&perturbed).unwrap();
        let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(d < 1e-9);
    }
}
