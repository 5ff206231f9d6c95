mod common;

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use proptest::prelude::*;

use quartic::homology::compute_cut_graph;
use quartic::immersion::{augment_cut_graph, flatten, Immersion};
use quartic::mesh::generate::flat_torus;
use quartic::mesh::{SurfaceMesh, SurfacePoint, Topology};
use quartic::tmesh::{
    extract_patches, fan_gaps, motor_graph, MotorGraph, NodeKind, Origin, Ray, TMesh, TmeshError, TraceConfig,
    Tracer, Termination, Trajectory,
};

const AXES: [Complex64; 4] = [
    Complex64 { re: 1.0, im: 0.0 },
    Complex64 { re: 0.0, im: 1.0 },
    Complex64 { re: -1.0, im: 0.0 },
    Complex64 { re: 0.0, im: -1.0 },
];

fn min_image(d: isize, n: usize) -> f64 {
    let n = n as isize;
    let d = d.rem_euclid(n);
    (if d > n / 2 { d - n } else { d }) as f64
}

struct Torus {
    mesh: SurfaceMesh,
    lengths: Vec<f64>,
    imm: Immersion,
    /// Layout image of the grid's unit x direction.
    frame: Complex64,
    w: f64,
    h: f64,
}

fn torus(n: usize, m: usize, w: f64, h: f64) -> Torus {
    let (mesh, lengths) = flat_torus(n, m, w, h);
    let topo = mesh.topology();
    let cut = compute_cut_graph(topo);
    let imm = flatten(topo, &lengths, &cut.edge_mask(topo), &[], 0).unwrap();
    let grid = |v: usize| ((v / m) as isize, (v % m) as isize);
    let [v0, v1, _] = topo.face(0);
    let (g0, g1) = (grid(v0), grid(v1));
    let dg = Complex64::new(min_image(g1.0 - g0.0, n) * w / n as f64, min_image(g1.1 - g0.1, m) * h / m as f64);
    let frame = (imm.corners[1] - imm.corners[0]) / dg;
    Torus { mesh, lengths, imm, frame, w, h }
}

impl Torus {
    fn topo(&self) -> &Topology {
        self.mesh.topology()
    }

    fn tracer(&self, cap: f64) -> Tracer<'_> {
        let mut cfg = TraceConfig::for_surface(self.topo(), &self.lengths);
        cfg.length_cap = cap;
        Tracer::new(self.topo(), &self.imm, &[], cfg)
    }

    fn centroid(&self, f: usize) -> Complex64 {
        self.imm.face(f).iter().sum::<Complex64>() / 3.0
    }

    /// Face nearest the middle of the layout.
    fn middle_face(&self) -> usize {
        let mid = self.imm.corners.iter().sum::<Complex64>() / self.imm.corners.len() as f64;
        (0..self.topo().n_faces()).min_by(|&a, &b| (self.centroid(a) - mid).norm().total_cmp(&(self.centroid(b) - mid).norm())).unwrap()
    }

    fn locate(&self, z: Complex64) -> Option<usize> {
        (0..self.topo().n_faces()).find(|&f| SurfacePoint::bary_in_chart(&self.imm.face(f), z).iter().all(|&b| b > 1e-9))
    }

    fn ray(&self, z: Complex64, dir: Complex64) -> Ray {
        let face = self.locate(z).expect("point inside the layout");
        Ray { origin: Origin::Point { face, z }, index: 0, face, z, dir }
    }
}

fn check_trajectory(topo: &Topology, t: &Trajectory) {
    for w in t.segments.windows(2) {
        assert_eq!(w[0].s1, w[1].s0);
        assert!(w[1].s1 > w[1].s0);
        let (f, g) = (w[0].face, w[1].face);
        assert!((0..3).any(|k| topo.twin(3 * f + k) / 3 == g), "faces {f} and {g} are not adjacent");
    }
}

#[test]
fn regular_point_emits_four_rays() {
    let t = torus(8, 8, 1.0, 1.0);
    let mut tracer = t.tracer(1.0);
    for v in [0, 9, 27, 40] {
        let rays = tracer.emit(v).unwrap();
        assert_eq!(rays.len(), 4);
        for (j, r) in rays.iter().enumerate() {
            assert_eq!(r.index, j);
            assert!(AXES.contains(&r.dir));
        }
        for g in fan_gaps(&tracer, &rays) {
            assert!((g - FRAC_PI_2).abs() < 1e-9, "{g}");
        }
    }
}

/// Unit cube, eight cones of angle 3π/2.
fn cube() -> SurfaceMesh {
    let positions: Vec<[f64; 3]> =
        (0..8).map(|i| [(i >> 2 & 1) as f64, (i >> 1 & 1) as f64, (i & 1) as f64]).collect();
    let faces = vec![
        [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3], [0, 4, 5], [0, 5, 1],
        [2, 3, 7], [2, 7, 6], [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
    ];
    SurfaceMesh::new(positions, faces).unwrap()
}

/// Every vertex a cone, cut along a spanning tree of edges of length `edge`.
fn tree_immersion(mesh: &SurfaceMesh, edge: f64) -> (Vec<f64>, Immersion) {
    let topo = mesh.topology();
    let lengths = mesh.edge_lengths();
    let nv = topo.n_vertices();
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut cut = vec![false; topo.n_edges()];
    for h in 0..3 * topo.n_faces() {
        let e = topo.edge(h);
        if (lengths[e] - edge).abs() > 1e-9 * edge || cut[e] {
            continue;
        }
        let (a, b) = (find(&mut parent, topo.origin(h)), find(&mut parent, topo.target(h)));
        if a != b {
            parent[a] = b;
            cut[e] = true;
        }
    }
    let cones: Vec<usize> = (0..nv).collect();
    let imm = flatten(topo, &lengths, &cut, &cones, 0).unwrap();
    (lengths, imm)
}

#[test]
fn cube_corners_emit_three_rays_and_connect() {
    let mesh = cube();
    let topo = mesh.topology();
    let (lengths, imm) = tree_immersion(&mesh, 1.0);
    assert!(imm.max_quantization_error(topo) < 1e-9);
    let cones: Vec<usize> = (0..8).collect();
    let mut tracer = Tracer::new(topo, &imm, &cones, TraceConfig::for_surface(topo, &lengths));
    let rays = tracer.emit_separatrices(&cones).unwrap();
    assert_eq!(rays.len(), 24);
    for v in 0..8 {
        let fan: Vec<Ray> = rays.iter().filter(|r| r.origin == Origin::Vertex(v)).copied().collect();
        assert_eq!(fan.len(), 3);
        for g in fan_gaps(&tracer, &fan) {
            assert!((g - FRAC_PI_2).abs() < 1e-9);
        }
    }
    // Every ray runs along a cube edge into the neighbouring corner.
    let trajs: Vec<Trajectory> = rays.iter().map(|r| tracer.trace(r).unwrap()).collect();
    for t in &trajs {
        check_trajectory(topo, t);
        let Termination::Singularity(w) = t.termination else { panic!("{:?}", t.termination) };
        let Origin::Vertex(u) = t.ray.origin else { unreachable!() };
        let developed = (t.segments.last().unwrap().b - t.ray.z).norm();
        assert!((t.length() - developed).abs() < 1e-8);
        assert!((t.length() - 1.0).abs() < 1e-8, "{u} -> {w}: {}", t.length());
    }
    let mg = motor_graph(&tracer, trajs);
    assert_eq!(mg.trajectories.len(), 12);
    assert!(mg.junctions.is_empty() && mg.xings.is_empty());
    for n in &mg.nodes {
        assert!(matches!(n.kind, NodeKind::Singularity(_)));
        assert_eq!(n.ends.len(), 3);
    }
    let tm = extract_patches(&mg, topo, &imm).unwrap();
    assert_eq!(tm.patches.len(), 6);
    assert!(tm.max_corner_error() < 1e-9);
    for p in &tm.patches {
        assert!((p.width - 1.0).abs() < 1e-8 && (p.height - 1.0).abs() < 1e-8);
    }
    assert!((tm.total_area() - 6.0).abs() < 1e-7);
    assert!(tm.adjacency.iter().all(|a| a.quarter_turns < 4 && a.patch != a.other));
}

#[test]
fn cone_angle_off_quarter_turns_is_rejected() {
    let mesh = quartic::mesh::generate::icosahedron();
    let topo = mesh.topology();
    let (lengths, imm) = tree_immersion(&mesh, mesh.edge_lengths()[0]);
    let cones: Vec<usize> = (0..topo.n_vertices()).collect();
    let mut tracer = Tracer::new(topo, &imm, &cones, TraceConfig::for_surface(topo, &lengths));
    // Five equilateral corners: 300°.
    assert!(matches!(tracer.emit(0), Err(TmeshError::ConeAngle { vertex: 0, .. })));
}

#[test]
fn rational_directions_close_on_a_flat_torus() {
    let t = torus(10, 10, 1.0, 1.0);
    let tracer = t.tracer(20.0);
    let z = t.centroid(t.middle_face());
    for (dir, period) in [(Complex64::new(1.0, 0.0), 1.0), (Complex64::new(0.0, 1.0), 1.0), (Complex64::new(1.0, 1.0), 2f64.sqrt()), (Complex64::new(-2.0, 1.0), 5f64.sqrt())] {
        let tr = tracer.trace(&t.ray(z, t.frame * dir / dir.norm())).unwrap();
        check_trajectory(t.topo(), &tr);
        assert_eq!(tr.termination, Termination::Closed);
        assert!((tr.length() - period).abs() < 1e-8, "{dir}: {}", tr.length());
    }
    let slope = Complex64::new(1.0, 2f64.sqrt());
    let tr = tracer.trace(&t.ray(z, t.frame * slope / slope.norm())).unwrap();
    assert_eq!(tr.termination, Termination::LengthCap);
    assert!((tr.length() - 20.0).abs() < 1e-12);
}

#[test]
fn orthogonal_closed_trajectories_make_one_patch() {
    let t = torus(12, 8, 1.5, 1.0);
    let tracer = t.tracer(100.0);
    let z = t.centroid(t.middle_face());
    let mut y = t.ray(z, t.frame * Complex64::i());
    y.index = 1;
    let trajs = vec![tracer.trace(&t.ray(z, t.frame)).unwrap(), tracer.trace(&y).unwrap()];
    assert!(trajs.iter().all(|tr| tr.termination == Termination::Closed));
    let mg = motor_graph(&tracer, trajs);
    assert!(mg.junctions.is_empty());
    assert_eq!(mg.nodes.len(), 1);
    assert_eq!(mg.nodes[0].ends.len(), 4);
    let tm = extract_patches(&mg, t.topo(), &t.imm).unwrap();
    assert_eq!(tm.patches.len(), 1);
    let p = &tm.patches[0];
    assert!(tm.max_corner_error() < 1e-12);
    assert!(p.corners.iter().all(|&c| c == 0));
    let mut dims = [p.width, p.height];
    dims.sort_by(f64::total_cmp);
    assert!((dims[0] - t.h).abs() < 1e-8 && (dims[1] - t.w).abs() < 1e-8);
    assert!((tm.total_area() - t.w * t.h).abs() < 1e-8);
    // Both sides of each closed arc border the same patch.
    assert!(tm.adjacency.iter().all(|a| a.patch == 0 && a.other == 0 && a.quarter_turns == 0));
}

#[test]
fn later_arrival_stops() {
    let t = torus(18, 18, 3.0, 3.0);
    let tracer = t.tracer(0.6);
    let za = t.centroid(t.middle_face());
    let zb = za + t.frame * Complex64::new(0.3, -0.2);
    let east = tracer.trace(&t.ray(za, t.frame)).unwrap();
    let north = tracer.trace(&t.ray(zb, t.frame * Complex64::i())).unwrap();
    let mg = motor_graph(&tracer, vec![east, north]);
    assert_eq!(mg.junctions.len(), 1);
    let j = mg.junctions[0];
    let stopped = &mg.trajectories[j.stopped];
    assert_eq!(stopped.ray.dir, t.frame);
    assert_eq!(stopped.termination, Termination::Motor { by: j.on });
    assert!((stopped.length() - 0.3).abs() < 1e-9);
    assert!((j.s_on - 0.2).abs() < 1e-9);
    assert!((mg.trajectories[j.on].length() - 0.6).abs() < 1e-12);
    let tj = mg.nodes.iter().find(|n| n.kind == NodeKind::TJunction(0)).unwrap();
    assert_eq!(tj.ends.len(), 3);
    // The continuing arc is split at the junction.
    assert_eq!(mg.arcs.iter().filter(|a| a.trajectory == j.on).count(), 2);

    let parallel = tracer.trace(&t.ray(zb, t.frame)).unwrap();
    let mg = motor_graph(&tracer, vec![tracer.trace(&t.ray(za, t.frame)).unwrap(), parallel]);
    assert!(mg.junctions.is_empty());
    assert_eq!(mg.arcs.len(), 2);
}

/// Straight lines in the universal cover, resolved by repeatedly taking the
/// earliest crossing that is still valid.
fn brute_force(p: &[Complex64], d: &[Complex64], cap: f64, lattice: [Complex64; 2]) -> (Vec<f64>, Vec<(usize, usize)>) {
    let cross = |a: Complex64, b: Complex64| a.re * b.im - a.im * b.re;
    let mut xs = Vec::new();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            for a in -1..=1 {
                for b in -1..=1 {
                    let lam = lattice[0] * a as f64 + lattice[1] * b as f64;
                    let den = cross(d[i], d[j]);
                    let w = p[j] + lam - p[i];
                    let (s, t) = (cross(w, d[j]) / den, cross(w, d[i]) / den);
                    if s > 1e-6 && s < cap && t > 1e-6 && t < cap {
                        xs.push((i, s, j, t));
                    }
                }
            }
        }
    }
    let mut alive = vec![cap; p.len()];
    let mut used = vec![false; xs.len()];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(f64, usize)> = None;
        for (k, &(i, s, j, t)) in xs.iter().enumerate() {
            let (late, tl, early, te) = if s > t { (i, s, j, t) } else { (j, t, i, s) };
            if used[k] || alive[late] <= tl || alive[early] < te {
                continue;
            }
            if best.is_none_or(|b| tl < b.0) {
                best = Some((tl, k));
            }
        }
        let Some((_, k)) = best else { break };
        used[k] = true;
        let (i, s, j, t) = xs[k];
        let (late, tl, early) = if s > t { (i, s, j) } else { (j, t, i) };
        alive[late] = tl;
        out.push((early, late));
    }
    out.sort_unstable();
    (alive, out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn event_order_matches_brute_force(
        offsets in prop::collection::vec((-0.45f64..0.45, -0.45f64..0.45), 2),
        angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 3),
    ) {
        let t = torus(18, 18, 3.0, 3.0);
        let cap = 0.9;
        let tracer = t.tracer(cap);
        let za = t.centroid(t.middle_face());
        let mut p = vec![za];
        p.extend(offsets.iter().map(|&(x, y)| za + t.frame * Complex64::new(x, y)));
        let d: Vec<Complex64> = angles.iter().map(|&a| t.frame * Complex64::from_polar(1.0, a)).collect();
        prop_assume!(p.iter().all(|&z| t.locate(z).is_some()));
        let trajs: Vec<Trajectory> = (0..3).map(|i| tracer.trace(&t.ray(p[i], d[i])).unwrap()).collect();
        for tr in &trajs {
            check_trajectory(t.topo(), tr);
        }
        let lattice = [t.frame * t.w, t.frame * Complex64::i() * t.h];
        let (alive, pairs) = brute_force(&p, &d, cap, lattice);
        let mg = motor_graph(&tracer, trajs);
        let id = |tr: &Trajectory| (0..3).find(|&i| tr.ray.z == p[i]).unwrap();
        for tr in &mg.trajectories {
            prop_assert!((tr.length() - alive[id(tr)]).abs() < 1e-7, "{} vs {}", tr.length(), alive[id(tr)]);
        }
        let mut got: Vec<(usize, usize)> = mg
            .junctions
            .iter()
            .map(|j| (id(&mg.trajectories[j.on]), id(&mg.trajectories[j.stopped])))
            .collect();
        got.sort_unstable();
        prop_assert_eq!(got, pairs);
        for n in &mg.nodes {
            if let NodeKind::TJunction(_) = n.kind {
                prop_assert_eq!(n.ends.len(), 3);
            }
        }
    }
}

fn shuffled(v: &[Trajectory], seed: u64) -> Vec<Trajectory> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut out = v.to_vec();
    out.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    out
}

fn check_graph(mg: &MotorGraph, k: usize) {
    for n in &mg.nodes {
        match n.kind {
            NodeKind::TJunction(_) => assert_eq!(n.ends.len(), 3),
            NodeKind::Crossing(_) => assert_eq!(n.ends.len(), 4),
            NodeKind::Singularity(_) => assert_eq!(n.ends.len(), k),
            NodeKind::Point => {}
            NodeKind::End(_) => assert_eq!(n.ends.len(), 1),
        }
    }
    for j in &mg.junctions {
        let on = &mg.trajectories[j.on];
        assert!(j.s_on > 0.0 && j.s_on < on.length());
        assert!((mg.trajectories[j.stopped].length() - j.s_stopped).abs() < 1e-12);
    }
}

#[test]
fn genus_two_tmesh() {
    let fx = common::genus_two_cones(5);
    let topo = &fx.metric.topo;
    let lengths = fx.metric.lengths();
    let cut = compute_cut_graph(topo);
    let aug = augment_cut_graph(topo, &lengths, &cut, &fx.cones).unwrap();
    let imm = flatten(topo, &lengths, &aug.edge_mask(topo), &fx.cones, 0).unwrap();
    let mut tracer = Tracer::new(topo, &imm, &fx.cones, TraceConfig::for_surface(topo, &lengths));
    let rays = tracer.emit_separatrices(&fx.cones).unwrap();
    assert_eq!(rays.len(), 40);
    for &v in &fx.cones {
        let fan: Vec<Ray> = rays.iter().filter(|r| r.origin == Origin::Vertex(v)).copied().collect();
        assert_eq!(fan.len(), 5);
        for g in fan_gaps(&tracer, &fan) {
            assert!((g - FRAC_PI_2).abs().to_degrees() < 0.5, "{}", g.to_degrees());
        }
    }
    let trajs: Vec<Trajectory> = rays.iter().map(|r| tracer.trace(r).unwrap()).collect();
    let mut turned = 0;
    for t in &trajs {
        check_trajectory(topo, t);
        for w in t.segments.windows(2) {
            assert!(AXES.contains(&w[0].dir));
            let f = w[0].face;
            let h = (0..3).map(|k| 3 * f + k).find(|&h| topo.twin(h) / 3 == w[1].face).unwrap();
            match &imm.transitions[topo.twin(h)] {
                Some(tr) => {
                    assert_eq!(w[1].dir, w[0].dir * tr.snapped_rotation());
                    turned += usize::from(tr.rotation_quarter_turns != 0);
                }
                None => assert_eq!(w[1].dir, w[0].dir),
            }
        }
    }
    assert!(turned > 0);
    let mg = motor_graph(&tracer, trajs.clone());
    eprintln!(
        "trajectories {} junctions {} crossings {} capped {}",
        mg.trajectories.len(),
        mg.junctions.len(),
        mg.xings.len(),
        mg.capped()
    );
    check_graph(&mg, 5);
    for seed in 0..3 {
        assert!(motor_graph(&tracer, shuffled(&trajs, seed)) == mg);
    }
    assert_eq!(mg.capped(), 0);
    let tm = extract_patches(&mg, topo, &imm).unwrap();
    let surface: f64 = (0..topo.n_faces())
        .map(|f| {
            let z = imm.face(f);
            0.5 * ((z[1] - z[0]).conj() * (z[2] - z[0])).im
        })
        .sum();
    let mismatch = tm.patches.iter().map(|p| p.mismatch).fold(0.0, f64::max);
    let closure = tm.patches.iter().map(|p| p.closure).fold(0.0, f64::max);
    eprintln!(
        "patches {} area {:.9} surface {:.9} rel {:.2e} rectangles rel {:.2e} side mismatch {:.2e} closure {:.2e}",
        tm.patches.len(),
        tm.total_area(),
        surface,
        (tm.total_area() - surface).abs() / surface,
        (tm.rect_area() - surface).abs() / surface,
        mismatch,
        closure
    );
    assert!((tm.total_area() - surface).abs() <= 1e-6 * surface);
    assert!(tm.patches.iter().all(|p| p.area > 0.0));
    // The motor graph cellulates the surface.
    let chi = mg.nodes.len() as i64 - mg.arcs.len() as i64 + tm.patches.len() as i64;
    assert_eq!(chi, -2);
    assert!(tm.max_corner_error() < 1e-6);
    assert!(tm.patches.iter().all(|p| p.width > 0.0 && p.height > 0.0));
    assert!(tm.adjacency.iter().all(|a| a.quarter_turns < 4));

    let json = tm.to_json().unwrap();
    assert_eq!(TMesh::from_json(&json).unwrap(), tm);
    let obj = tm.preview_obj(topo, fx.mesh.positions()).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("g ")).count(), tm.patches.len());
    let empty = TMesh { patches: Vec::new(), ..tm.clone() };
    assert_eq!(empty.to_json().unwrap_err(), TmeshError::EmptyTMesh);
}
