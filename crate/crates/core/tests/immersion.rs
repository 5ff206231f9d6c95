mod common;

use std::f64::consts::PI;

use num_complex::Complex64;

use quartic::homology::compute_cut_graph;
use quartic::immersion::{augment_cut_graph, checkerboard_obj, flatten, ImmersionError};
use quartic::mesh::generate::flat_torus;
use quartic::mesh::{CurveGraph, Topology};

fn min_image(d: isize, n: usize) -> f64 {
    let n = n as isize;
    let d = d.rem_euclid(n);
    (if d > n / 2 { d - n } else { d }) as f64
}

#[test]
fn flat_torus_develops_to_a_rectangle() {
    let (n, m, w, h) = (12, 8, 1.7, 1.1);
    let (mesh, lengths) = flat_torus(n, m, w, h);
    let topo = mesh.topology();
    let cut = compute_cut_graph(topo);
    let aug = augment_cut_graph(topo, &lengths, &cut, &[]).unwrap();
    assert_eq!(aug, cut);
    let imm = flatten(topo, &lengths, &aug.edge_mask(topo), &[], 0).unwrap();
    assert!(imm.max_length_error(topo, &lengths) < 1e-12);
    assert_eq!(imm.foldovers, 0);
    // Frame of the seed face relative to grid coordinates.
    let grid = |v: usize| ((v / m) as isize, (v % m) as isize);
    let [v0, v1, _] = topo.face(0);
    let (g0, g1) = (grid(v0), grid(v1));
    let dg = Complex64::new(min_image(g1.0 - g0.0, n) * w / n as f64, min_image(g1.1 - g0.1, m) * h / m as f64);
    let frame = (imm.corners[1] - imm.corners[0]) / dg;
    assert!((frame.norm() - 1.0).abs() < 1e-12);
    let mut count = 0;
    for t in imm.edge_transitions(topo) {
        assert_eq!(t.rotation_quarter_turns, 0);
        assert!(t.quantization_error() < 1e-9);
        let tau = Complex64::new(t.translation[0], t.translation[1]) / frame;
        let (a, b) = (tau.re / w, tau.im / h);
        assert!((a - a.round()).abs() < 1e-9 && (b - b.round()).abs() < 1e-9, "{tau}");
        assert!(a.round() != 0.0 || b.round() != 0.0);
        count += 1;
    }
    assert_eq!(count, aug.edge_mask(topo).iter().filter(|c| **c).count());
}

#[test]
fn cone_next_to_cut_takes_one_edge() {
    let (mesh, lengths) = flat_torus(10, 10, 1.0, 1.0);
    let topo = mesh.topology();
    let cut = compute_cut_graph(topo);
    let on = cut.vertex_mask(topo);
    let v = (0..topo.n_vertices()).find(|&v| !on[v] && topo.neighbours(v).any(|w| on[w])).unwrap();
    let aug = augment_cut_graph(topo, &lengths, &cut, &[v]).unwrap();
    let gamma = aug.get("gamma1").unwrap();
    assert_eq!(gamma.halfedges.len(), 1);
    assert_eq!(topo.origin(gamma.halfedges[0]), v);
}

#[test]
fn interior_cone_is_rejected() {
    let (mesh, lengths) = flat_torus(10, 10, 1.0, 1.0);
    let topo = mesh.topology();
    let cut = compute_cut_graph(topo);
    let on = cut.vertex_mask(topo);
    let v = (0..topo.n_vertices()).find(|&v| !on[v]).unwrap();
    assert_eq!(flatten(topo, &lengths, &cut.edge_mask(topo), &[v], 0).unwrap_err(), ImmersionError::InteriorCone(v));
    let not_cut = vec![false; topo.n_edges()];
    assert!(matches!(flatten(topo, &lengths, &not_cut, &[], 0), Err(ImmersionError::NotDisk(_))));
}

fn path_vertices(topo: &Topology, g: &CurveGraph, tag: &str) -> Vec<usize> {
    let c = g.get(tag).unwrap();
    let mut vs: Vec<usize> = c.halfedges.iter().map(|&h| topo.origin(h)).collect();
    vs.extend(c.halfedges.last().map(|&h| topo.target(h)));
    vs
}

#[test]
fn genus_two_immersion() {
    let fx = common::genus_two_cones(5);
    let m = &fx.metric;
    let topo = &m.topo;
    let lengths = m.lengths();
    let cut = compute_cut_graph(topo);
    let aug = augment_cut_graph(topo, &lengths, &cut, &fx.cones).unwrap();
    // Paths are vertex-disjoint apart from where they meet the cut.
    let on_cut = cut.vertex_mask(topo);
    let sets: Vec<Vec<usize>> = (1..=8).map(|i| path_vertices(topo, &aug, &format!("gamma{i}"))).collect();
    for i in 0..8 {
        for j in i + 1..8 {
            for v in &sets[i] {
                assert!(!sets[j].contains(v) || on_cut[*v], "gamma{} and gamma{} share {v}", i + 1, j + 1);
            }
        }
    }
    let mask = aug.edge_mask(topo);
    let imm = flatten(topo, &lengths, &mask, &fx.cones, 0).unwrap();
    assert!(imm.max_length_error(topo, &lengths) <= 1e-9);
    let q = imm.max_quantization_error(topo);
    eprintln!("max transition quantization error {q:.4}°");
    assert!(q < 0.5);
    // Interior vertices close up to 2π; cone copies on the boundary sum to
    // the cone angle.
    let sums = imm.image_angle_sums(topo);
    let cut_vertex = aug.vertex_mask(topo);
    for v in 0..topo.n_vertices() {
        if !cut_vertex[v] {
            assert!((sums[v] - 2.0 * PI).abs() < 1e-8);
        }
    }
    for &v in &fx.cones {
        assert!((sums[v] - 2.5 * PI).abs() < 1e-8);
    }
    // Across every cut edge the two copies match by the recorded motion.
    for t in imm.edge_transitions(topo) {
        let h = t.halfedge;
        let tw = topo.twin(h);
        assert!((t.apply(imm.corners[topo.next(tw)]) - imm.corners[h]).norm() < 1e-9);
        assert!((t.apply(imm.corners[tw]) - imm.corners[topo.next(h)]).norm() < 1e-9);
    }
    // Another seed face changes the layout by one rigid motion.
    let other = flatten(topo, &lengths, &mask, &fx.cones, topo.n_faces() / 2).unwrap();
    let rot = (other.corners[1] - other.corners[0]) / (imm.corners[1] - imm.corners[0]);
    assert!((rot.norm() - 1.0).abs() < 1e-9);
    let shift = other.corners[0] - rot * imm.corners[0];
    let dev = imm.corners.iter().zip(&other.corners).map(|(a, b)| (rot * a + shift - b).norm()).fold(0.0, f64::max);
    assert!(dev < 1e-8, "{dev}");

    let positions = fx.mesh.positions();
    assert_eq!(checkerboard_obj(topo, positions, &imm, 0.0).unwrap_err(), ImmersionError::ZeroScale);
    let obj = checkerboard_obj(topo, positions, &imm, 1.0).unwrap();
    let vt: Vec<[f64; 2]> = obj
        .lines()
        .filter_map(|l| l.strip_prefix("vt "))
        .map(|l| {
            let mut it = l.split(' ').map(|x| x.parse::<f64>().unwrap());
            [it.next().unwrap(), it.next().unwrap()]
        })
        .collect();
    assert_eq!(vt.len(), imm.corners.len());
    assert!(vt.iter().zip(&imm.corners).all(|(t, z)| t[0] == z.re && t[1] == z.im));
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), topo.n_faces());
}
