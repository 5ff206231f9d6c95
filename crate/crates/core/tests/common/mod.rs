#![allow(dead_code)]

use quartic::forms::{combined_form, holomorphic_basis, locate_zeros, normalize_basis, FormContext, HarmonicBasis};
use quartic::homology::{homology_basis, TreeCotree};
use quartic::jacobi::{build_lattice, period_matrix, AbelJacobiMap, Divisor};
use quartic::mesh::generate::holed_plate;
use quartic::mesh::{insert_points, SurfaceMesh, SurfacePoint};
use quartic::optimize::{initialize_divisor, optimize_divisor, Objective, OptimizeConfig};
use quartic::ricci::{flow_to_metric, target_curvature, ConeMetric, RicciConfig};

pub struct ConeFixture {
    pub mesh: SurfaceMesh,
    pub divisor: Divisor,
    pub cones: Vec<usize>,
    pub metric: ConeMetric,
}

/// Genus-2 plate carried through divisor optimization and Ricci flow.
pub fn genus_two_cones(resolution: usize) -> ConeFixture {
    let mesh = holed_plate(2, resolution, 10);
    let topo = mesh.topology();
    let lengths = mesh.edge_lengths();
    let basis = homology_basis(topo).unwrap();
    let ctx = FormContext::new(topo, &lengths, 1e-12).unwrap();
    let hb = HarmonicBasis::new(&ctx, &basis, 11).unwrap();
    let nb = normalize_basis(&holomorphic_basis(&hb, &basis).unwrap(), &basis).unwrap();
    let lat = build_lattice(&period_matrix(&nb, &basis).unwrap()).unwrap();
    let cut = TreeCotree::new(topo, 0).cut_mask(topo);
    let map = AbelJacobiMap::new(&ctx, &nb, &cut, &lat).unwrap();
    let phi = combined_form(&nb, &[1.0; 4]).unwrap();
    let reference = locate_zeros(&ctx, &phi, &nb.forms).unwrap().scaled(4);
    let obj = Objective::new(topo, &lengths, &map, &reference);
    let d0 = initialize_divisor(topo, &lengths, None).unwrap();
    let res = optimize_divisor(&obj, &d0, &reference, &OptimizeConfig::default()).unwrap();
    let points: Vec<SurfacePoint> = res.divisor.terms.iter().map(|t| t.point).collect();
    let refined = insert_points(&mesh, &points, 1e-6, 1e-3).unwrap();
    let rt = refined.mesh.topology();
    let target = target_curvature(rt, &refined.point_vertex, &res.divisor).unwrap();
    let metric = flow_to_metric(rt, &refined.mesh.edge_lengths(), &target, &RicciConfig::default()).unwrap();
    ConeFixture { mesh: refined.mesh, divisor: res.divisor, cones: refined.point_vertex, metric }
}
