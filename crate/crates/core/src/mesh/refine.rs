//! Insert surface points as new vertices by 1-to-3 face splits.
//!
//! Original edges are never split, so vertex ids and edge paths of the input
//! survive unchanged; only faces are renumbered.

use num_complex::Complex64;

use super::{face_chart, MeshError, SurfaceMesh, SurfacePoint};

#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: SurfaceMesh,
    /// Vertex carrying each input point.
    pub point_vertex: Vec<usize>,
    /// Distance in the face plane between each input point and its vertex.
    pub displacement: Vec<f64>,
    /// Input face containing each output face.
    pub face_parent: Vec<usize>,
}

/// Insert each point as a vertex. A point within `snap` (barycentric) of a
/// corner reuses that corner; otherwise barycentric weights are clamped to at
/// least `edge_margin` so no point lands on an edge.
pub fn insert_points(
    mesh: &SurfaceMesh,
    points: &[SurfacePoint],
    snap: f64,
    edge_margin: f64,
) -> Result<Refinement, MeshError> {
    let topo = mesh.topology();
    let lengths = mesh.edge_lengths();
    let mut positions = mesh.positions().to_vec();
    let mut faces: Vec<[usize; 3]> = topo.faces().to_vec();
    let mut face_parent: Vec<usize> = (0..faces.len()).collect();
    let mut charts: Vec<[Complex64; 3]> =
        (0..faces.len()).map(|f| face_chart(topo, &lengths, f)).collect();
    let mut children: Vec<Vec<usize>> = (0..faces.len()).map(|f| vec![f]).collect();
    let mut point_vertex = Vec::with_capacity(points.len());
    let mut displacement = Vec::with_capacity(points.len());

    for p in points {
        let parent_chart = face_chart(topo, &lengths, p.face);
        let z = p.in_chart(&parent_chart);
        let (cur, bary) = children[p.face]
            .iter()
            .map(|&c| (c, SurfacePoint::bary_in_chart(&charts[c], z)))
            .max_by(|a, b| min3(a.1).total_cmp(&min3(b.1)))
            .expect("every face has a child");
        let tri = faces[cur];
        if let Some(k) = (0..3).find(|&k| bary[k] >= 1.0 - snap) {
            point_vertex.push(tri[k]);
            displacement.push((charts[cur][k] - z).norm());
            continue;
        }
        let mut b = bary.map(|x| x.max(edge_margin));
        let s: f64 = b.iter().sum();
        b.iter_mut().for_each(|x| *x /= s);
        let cz = charts[cur];
        let w = cz[0] * b[0] + cz[1] * b[1] + cz[2] * b[2];
        displacement.push((w - z).norm());
        let n = positions.len();
        let mut pos = [0.0; 3];
        for k in 0..3 {
            for d in 0..3 {
                pos[d] += b[k] * positions[tri[k]][d];
            }
        }
        positions.push(pos);
        point_vertex.push(n);
        let (f1, f2) = (faces.len(), faces.len() + 1);
        faces[cur] = [tri[0], tri[1], n];
        faces.push([tri[1], tri[2], n]);
        faces.push([tri[2], tri[0], n]);
        charts[cur] = [cz[0], cz[1], w];
        charts.push([cz[1], cz[2], w]);
        charts.push([cz[2], cz[0], w]);
        face_parent.push(p.face);
        face_parent.push(p.face);
        children[p.face].push(f1);
        children[p.face].push(f2);
    }
    let mesh = SurfaceMesh::new(positions, faces)?;
    Ok(Refinement { mesh, point_vertex, displacement, face_parent })
}

fn min3(b: [f64; 3]) -> f64 {
    b[0].min(b[1]).min(b[2])
}
