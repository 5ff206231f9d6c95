//! Procedural test surfaces: icosahedron, tori, and smoothed voxel plates of
//! arbitrary genus.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::SurfaceMesh;

pub fn icosahedron() -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let positions = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    SurfaceMesh::new(positions, faces).expect("icosahedron is valid")
}

fn grid_faces(n: usize, m: usize) -> Vec<[usize; 3]> {
    let id = |i: usize, j: usize| (i % n) * m + (j % m);
    let mut faces = Vec::with_capacity(2 * n * m);
    for i in 0..n {
        for j in 0..m {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    faces
}

/// Torus of revolution with `n` segments around the axis and `m` around the tube.
pub fn torus(n: usize, m: usize, major: f64, minor: f64) -> SurfaceMesh {
    let mut positions = Vec::with_capacity(n * m);
    for i in 0..n {
        let u = 2.0 * PI * i as f64 / n as f64;
        for j in 0..m {
            let v = 2.0 * PI * j as f64 / m as f64;
            let r = major + minor * v.cos();
            positions.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    SurfaceMesh::new(positions, grid_faces(n, m)).expect("torus grid is valid")
}

/// Torus grid carrying the flat metric of a `width × height` rectangle:
/// returns the embedded mesh (for connectivity and export) and per-edge
/// lengths of the flat metric.
pub fn flat_torus(n: usize, m: usize, width: f64, height: f64) -> (SurfaceMesh, Vec<f64>) {
    let mesh = torus(n, m, 3.0, 1.0);
    let topo = mesh.topology();
    let (du, dv) = (width / n as f64, height / m as f64);
    let lengths = (0..topo.n_edges())
        .map(|e| {
            let h = topo.edge_halfedge(e);
            let (a, b) = (topo.origin(h), topo.target(h));
            let di = ((b / m + n - a / m) % n).min((a / m + n - b / m) % n);
            let dj = ((b % m + m - a % m) % m).min((a % m + m - b % m) % m);
            ((di as f64 * du).powi(2) + (dj as f64 * dv).powi(2)).sqrt()
        })
        .collect();
    (mesh, lengths)
}

/// Surface of a one-voxel-thick plate with `genus` square holes, each voxel
/// face subdivided `resolution × resolution`, then Taubin-smoothed.
pub fn holed_plate(genus: usize, resolution: usize, smoothing: usize) -> SurfaceMesh {
    let nx = 4 * genus.max(1) + 1;
    let ny = 5;
    let solid = |x: i64, y: i64, z: i64| -> bool {
        if x < 0 || y < 0 || z != 0 || x >= nx as i64 || y >= ny as i64 {
            return false;
        }
        let hole = y == 2 && x % 4 == 2 && (x as usize) < 4 * genus;
        !hole
    };
    let s = resolution as i64;
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |p: [i64; 3], positions: &mut Vec<[f64; 3]>| -> usize {
        *index.entry(p).or_insert_with(|| {
            positions.push([p[0] as f64 / s as f64, p[1] as f64 / s as f64, p[2] as f64 / s as f64]);
            positions.len() - 1
        })
    };
    for x in 0..nx as i64 {
        for y in 0..ny as i64 {
            if !solid(x, y, 0) {
                continue;
            }
            for axis in 0..3 {
                for dir in [-1i64, 1] {
                    let mut nb = [x, y, 0];
                    nb[axis] += dir;
                    if solid(nb[0], nb[1], nb[2]) {
                        continue;
                    }
                    // Quad on the face of the voxel with outward normal dir·e_axis.
                    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                    let mut base = [x * s, y * s, 0];
                    if dir > 0 {
                        base[axis] += s;
                    }
                    for i in 0..s {
                        for j in 0..s {
                            let corner = |di: i64, dj: i64| {
                                let mut p = base;
                                p[u] += i + di;
                                p[v] += j + dj;
                                p
                            };
                            let mut q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                            if dir < 0 {
                                q.reverse();
                            }
                            let id: Vec<usize> = q.iter().map(|&p| vid(p, &mut positions)).collect();
                            if (i + j) % 2 == 0 {
                                faces.push([id[0], id[1], id[2]]);
                                faces.push([id[0], id[2], id[3]]);
                            } else {
                                faces.push([id[0], id[1], id[3]]);
                                faces.push([id[1], id[2], id[3]]);
                            }
                        }
                    }
                }
            }
        }
    }
    let mesh = SurfaceMesh::new(positions, faces).expect("voxel plate is a closed manifold");
    taubin_smooth(&mesh, smoothing, 0.5, -0.53)
}

/// Taubin λ|μ smoothing with uniform Laplacian weights.
pub fn taubin_smooth(mesh: &SurfaceMesh, iterations: usize, lambda: f64, mu: f64) -> SurfaceMesh {
    let topo = mesh.topology();
    let mut p = mesh.positions().to_vec();
    for _ in 0..iterations {
        for factor in [lambda, mu] {
            let q = p.clone();
            for v in 0..topo.n_vertices() {
                let mut avg = [0.0; 3];
                let mut n = 0.0;
                for w in topo.neighbours(v) {
                    for d in 0..3 {
                        avg[d] += q[w][d];
                    }
                    n += 1.0;
                }
                for d in 0..3 {
                    p[v][d] = q[v][d] + factor * (avg[d] / n - q[v][d]);
                }
            }
        }
    }
    SurfaceMesh::from_parts(topo.clone(), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_genus() {
        let ico = icosahedron();
        assert_eq!((ico.n_vertices(), ico.n_edges(), ico.n_faces()), (12, 30, 20));
        assert_eq!(ico.euler_characteristic(), 2);
        let t = torus(16, 16, 3.0, 1.0);
        assert_eq!(t.euler_characteristic(), 0);
        assert_eq!(t.genus(), 1);
        for g in 1..=3 {
            assert_eq!(holed_plate(g, 1, 0).genus(), g);
        }
    }

    #[test]
    fn flat_torus_is_flat() {
        let (mesh, l) = flat_torus(6, 4, 1.0, 1.0);
        let k = super::super::angle_defect(mesh.topology(), &l).unwrap();
        assert!(k.iter().all(|x| x.abs() < 1e-12));
    }
}
