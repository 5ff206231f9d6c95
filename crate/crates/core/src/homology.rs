//! Tree-cotree generators, algebraic intersection numbers, and symplectic
//! canonicalization of a homology basis.
//!
//! Intersections are counted against a left pushoff: the second loop is moved
//! off the 1-skeleton into the faces on its left, so it crosses edges only
//! transversally and only near its own vertices. The resulting dual cochain
//! pairs with any edge loop by summation.

use std::collections::VecDeque;

use thiserror::Error;

use crate::mesh::{Curve, CurveGraph, CurveKind, Topology};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HomologyError {
    #[error("genus zero surfaces carry no holomorphic 1-forms")]
    GenusZeroUnsupported,
    #[error("loops span a rank {rank} sublattice, need {expected}")]
    DeficientBasis { rank: usize, expected: usize },
    #[error("loops span a sublattice of index {det}")]
    NonUnimodular { det: i64 },
    #[error("curve {0} is not a closed edge loop")]
    NotClosed(String),
    #[error("basis violates the intersection condition: {0}")]
    NotCanonical(String),
}

/// Spanning tree, dual spanning cotree and the leftover generator edges.
#[derive(Clone, Debug)]
pub struct TreeCotree {
    pub root: usize,
    /// Halfedge from parent to each vertex (`None` at the root).
    pub parent: Vec<Option<usize>>,
    pub in_tree: Vec<bool>,
    pub in_cotree: Vec<bool>,
    /// Edges in neither tree; there are exactly 2g of them.
    pub generators: Vec<usize>,
}

impl TreeCotree {
    pub fn new(topo: &Topology, root: usize) -> Self {
        let nv = topo.n_vertices();
        let mut parent = vec![None; nv];
        let mut in_tree = vec![false; topo.n_edges()];
        let mut seen = vec![false; nv];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for h in topo.outgoing(v) {
                let w = topo.target(h);
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(h);
                    in_tree[topo.edge(h)] = true;
                    queue.push_back(w);
                }
            }
        }
        let nf = topo.n_faces();
        let mut in_cotree = vec![false; topo.n_edges()];
        let mut fseen = vec![false; nf];
        fseen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(f) = queue.pop_front() {
            for k in 0..3 {
                let h = 3 * f + k;
                let e = topo.edge(h);
                if in_tree[e] {
                    continue;
                }
                let g = topo.face_of(topo.twin(h));
                if !fseen[g] {
                    fseen[g] = true;
                    in_cotree[e] = true;
                    queue.push_back(g);
                }
            }
        }
        let generators = (0..topo.n_edges()).filter(|&e| !in_tree[e] && !in_cotree[e]).collect();
        TreeCotree { root, parent, in_tree, in_cotree, generators }
    }

    /// Tree path from the root to `v` as halfedges.
    pub fn path_from_root(&self, topo: &Topology, v: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut w = v;
        while let Some(h) = self.parent[w] {
            path.push(h);
            w = topo.origin(h);
        }
        path.reverse();
        path
    }

    /// Loop through the root closed by generator edge `e`.
    pub fn generator_loop(&self, topo: &Topology, e: usize) -> Vec<usize> {
        let h = topo.edge_halfedge(e);
        let mut l = self.path_from_root(topo, topo.origin(h));
        l.push(h);
        l.extend(reverse_path(topo, &self.path_from_root(topo, topo.target(h))));
        reduce_path(topo, &l)
    }

    pub fn generator_loops(&self, topo: &Topology) -> Vec<Vec<usize>> {
        self.generators.iter().map(|&e| self.generator_loop(topo, e)).collect()
    }

    /// Tree plus generators, with dangling tree branches pruned.
    pub fn cut_mask(&self, topo: &Topology) -> Vec<bool> {
        let mut mask: Vec<bool> = (0..topo.n_edges())
            .map(|e| self.in_tree[e] || (!self.in_cotree[e]))
            .collect();
        let mut degree = vec![0usize; topo.n_vertices()];
        for e in 0..topo.n_edges() {
            if mask[e] {
                let h = topo.edge_halfedge(e);
                degree[topo.origin(h)] += 1;
                degree[topo.target(h)] += 1;
            }
        }
        let mut stack: Vec<usize> = (0..topo.n_vertices()).filter(|&v| degree[v] == 1).collect();
        while let Some(v) = stack.pop() {
            if degree[v] != 1 {
                continue;
            }
            let h = topo.outgoing(v).find(|&h| mask[topo.edge(h)]).expect("degree one");
            mask[topo.edge(h)] = false;
            degree[v] = 0;
            let w = topo.target(h);
            degree[w] -= 1;
            if degree[w] == 1 {
                stack.push(w);
            }
        }
        mask
    }
}

pub fn reverse_path(topo: &Topology, path: &[usize]) -> Vec<usize> {
    path.iter().rev().map(|&h| topo.twin(h)).collect()
}

/// Cancel immediate backtracks `h, twin(h)` (endpoints are kept).
pub fn reduce_path(topo: &Topology, path: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(path.len());
    for &h in path {
        if out.last() == Some(&topo.twin(h)) {
            out.pop();
        } else {
            out.push(h);
        }
    }
    out
}

/// Cut graph of a closed mesh as chains tagged `cut`.
pub fn compute_cut_graph(topo: &Topology) -> CurveGraph {
    let tc = TreeCotree::new(topo, 0);
    CurveGraph::from_edge_set(topo, &tc.cut_mask(topo), "cut")
}

/// Faces crossed by the left pushoff of a closed loop, as the halfedges it
/// crosses (each crossing goes from `face(c)` into `face(twin(c))`).
pub fn pushoff_crossings(topo: &Topology, lp: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..lp.len() {
        let (h_in, h_out) = (lp[i], lp[(i + 1) % lp.len()]);
        let mut c = topo.next(h_in);
        while c != h_out {
            out.push(c);
            c = topo.next(topo.twin(c));
        }
    }
    out
}

/// Dual cochain of the left pushoff of `y`: `x·y = Σ_{h ∈ x} η(h)`.
pub fn pushoff_cochain(topo: &Topology, y: &[usize]) -> Vec<i64> {
    let mut eta = vec![0i64; topo.n_halfedges()];
    for c in pushoff_crossings(topo, y) {
        eta[c] -= 1;
        eta[topo.twin(c)] += 1;
    }
    eta
}

fn check_closed(topo: &Topology, lp: &[usize], tag: &str) -> Result<(), HomologyError> {
    let c = Curve::new(tag, lp.to_vec());
    if lp.is_empty() || !c.is_connected(topo) || !c.is_closed(topo) {
        return Err(HomologyError::NotClosed(tag.to_string()));
    }
    Ok(())
}

/// Algebraic intersection number `x·y` of two closed edge loops.
pub fn intersection_number(topo: &Topology, x: &[usize], y: &[usize]) -> Result<i64, HomologyError> {
    check_closed(topo, x, "x")?;
    check_closed(topo, y, "y")?;
    let eta = pushoff_cochain(topo, y);
    Ok(x.iter().map(|&h| eta[h]).sum())
}

pub fn intersection_matrix(topo: &Topology, loops: &[Vec<usize>]) -> Vec<Vec<i64>> {
    let cochains: Vec<Vec<i64>> = loops.iter().map(|l| pushoff_cochain(topo, l)).collect();
    loops
        .iter()
        .map(|x| cochains.iter().map(|eta| x.iter().map(|&h| eta[h]).sum()).collect())
        .collect()
}

/// Canonical basis: `a[i]·b[j] = δ_ij`, all other pairings zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomologyBasis {
    pub base: usize,
    pub a: Vec<Vec<usize>>,
    pub b: Vec<Vec<usize>>,
}

impl HomologyBasis {
    pub fn genus(&self) -> usize {
        self.a.len()
    }

    /// Loops in the order a1..ag, b1..bg.
    pub fn loops(&self) -> Vec<Vec<usize>> {
        self.a.iter().chain(&self.b).cloned().collect()
    }

    pub fn tags(&self) -> Vec<String> {
        let g = self.genus();
        (1..=g).map(|k| format!("a{k}")).chain((1..=g).map(|k| format!("b{k}"))).collect()
    }

    pub fn to_curve_graph(&self) -> CurveGraph {
        CurveGraph::new(
            self.tags()
                .into_iter()
                .zip(self.loops())
                .map(|(t, l)| Curve::new(t, l))
                .collect(),
        )
    }

    /// Rebuild from tagged loops and verify the intersection condition.
    pub fn from_curve_graph(topo: &Topology, cg: &CurveGraph) -> Result<Self, HomologyError> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for c in &cg.loops {
            match c.kind() {
                CurveKind::HomologyA(k) => a.push((k, c.halfedges.clone())),
                CurveKind::HomologyB(k) => b.push((k, c.halfedges.clone())),
                _ => {}
            }
        }
        a.sort();
        b.sort();
        let basis = HomologyBasis {
            base: a.first().map(|(_, l)| topo.origin(l[0])).unwrap_or(0),
            a: a.into_iter().map(|x| x.1).collect(),
            b: b.into_iter().map(|x| x.1).collect(),
        };
        basis.verify(topo)?;
        Ok(basis)
    }

    pub fn verify(&self, topo: &Topology) -> Result<(), HomologyError> {
        let loops = self.loops();
        for (l, t) in loops.iter().zip(self.tags()) {
            check_closed(topo, l, &t)?;
        }
        let m = intersection_matrix(topo, &loops);
        if m != standard_symplectic(self.genus()) {
            return Err(HomologyError::NotCanonical(format!("{m:?}")));
        }
        Ok(())
    }
}

/// `[[0, I], [−I, 0]]` in the a1..ag, b1..bg ordering.
pub fn standard_symplectic(g: usize) -> Vec<Vec<i64>> {
    let mut m = vec![vec![0i64; 2 * g]; 2 * g];
    for i in 0..g {
        m[i][g + i] = 1;
        m[g + i][i] = -1;
    }
    m
}

/// Rank over the rationals and determinant of an integer matrix.
fn rank_and_det(m: &[Vec<i64>]) -> (usize, i64) {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    let mut rank = 0;
    let mut det = 1.0;
    for col in 0..n {
        let p = (rank..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()));
        let Some(p) = p.filter(|&p| a[p][col].abs() > 1e-9) else {
            det = 0.0;
            continue;
        };
        a.swap(rank, p);
        if rank != p {
            det = -det;
        }
        det *= a[rank][col];
        for i in rank + 1..n {
            let f = a[i][col] / a[rank][col];
            for j in col..n {
                a[i][j] -= f * a[rank][j];
            }
        }
        rank += 1;
    }
    (rank, det.round() as i64)
}

fn form(m: &[Vec<i64>], u: &[i64], v: &[i64]) -> i64 {
    let n = m.len();
    let mut s = 0;
    for i in 0..n {
        if u[i] == 0 {
            continue;
        }
        for j in 0..n {
            s += u[i] * m[i][j] * v[j];
        }
    }
    s
}

fn axpy(y: &mut [i64], a: i64, x: &[i64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Integer coefficients (over the raw loops) of a symplectic basis
/// `(a_1..a_g, b_1..b_g)` for the form `m`.
pub fn symplectic_coefficients(m: &[Vec<i64>]) -> Result<(Vec<Vec<i64>>, Vec<Vec<i64>>), HomologyError> {
    let n = m.len();
    let (rank, det) = rank_and_det(m);
    if rank < n || n % 2 == 1 {
        return Err(HomologyError::DeficientBasis { rank, expected: n + n % 2 });
    }
    if det.abs() != 1 {
        return Err(HomologyError::NonUnimodular { det: det.abs() });
    }
    let mut rest: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            let mut e = vec![0; n];
            e[i] = 1;
            e
        })
        .collect();
    let (mut av, mut bv) = (Vec::new(), Vec::new());
    while !rest.is_empty() {
        let a = rest.remove(0);
        loop {
            let nz: Vec<usize> = (0..rest.len()).filter(|&k| form(m, &a, &rest[k]) != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            let pivot = *nz.iter().min_by_key(|&&k| form(m, &a, &rest[k]).abs()).unwrap();
            let pv = form(m, &a, &rest[pivot]);
            let pivot_vec = rest[pivot].clone();
            for &k in &nz {
                if k != pivot {
                    let q = form(m, &a, &rest[k]) / pv;
                    axpy(&mut rest[k], -q, &pivot_vec);
                }
            }
        }
        let k = (0..rest.len())
            .find(|&k| form(m, &a, &rest[k]) != 0)
            .ok_or(HomologyError::NonUnimodular { det: 0 })?;
        let mut b = rest.remove(k);
        match form(m, &a, &b) {
            1 => {}
            -1 => b.iter_mut().for_each(|x| *x = -*x),
            d => return Err(HomologyError::NonUnimodular { det: d.abs() }),
        }
        for w in rest.iter_mut() {
            let (wa, wb) = (form(m, w, &a), form(m, w, &b));
            axpy(w, -wb, &a);
            axpy(w, wa, &b);
        }
        av.push(a);
        bv.push(b);
    }
    Ok((av, bv))
}

/// Edge loop realizing `Σ c_k loops_k`, all loops based at the same vertex.
pub fn combine_loops(topo: &Topology, loops: &[Vec<usize>], coeffs: &[i64]) -> Vec<usize> {
    let mut path = Vec::new();
    for (l, &c) in loops.iter().zip(coeffs) {
        let piece = if c < 0 { reverse_path(topo, l) } else { l.clone() };
        for _ in 0..c.unsigned_abs() {
            path.extend_from_slice(&piece);
        }
    }
    reduce_path(topo, &path)
}

/// Turn 2g loops spanning H_1 into a canonical basis based at `tc.root`.
pub fn canonicalize_basis(
    topo: &Topology,
    tc: &TreeCotree,
    raw: &[Vec<usize>],
) -> Result<HomologyBasis, HomologyError> {
    let mut rooted = Vec::with_capacity(raw.len());
    for (i, l) in raw.iter().enumerate() {
        check_closed(topo, l, &format!("raw{i}"))?;
        let stem = tc.path_from_root(topo, topo.origin(l[0]));
        let mut p = stem.clone();
        p.extend_from_slice(l);
        p.extend(reverse_path(topo, &stem));
        rooted.push(reduce_path(topo, &p));
    }
    let m = intersection_matrix(topo, &rooted);
    let (ca, cb) = symplectic_coefficients(&m)?;
    let basis = HomologyBasis {
        base: tc.root,
        a: ca.iter().map(|c| combine_loops(topo, &rooted, c)).collect(),
        b: cb.iter().map(|c| combine_loops(topo, &rooted, c)).collect(),
    };
    basis.verify(topo)?;
    Ok(basis)
}

/// Canonical homology basis from tree-cotree generators rooted at vertex 0.
pub fn homology_basis(topo: &Topology) -> Result<HomologyBasis, HomologyError> {
    if topo.genus() == 0 {
        return Err(HomologyError::GenusZeroUnsupported);
    }
    let tc = TreeCotree::new(topo, 0);
    canonicalize_basis(topo, &tc, &tc.generator_loops(topo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symplectic_on_permuted_form() {
        // b1, a1 order with a2, b2 swapped: still unimodular
        let m = vec![
            vec![0, -1, 0, 0],
            vec![1, 0, 0, 0],
            vec![0, 0, 0, -1],
            vec![0, 0, 1, 0],
        ];
        let (a, b) = symplectic_coefficients(&m).unwrap();
        let all: Vec<Vec<i64>> = a.iter().chain(&b).cloned().collect();
        let got: Vec<Vec<i64>> = all.iter().map(|u| all.iter().map(|v| form(&m, u, v)).collect()).collect();
        assert_eq!(got, standard_symplectic(2));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let m = vec![vec![0, 0], vec![0, 0]];
        assert_eq!(
            symplectic_coefficients(&m),
            Err(HomologyError::DeficientBasis { rank: 0, expected: 2 })
        );
        let m = vec![vec![0, 2], vec![-2, 0]];
        assert_eq!(symplectic_coefficients(&m), Err(HomologyError::NonUnimodular { det: 4 }));
    }
}
