//! Weighted graph Laplacians with one pinned vertex, factored once by sparse
//! Cholesky and solved with iterative refinement.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use thiserror::Error;

use crate::mesh::Topology;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("Laplacian factorization failed (matrix not positive definite)")]
    Factorization,
    #[error("solve stalled at relative residual {0:e}")]
    Residual(f64),
}

/// `L_ii = Σ_j w_ij`, `L_ij = −w_ij`, with row/column `pin` removed.
pub struct PinnedLaplacian {
    n: usize,
    pin: usize,
    /// Off-diagonal entries per vertex: (neighbour, weight).
    rows: Vec<Vec<(usize, f64)>>,
    llt: Llt<usize, f64>,
}

impl PinnedLaplacian {
    pub fn new(topo: &Topology, weights: &[f64], pin: usize) -> Result<Self, SolveError> {
        let n = topo.n_vertices();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in 0..topo.n_edges() {
            let h = topo.edge_halfedge(e);
            let (i, j) = (topo.origin(h), topo.target(h));
            if i != j {
                rows[i].push((j, weights[e]));
                rows[j].push((i, weights[e]));
            }
        }
        let red = |v: usize| if v < pin { v } else { v - 1 };
        let mut trip = Vec::new();
        for i in 0..n {
            if i == pin {
                continue;
            }
            let mut diag = 0.0;
            for &(j, w) in &rows[i] {
                diag += w;
                if j != pin {
                    trip.push(Triplet::new(red(i), red(j), -w));
                }
            }
            trip.push(Triplet::new(red(i), red(i), diag));
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n - 1, n - 1, &trip)
            .map_err(|_| SolveError::Factorization)?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|_| SolveError::Factorization)?;
        Ok(PinnedLaplacian { n, pin, rows, llt })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.rows[i].iter().map(|&(j, w)| w * (x[i] - x[j])).sum())
            .collect()
    }

    /// Solve `L x = b` with `x[pin] = 0`. `b` should sum to zero; the pinned
    /// row absorbs any inconsistency.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>, SolveError> {
        let n = self.n;
        let pin = self.pin;
        let reduce = |v: &[f64]| faer::Col::<f64>::from_fn(n - 1, |k| v[if k < pin { k } else { k + 1 }]);
        let mut x = vec![0.0; n];
        let bnorm = norm_excluding(b, pin).max(f64::MIN_POSITIVE);
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let lx = self.apply(&x);
            let r: Vec<f64> = b.iter().zip(&lx).map(|(bi, li)| bi - li).collect();
            rel = norm_excluding(&r, pin) / bnorm;
            if rel <= tol {
                return Ok(x);
            }
            let dx = self.llt.solve(&reduce(&r));
            for k in 0..n - 1 {
                x[if k < pin { k } else { k + 1 }] += dx[k];
            }
        }
        let lx = self.apply(&x);
        let r: Vec<f64> = b.iter().zip(&lx).map(|(bi, li)| bi - li).collect();
        rel = rel.min(norm_excluding(&r, pin) / bnorm);
        if rel <= tol {
            Ok(x)
        } else {
            Err(SolveError::Residual(rel))
        }
    }
}

fn norm_excluding(v: &[f64], skip: usize) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(i, _)| *i != skip)
        .map(|(_, x)| x * x)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::torus;
    use crate::mesh::cotan_weights;

    #[test]
    fn solves_cotan_poisson() {
        let t = torus(12, 9, 3.0, 1.0);
        let topo = t.topology();
        let w = cotan_weights(topo, &t.edge_lengths()).unwrap();
        let lap = PinnedLaplacian::new(topo, &w, 0).unwrap();
        let truth: Vec<f64> = (0..topo.n_vertices()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let shift = truth[0];
        let b = lap.apply(&truth);
        let x = lap.solve(&b, 1e-12).unwrap();
        for i in 0..x.len() {
            assert!((x[i] - (truth[i] - shift)).abs() < 1e-9);
        }
    }
}
