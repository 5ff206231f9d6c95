//! Curves on the 1-skeleton, stored as halfedge sequences.

use serde::{Deserialize, Serialize};

use super::Topology;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    HomologyA(usize),
    HomologyB(usize),
    Cut,
    ShortestPath(usize),
    Other,
}

impl CurveKind {
    pub fn from_tag(tag: &str) -> Self {
        let index = |s: &str| s.parse::<usize>().ok().filter(|&k| k > 0);
        if tag == "cut" {
            CurveKind::Cut
        } else if let Some(k) = tag.strip_prefix("gamma").and_then(index) {
            CurveKind::ShortestPath(k)
        } else if let Some(k) = tag.strip_prefix('a').and_then(index) {
            CurveKind::HomologyA(k)
        } else if let Some(k) = tag.strip_prefix('b').and_then(index) {
            CurveKind::HomologyB(k)
        } else {
            CurveKind::Other
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curve {
    pub tag: String,
    pub halfedges: Vec<usize>,
}

impl Curve {
    pub fn new(tag: impl Into<String>, halfedges: Vec<usize>) -> Self {
        Curve { tag: tag.into(), halfedges }
    }

    pub fn kind(&self) -> CurveKind {
        CurveKind::from_tag(&self.tag)
    }

    pub fn is_closed(&self, topo: &Topology) -> bool {
        match (self.halfedges.first(), self.halfedges.last()) {
            (Some(&f), Some(&l)) => topo.origin(f) == topo.target(l),
            _ => false,
        }
    }

    /// Consecutive halfedges must chain head to tail.
    pub fn is_connected(&self, topo: &Topology) -> bool {
        self.halfedges.windows(2).all(|w| topo.target(w[0]) == topo.origin(w[1]))
    }

    pub fn vertices<'a>(&'a self, topo: &'a Topology) -> impl Iterator<Item = usize> + 'a {
        self.halfedges.iter().map(move |&h| topo.origin(h))
    }
}

/// A tagged collection of curves. Serialized as `{"loops": [...]}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveGraph {
    pub loops: Vec<Curve>,
}

impl CurveGraph {
    pub fn new(loops: Vec<Curve>) -> Self {
        CurveGraph { loops }
    }

    pub fn is_empty(&self) -> bool {
        self.loops.iter().all(|c| c.halfedges.is_empty())
    }

    pub fn get(&self, tag: &str) -> Option<&Curve> {
        self.loops.iter().find(|c| c.tag == tag)
    }

    /// Per-edge membership flags.
    pub fn edge_mask(&self, topo: &Topology) -> Vec<bool> {
        let mut mask = vec![false; topo.n_edges()];
        for c in &self.loops {
            for &h in &c.halfedges {
                mask[topo.edge(h)] = true;
            }
        }
        mask
    }

    /// Per-vertex membership flags.
    pub fn vertex_mask(&self, topo: &Topology) -> Vec<bool> {
        let mut mask = vec![false; topo.n_vertices()];
        for c in &self.loops {
            for &h in &c.halfedges {
                mask[topo.origin(h)] = true;
                mask[topo.target(h)] = true;
            }
        }
        mask
    }

    /// Every curve chains, and curves tagged as homology loops close up.
    pub fn validate(&self, topo: &Topology) -> Result<(), String> {
        for c in &self.loops {
            if c.halfedges.iter().any(|&h| h >= topo.n_halfedges()) {
                return Err(format!("curve {} references a missing halfedge", c.tag));
            }
            if !c.is_connected(topo) {
                return Err(format!("curve {} is not connected", c.tag));
            }
            let needs_closed = matches!(c.kind(), CurveKind::HomologyA(_) | CurveKind::HomologyB(_));
            if needs_closed && !c.is_closed(topo) {
                return Err(format!("loop {} does not close", c.tag));
            }
        }
        Ok(())
    }

    /// Decompose an edge set into maximal chains between branch vertices,
    /// each tagged `tag`. Isolated cycles start at their smallest vertex.
    pub fn from_edge_set(topo: &Topology, mask: &[bool], tag: &str) -> Self {
        let nv = topo.n_vertices();
        let mut degree = vec![0usize; nv];
        for e in 0..topo.n_edges() {
            if mask[e] {
                let h = topo.edge_halfedge(e);
                degree[topo.origin(h)] += 1;
                degree[topo.target(h)] += 1;
            }
        }
        let mut used = vec![false; topo.n_edges()];
        let mut loops = Vec::new();
        let walk = |start: usize, used: &mut Vec<bool>, loops: &mut Vec<Curve>| {
            for h0 in topo.outgoing(start) {
                if !mask[topo.edge(h0)] || used[topo.edge(h0)] {
                    continue;
                }
                let mut chain = vec![h0];
                used[topo.edge(h0)] = true;
                let mut v = topo.target(h0);
                while degree[v] == 2 && v != start {
                    let h = topo
                        .outgoing(v)
                        .find(|&h| mask[topo.edge(h)] && !used[topo.edge(h)])
                        .expect("degree-2 chain continues");
                    used[topo.edge(h)] = true;
                    chain.push(h);
                    v = topo.target(h);
                }
                loops.push(Curve::new(tag, chain));
            }
        };
        for v in 0..nv {
            if degree[v] > 0 && degree[v] != 2 {
                walk(v, &mut used, &mut loops);
            }
        }
        for v in 0..nv {
            if degree[v] == 2 {
                walk(v, &mut used, &mut loops);
            }
        }
        CurveGraph { loops }
    }
}
