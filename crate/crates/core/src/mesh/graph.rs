//! Small oriented graphs on element degrees of freedom and their incidence
//! matrices. These are the algebraic substrate for conservative flux
//! recovery.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Connected oriented graph; edges are ordered (tail, head) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl OrientedGraph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Argument("graph needs at least one node".into()));
        }
        for &(a, b) in &edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Argument(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::Argument(format!("self loop at node {a}")));
            }
        }
        let g = OrientedGraph { n_nodes, edges };
        let comps = g.components();
        if comps.len() != 1 {
            return Err(Error::Disconnected(comps));
        }
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Index of the direct edge between two nodes together with the sign of
    /// the queried orientation.
    pub fn edge_index(&self, from: usize, to: usize) -> Option<(usize, f64)> {
        self.edges.iter().enumerate().find_map(|(e, &(a, b))| {
            if (a, b) == (from, to) {
                Some((e, 1.0))
            } else if (a, b) == (to, from) {
                Some((e, -1.0))
            } else {
                None
            }
        })
    }

    /// Incidence matrix: +1 at the tail and -1 at the head of each edge.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_nodes, self.edges.len());
        for (e, &(tail, head)) in self.edges.iter().enumerate() {
            a[(tail, e)] = 1.0;
            a[(head, e)] = -1.0;
        }
        a
    }

    /// Graph Laplacian `L = A A^T`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let a = self.incidence();
        &a * a.transpose()
    }

    /// Connected components by breadth-first traversal.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n_nodes];
        let mut comps = Vec::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            let mut queue = std::collections::VecDeque::from([start]);
            seen[start] = true;
            let mut comp = Vec::new();
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

/// The graph families used by the flux recovery examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementGraphKind {
    /// Three vertices of a triangle, connected in a cycle.
    TriangleP1,
    /// Six Lagrange nodes of a quadratic triangle: vertices 0..3, then edge
    /// midpoints 3 (on edge 0-1), 4 (on 1-2), 5 (on 2-0). Edges run along the
    /// boundary and around the midpoint triangle.
    TriangleP2Lattice,
    /// Nine Lagrange nodes of a cubic quadrilateral element: corners 0..4,
    /// edge nodes 4..8, center 8; twelve directed edges.
    QuadDgP3Lattice,
    /// `K` cells around a mesh node, connected cyclically through the
    /// half-faces between consecutive cells.
    NodeCycle(usize),
}

/// Build one of the catalogued element graphs.
pub fn element_graph(kind: ElementGraphKind) -> Result<OrientedGraph> {
    match kind {
        ElementGraphKind::TriangleP1 => {
            OrientedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)])
        }
        ElementGraphKind::TriangleP2Lattice => OrientedGraph::new(
            6,
            vec![
                (0, 3),
                (0, 5),
                (3, 5),
                (4, 3),
                (3, 1),
                (1, 4),
                (4, 2),
                (5, 2),
                (5, 4),
            ],
        ),
        ElementGraphKind::QuadDgP3Lattice => OrientedGraph::new(
            9,
            vec![
                (0, 4),
                (4, 1),
                (1, 5),
                (5, 2),
                (2, 6),
                (6, 3),
                (3, 7),
                (7, 0),
                (6, 8),
                (8, 7),
                (5, 8),
                (4, 8),
            ],
        ),
        ElementGraphKind::NodeCycle(k) => {
            if k < 3 {
                return Err(Error::Argument(format!("node cycle needs K >= 3, got {k}")));
            }
            // Edge j crosses half-face j, from cell j-1 into cell j.
            let edges = (0..k).map(|j| ((j + k - 1) % k, j)).collect();
            OrientedGraph::new(k, edges)
        }
    }
}
