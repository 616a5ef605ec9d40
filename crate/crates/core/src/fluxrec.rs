//! Conservative flux recovery on oriented element graphs.
//!
//! Given per-node residuals minus boundary fluxes (`psi`), the unique
//! minimum-norm edge fluxes satisfying `A fhat = psi` are `fhat = A^T L^+ psi`
//! with `L = A A^T` the graph Laplacian. The same solve applied to boundary
//! normals yields the control-volume normals of the recovered scheme, and a
//! circulant closed form covers the node-cycle graphs of the Lagrangian
//! half-face characterization.

use crate::error::{Error, Result};
use crate::gas::{GasState2, IdealGasEos};
use crate::mesh::{element_graph, ElementGraphKind, OrientedGraph};
use crate::vec2::Vec2;
use nalgebra::DMatrix;

/// Absolute and relative tolerance on the compatibility defect `sum psi`.
pub const COMPAT_TOL: f64 = 1e-10;

/// Cached pseudoinverse of the graph Laplacian.
///
/// The operator equals `L^{-1}` on `span(1)^perp` and `0` on `span(1)`,
/// obtained from the rank-correction identity `(L + 1 1^T / n)^{-1} =
/// L^+ + 1 1^T / n`.
#[derive(Debug, Clone)]
pub struct GraphPinv {
    graph: OrientedGraph,
    pinv: DMatrix<f64>,
}

impl GraphPinv {
    pub fn new(graph: &OrientedGraph) -> Result<Self> {
        let comps = graph.components();
        if comps.len() != 1 {
            return Err(Error::Disconnected(comps));
        }
        let n = graph.n_nodes();
        let mut m = graph.laplacian();
        let shift = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += shift;
            }
        }
        let inv = m
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Linearization("graph Laplacian shift solve failed".into()))?;
        let mut pinv = inv;
        for i in 0..n {
            for j in 0..n {
                pinv[(i, j)] -= shift;
            }
        }
        Ok(GraphPinv {
            graph: graph.clone(),
            pinv,
        })
    }

    pub fn graph(&self) -> &OrientedGraph {
        &self.graph
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// Apply `L^+` to per-node columns.
    pub fn apply(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.pinv * rhs
    }
}

/// Closed-form pseudoinverse of the cyclic Laplacian with eigenvalues
/// `2 - 2 cos(2 pi l / K)`.
pub fn circulant_pinv(k: usize) -> Result<DMatrix<f64>> {
    if k < 3 {
        return Err(Error::Argument(format!("cycle needs K >= 3, got {k}")));
    }
    let mut m = DMatrix::zeros(k, k);
    for l in 1..k {
        let lam = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * l as f64 / k as f64).cos();
        for i in 0..k {
            for j in 0..k {
                let phase = 2.0 * std::f64::consts::PI * l as f64 * (i as f64 - j as f64)
                    / k as f64;
                m[(i, j)] += phase.cos() / (lam * k as f64);
            }
        }
    }
    Ok(m)
}

/// Per-node right-hand sides `psi_sigma = phi_sigma - fhat_sigma^b`, one row
/// per node and one column per conserved component, with `sum psi = 0`
/// verified at construction.
#[derive(Debug, Clone)]
pub struct CompatibleResidualSet {
    values: DMatrix<f64>,
}

impl CompatibleResidualSet {
    pub fn new(graph: &OrientedGraph, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != graph.n_nodes() {
            return Err(Error::Argument(format!(
                "residual set has {} rows for {} graph nodes",
                values.nrows(),
                graph.n_nodes()
            )));
        }
        let mut scale: f64 = 0.0;
        let mut defect: f64 = 0.0;
        for c in 0..values.ncols() {
            let col_sum: f64 = (0..values.nrows()).map(|r| values[(r, c)]).sum();
            let col_scale = (0..values.nrows()).map(|r| values[(r, c)].abs()).fold(0.0, f64::max);
            defect = defect.max(col_sum.abs());
            scale = scale.max(col_scale);
        }
        if defect > COMPAT_TOL * (1.0 + scale) {
            return Err(Error::Incompatible { defect });
        }
        Ok(CompatibleResidualSet { values })
    }

    pub fn from_rows(graph: &OrientedGraph, rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.len());
        let values = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        Self::new(graph, values)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Edge fluxes recovered from a residual set; one row per direct edge.
#[derive(Debug, Clone)]
pub struct RecoveredFluxes {
    edges: Vec<(usize, usize)>,
    values: DMatrix<f64>,
}

impl RecoveredFluxes {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Flux from `from` to `to`; the reverse orientation returns the negated
    /// row, making antisymmetry structural.
    pub fn flux(&self, from: usize, to: usize) -> Option<Vec<f64>> {
        self.edges.iter().enumerate().find_map(|(e, &(a, b))| {
            let sign = if (a, b) == (from, to) {
                1.0
            } else if (a, b) == (to, from) {
                -1.0
            } else {
                return None;
            };
            Some((0..self.values.ncols()).map(|c| sign * self.values[(e, c)]).collect())
        })
    }
}

/// `fhat = A^T L^+ psi`: the unique minimum-norm edge fluxes reconstructing
/// each node's residual.
pub fn recover_fluxes(pinv: &GraphPinv, psi: &CompatibleResidualSet) -> RecoveredFluxes {
    let a = pinv.graph().incidence();
    let z = pinv.apply(psi.values());
    RecoveredFluxes {
        edges: pinv.graph().edges().to_vec(),
        values: a.transpose() * z,
    }
}

/// Control-volume normals induced by boundary normals `N_sigma`
/// (`sum N = 0`), oriented so that a constant state `u` recovers fluxes
/// `f(u) . n_{sigma sigma'}`. Since the constant-state residual set is
/// `psi_sigma = -f(u) N_sigma`, the normals solve against `-N`.
pub fn recover_normals(pinv: &GraphPinv, boundary_normals: &[Vec2]) -> Result<Vec<Vec2>> {
    let n = pinv.graph().n_nodes();
    if boundary_normals.len() != n {
        return Err(Error::Argument(format!(
            "{} boundary normals for {} nodes",
            boundary_normals.len(),
            n
        )));
    }
    let values = DMatrix::from_fn(n, 2, |i, j| {
        let v = boundary_normals[i];
        -if j == 0 { v.x } else { v.y }
    });
    let psi = CompatibleResidualSet::new(pinv.graph(), values)?;
    let rec = recover_fluxes(pinv, &psi);
    Ok((0..rec.values.nrows())
        .map(|e| Vec2::new(rec.values[(e, 0)], rec.values[(e, 1)]))
        .collect())
}

/// Per-cell sources of the node-cycle system: `S_k = l_k f_{k,k} +
/// l_{k+1} f_{k+1,k}`, the total subface flux leaving cell `k` through the
/// two half-faces at the node.
#[derive(Debug, Clone)]
pub struct NodeCycleSources {
    pub sources: Vec<Vec<f64>>,
}

/// Recover the unique half-face fluxes `f*` (lengths folded in) around a node
/// with `K` cells; solvable exactly when the node-based conservation
/// condition `sum S_k = 0` holds.
pub fn residuals_to_node_cycle(sources: &NodeCycleSources) -> Result<RecoveredFluxes> {
    let k = sources.sources.len();
    let graph = element_graph(ElementGraphKind::NodeCycle(k))?;
    let psi = CompatibleResidualSet::from_rows(&graph, &sources.sources).map_err(|e| match e {
        Error::Incompatible { defect } => Error::Conservation { node: 0, defect },
        other => other,
    })?;
    let pinv = GraphPinv::new(&graph)?;
    Ok(recover_fluxes(&pinv, &psi))
}

/// Same recovery through the circulant closed form; used to cross-check the
/// generic pseudoinverse.
pub fn node_cycle_fluxes_circulant(sources: &NodeCycleSources) -> Result<RecoveredFluxes> {
    let k = sources.sources.len();
    let graph = element_graph(ElementGraphKind::NodeCycle(k))?;
    let psi = CompatibleResidualSet::from_rows(&graph, &sources.sources)?;
    let a = graph.incidence();
    let z = circulant_pinv(k)? * psi.values();
    Ok(RecoveredFluxes {
        edges: graph.edges().to_vec(),
        values: a.transpose() * z,
    })
}

// ---------------------------------------------------------------------------
// Explicit dG-P1 edge fluxes on a triangle
// ---------------------------------------------------------------------------

/// Recovered data for a discontinuous P1 triangle: edge fluxes on the P1
/// graph, the edge normals `(n_sigma' - n_sigma)/2`, and the dG residuals the
/// fluxes reconstruct.
#[derive(Debug, Clone)]
pub struct DgP1Fluxes {
    /// Fluxes on the direct edges (0,1), (1,2), (2,0).
    pub fluxes: [[f64; 4]; 3],
    pub edge_normals: [Vec2; 3],
    /// Galerkin dG residuals of the three vertices.
    pub residuals: [[f64; 4]; 3],
    /// Total residual `sum residuals = boundary integral of the numerical
    /// flux`.
    pub total: [f64; 4],
}

const GAUSS2: [f64; 2] = [
    0.5 - 0.288675134594812882254574390251, // (1 - 1/sqrt(3)) / 2
    0.5 + 0.288675134594812882254574390251,
];

/// Edge fluxes of a dG-P1 Euler triangle:
/// `fhat_{ss'} = fbar . n_{ss'} + boundary integral of
/// (phi_s - phi_s')(fhat_n - f(ubar) n)`, with `fbar` the mean interior flux
/// (midpoint-rule quadrature) and shared 2-point Gauss edge quadrature.
///
/// `numerical_flux(edge, point, unit outward normal, inner trace)` supplies
/// the interface flux, so any two-point flux (or exterior traces) can be
/// plugged in.
pub fn dg_p1_edge_flux<F>(
    vertices: [Vec2; 3],
    nodal: [GasState2; 3],
    eos: &IdealGasEos,
    mut numerical_flux: F,
) -> Result<DgP1Fluxes>
where
    F: FnMut(usize, Vec2, Vec2, &GasState2) -> [f64; 4],
{
    let area = 0.5 * (vertices[1] - vertices[0]).cross_z(vertices[2] - vertices[0]);
    if !(area > 0.0) {
        return Err(Error::Geometry("dG triangle must be counterclockwise".into()));
    }
    // scaled inward normals
    let nin = [
        -(vertices[2] - vertices[1]).cross_ez(),
        -(vertices[0] - vertices[2]).cross_ez(),
        -(vertices[1] - vertices[0]).cross_ez(),
    ];

    let interp = |l: [f64; 3]| -> GasState2 {
        let mut a = [0.0; 4];
        for (w, s) in l.iter().zip(nodal.iter()) {
            let sa = s.to_array();
            for c in 0..4 {
                a[c] += w * sa[c];
            }
        }
        GasState2::from_array(a)
    };

    // Mean interior flux by the degree-2 edge-midpoint rule.
    let mut fbar = [Vec2::ZERO; 4];
    for mids in [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]] {
        let u = interp(mids);
        let p = u.pressure(eos)?;
        let v = u.velocity();
        let rows = [
            u.mom,
            Vec2::new(u.mom.x * v.x + p, u.mom.x * v.y),
            Vec2::new(u.mom.y * v.x, u.mom.y * v.y + p),
            (u.energy + p) * v,
        ];
        for c in 0..4 {
            fbar[c] += rows[c] / 3.0;
        }
    }

    let ubar = interp([1.0 / 3.0; 3]);
    let pbar = ubar.pressure(eos)?;
    let vbar = ubar.velocity();
    let fbar_n = |n: Vec2| -> [f64; 4] {
        let vn = vbar.dot(n);
        [
            ubar.rho * vn,
            ubar.mom.x * vn + pbar * n.x,
            ubar.mom.y * vn + pbar * n.y,
            (ubar.energy + pbar) * vn,
        ]
    };

    let mut residuals = [[0.0; 4]; 3];
    // Interior part: -int f(u_h) . grad phi_sigma, grad phi = n_in / (2 area).
    for s in 0..3 {
        for c in 0..4 {
            residuals[s][c] = -fbar[c].dot(nin[s]) / 2.0;
        }
    }

    let mut fluxes = [[0.0; 4]; 3];
    // direct edges of the P1 graph
    let graph_edges = [(0usize, 1usize), (1, 2), (2, 0)];

    // Boundary loop: geometric edge e runs from vertex e to vertex e+1.
    for e in 0..3 {
        let a = vertices[e];
        let b = vertices[(e + 1) % 3];
        let len = (b - a).norm();
        let n = (b - a).cross_ez() / len;
        for &g in GAUSS2.iter() {
            let x = a + (b - a) * g;
            let mut lambda = [0.0; 3];
            lambda[e] = 1.0 - g;
            lambda[(e + 1) % 3] = g;
            let trace = interp(lambda);
            let fh = numerical_flux(e, x, n, &trace);
            let fc = fbar_n(n);
            let w_edge = 0.5 * len; // each Gauss point carries half the edge
            for s in 0..3 {
                for c in 0..4 {
                    residuals[s][c] += w_edge * lambda[s] * fh[c];
                }
            }
            for (ge, &(s, sp)) in graph_edges.iter().enumerate() {
                let dphi = lambda[s] - lambda[sp];
                for c in 0..4 {
                    fluxes[ge][c] += w_edge * dphi * (fh[c] - fc[c]);
                }
            }
        }
    }

    let mut edge_normals = [Vec2::ZERO; 3];
    for (ge, &(s, sp)) in graph_edges.iter().enumerate() {
        edge_normals[ge] = (nin[sp] - nin[s]) / 2.0;
        for c in 0..4 {
            fluxes[ge][c] += Vec2::new(fbar[c].x, fbar[c].y).dot(edge_normals[ge]);
        }
    }

    let mut total = [0.0; 4];
    for s in 0..3 {
        for c in 0..4 {
            total[c] += residuals[s][c];
        }
    }

    Ok(DgP1Fluxes {
        fluxes,
        edge_normals,
        residuals,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::euler_flux_n;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_compatible(
        rng: &mut ChaCha8Rng,
        n: usize,
        ncols: usize,
    ) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(n, ncols, |_, _| rng.gen_range(-1.0..1.0));
        for c in 0..ncols {
            let mean: f64 = (0..n).map(|r| m[(r, c)]).sum::<f64>() / n as f64;
            for r in 0..n {
                m[(r, c)] -= mean;
            }
        }
        m
    }

    #[test]
    fn p1_pinv_is_division_by_three() {
        let g = element_graph(ElementGraphKind::TriangleP1).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        let psi = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let z = pinv.pinv() * &psi;
        for i in 0..3 {
            assert_relative_eq!(z[i], psi[i] / 3.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn pinv_identity_on_mean_free_subspace() {
        for kind in [
            ElementGraphKind::TriangleP1,
            ElementGraphKind::TriangleP2Lattice,
            ElementGraphKind::QuadDgP3Lattice,
            ElementGraphKind::NodeCycle(6),
        ] {
            let g = element_graph(kind).unwrap();
            let n = g.n_nodes();
            let pinv = GraphPinv::new(&g).unwrap();
            let prod = g.laplacian() * pinv.pinv();
            for i in 0..n {
                for j in 0..n {
                    let expected = if i == j { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 };
                    assert_relative_eq!(prod[(i, j)], expected, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn p1_example_fluxes() {
        let g = element_graph(ElementGraphKind::TriangleP1).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        let psi = CompatibleResidualSet::from_rows(
            &g,
            &[vec![1.0], vec![0.0], vec![-1.0]],
        )
        .unwrap();
        let rec = recover_fluxes(&pinv, &psi);
        // (psi_1 - psi_2)/3 etc on edges (0,1), (1,2), (2,0)
        assert_relative_eq!(rec.values()[(0, 0)], 1.0 / 3.0, epsilon = 1e-13);
        assert_relative_eq!(rec.values()[(1, 0)], 1.0 / 3.0, epsilon = 1e-13);
        assert_relative_eq!(rec.values()[(2, 0)], -2.0 / 3.0, epsilon = 1e-13);
        // A fhat = psi
        let a = g.incidence();
        let back = a * rec.values();
        for i in 0..3 {
            assert_relative_eq!(back[(i, 0)], psi.values()[(i, 0)], epsilon = 1e-13);
        }
        // antisymmetric accessor
        let f01 = rec.flux(0, 1).unwrap();
        let f10 = rec.flux(1, 0).unwrap();
        assert_eq!(f01[0], -f10[0]);
    }

    #[test]
    fn zero_residuals_give_zero_fluxes() {
        let g = element_graph(ElementGraphKind::TriangleP2Lattice).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        let psi =
            CompatibleResidualSet::new(&g, DMatrix::zeros(6, 2)).unwrap();
        let rec = recover_fluxes(&pinv, &psi);
        assert_eq!(rec.values().amax(), 0.0);
    }

    #[test]
    fn incompatible_psi_is_rejected_with_defect() {
        let g = element_graph(ElementGraphKind::TriangleP1).unwrap();
        let r = CompatibleResidualSet::from_rows(&g, &[vec![1.0], vec![1.0], vec![1.0]]);
        match r {
            Err(Error::Incompatible { defect }) => assert_relative_eq!(defect, 3.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_psi_solved_exactly_on_all_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [
            ElementGraphKind::TriangleP1,
            ElementGraphKind::TriangleP2Lattice,
            ElementGraphKind::QuadDgP3Lattice,
            ElementGraphKind::NodeCycle(4),
            ElementGraphKind::NodeCycle(7),
        ] {
            let g = element_graph(kind).unwrap();
            let pinv = GraphPinv::new(&g).unwrap();
            for _ in 0..50 {
                let vals = random_compatible(&mut rng, g.n_nodes(), 3);
                let psi = CompatibleResidualSet::new(&g, vals).unwrap();
                let rec = recover_fluxes(&pinv, &psi);
                let defect = (g.incidence() * rec.values() - psi.values()).amax();
                assert!(defect <= 1e-12, "{kind:?}: defect {defect}");
            }
        }
    }

    #[test]
    fn minimum_norm_solution_is_orthogonal_to_cycles() {
        // ker A spanned numerically by SVD; the recovered flux must have no
        // component there.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = element_graph(ElementGraphKind::QuadDgP3Lattice).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        let a = g.incidence();
        let svd = a.clone().svd(true, true);
        let vt = svd.v_t.unwrap();
        let tol = 1e-10;
        let null_rows: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] < tol)
            .collect();
        // 12 edges - rank 8 = 4 independent cycles
        assert_eq!(vt.nrows() - (vt.nrows() - null_rows.len()), null_rows.len());
        let vals = random_compatible(&mut rng, g.n_nodes(), 1);
        let psi = CompatibleResidualSet::new(&g, vals).unwrap();
        let rec = recover_fluxes(&pinv, &psi);
        for &r in &null_rows {
            let mut dot = 0.0;
            for e in 0..g.n_edges() {
                dot += vt[(r, e)] * rec.values()[(e, 0)];
            }
            assert!(dot.abs() < 1e-12, "cycle component {dot}");
        }
        // gauge freedom: adding a cycle flow preserves A fhat = psi
        if let Some(&r) = null_rows.first() {
            let mut shifted = rec.values().clone();
            for e in 0..g.n_edges() {
                shifted[(e, 0)] += vt[(r, e)];
            }
            let defect = (g.incidence() * shifted - psi.values()).amax();
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn p1_dual_normals_from_boundary_normals() {
        // N_sigma = -n_sigma / 2 recovers n_{12} = (n_1 - n_2)/6.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = element_graph(ElementGraphKind::TriangleP1).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        for _ in 0..100 {
            let v = [
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Vec2::new(rng.gen_range(1.0..3.0), rng.gen_range(-1.0..1.0)),
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(1.0..3.0)),
            ];
            let nin = [
                -(v[2] - v[1]).cross_ez(),
                -(v[0] - v[2]).cross_ez(),
                -(v[1] - v[0]).cross_ez(),
            ];
            let bn: Vec<Vec2> = nin.iter().map(|&n| n * -0.5).collect();
            let rec = recover_normals(&pinv, &bn).unwrap();
            let expected = [
                (nin[0] - nin[1]) / 6.0,
                (nin[1] - nin[2]) / 6.0,
                (nin[2] - nin[0]) / 6.0,
            ];
            for e in 0..3 {
                assert!((rec[e] - expected[e]).norm() <= 1e-13 * (1.0 + expected[e].norm()));
            }
        }
    }

    #[test]
    fn recovered_normals_sum_to_zero_around_each_node() {
        let g = element_graph(ElementGraphKind::TriangleP2Lattice).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        // boundary normals of the quadratic triangle on the unit right triangle
        let nin = [
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        let bn = vec![
            nin[0] * (-1.0 / 6.0),
            nin[1] * (-1.0 / 6.0),
            nin[2] * (-1.0 / 6.0),
            nin[2] * (1.0 / 3.0),
            nin[0] * (1.0 / 3.0),
            nin[1] * (1.0 / 3.0),
        ];
        let rec = recover_normals(&pinv, &bn).unwrap();
        // column structure of A^T: around each node the signed edge normals
        // reproduce -N_sigma, in particular a closed fan for zero N.
        let a = g.incidence();
        for node in 0..6 {
            let mut s = Vec2::ZERO;
            for (e, _) in g.edges().iter().enumerate() {
                s += rec[e] * a[(node, e)];
            }
            assert!((s + bn[node]).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_state_recovers_physical_edge_fluxes() {
        let eos = IdealGasEos::new(1.4).unwrap();
        let u = GasState2::from_primitive(1.2, Vec2::new(0.3, -0.1), 0.8, &eos);
        let g = element_graph(ElementGraphKind::TriangleP1).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        let nin = [
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        let bn: Vec<Vec2> = nin.iter().map(|&n| n * -0.5).collect();
        // psi_sigma = phi_sigma - f(u) N_sigma = -f(u) N_sigma for constant u
        let rows: Vec<Vec<f64>> = bn
            .iter()
            .map(|&nv| {
                let f = euler_flux_n(&u, nv, &eos).unwrap();
                f.iter().map(|c| -c).collect()
            })
            .collect();
        let psi = CompatibleResidualSet::from_rows(&g, &rows).unwrap();
        let rec = recover_fluxes(&pinv, &psi);
        let normals = recover_normals(&pinv, &bn).unwrap();
        for e in 0..3 {
            let expected = euler_flux_n(&u, normals[e], &eos).unwrap();
            for c in 0..4 {
                assert_relative_eq!(rec.values()[(e, c)], expected[c], epsilon = 1e-13, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn node_cycle_circulant_matches_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in 3..=8 {
            let vals = random_compatible(&mut rng, k, 4);
            let sources = NodeCycleSources {
                sources: (0..k)
                    .map(|i| (0..4).map(|c| vals[(i, c)]).collect())
                    .collect(),
            };
            let generic = residuals_to_node_cycle(&sources).unwrap();
            let fast = node_cycle_fluxes_circulant(&sources).unwrap();
            let diff = (generic.values() - fast.values()).amax();
            assert!(diff <= 1e-12, "K = {k}: {diff}");
        }
    }

    #[test]
    fn node_cycle_conservation_violation_is_an_error() {
        let sources = NodeCycleSources {
            sources: vec![vec![1.0], vec![0.5], vec![0.0]],
        };
        assert!(matches!(
            residuals_to_node_cycle(&sources),
            Err(Error::Conservation { .. })
        ));
    }

    #[test]
    fn dg_p1_constant_state_gives_normal_fluxes() {
        let eos = IdealGasEos::new(1.4).unwrap();
        let u = GasState2::from_primitive(1.0, Vec2::new(0.4, 0.2), 1.1, &eos);
        let verts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.3, 0.1),
            Vec2::new(0.2, 0.9),
        ];
        let out = dg_p1_edge_flux(verts, [u, u, u], &eos, |_, _, n, trace| {
            euler_flux_n(trace, n, &eos).unwrap()
        })
        .unwrap();
        for e in 0..3 {
            let expected = euler_flux_n(&u, out.edge_normals[e], &eos).unwrap();
            for c in 0..4 {
                assert_relative_eq!(out.fluxes[e][c], expected[c], epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn dg_p1_agrees_with_generic_recovery() {
        // The printed edge-flux formula is the minimum-norm solution of
        // A fhat = psi with psi_s = 3 phi_s - phi^K - (3/2) f(ubar) . n_s;
        // build that right-hand side independently and compare solutions.
        let eos = IdealGasEos::new(1.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = element_graph(ElementGraphKind::TriangleP1).unwrap();
        let pinv = GraphPinv::new(&g).unwrap();
        for _ in 0..20 {
            let verts = [
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0 + rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)),
                Vec2::new(rng.gen_range(-0.2..0.2), 1.0 + rng.gen_range(-0.2..0.2)),
            ];
            let nodal = [
                GasState2::from_primitive(
                    1.0 + rng.gen_range(-0.2..0.2),
                    Vec2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                    1.0 + rng.gen_range(-0.2..0.2),
                    &eos,
                ),
                GasState2::from_primitive(
                    1.0 + rng.gen_range(-0.2..0.2),
                    Vec2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                    1.0 + rng.gen_range(-0.2..0.2),
                    &eos,
                ),
                GasState2::from_primitive(
                    1.0 + rng.gen_range(-0.2..0.2),
                    Vec2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                    1.0 + rng.gen_range(-0.2..0.2),
                    &eos,
                ),
            ];
            // Rusanov interface flux against frozen random exterior traces.
            let ext = GasState2::from_primitive(
                1.0 + rng.gen_range(-0.1..0.1),
                Vec2::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)),
                1.0 + rng.gen_range(-0.1..0.1),
                &eos,
            );
            let flux_fn = |_: usize, _: Vec2, n: Vec2, tr: &GasState2| {
                let fi = euler_flux_n(tr, n, &eos).unwrap();
                let fo = euler_flux_n(&ext, n, &eos).unwrap();
                let ai = tr.velocity().norm() + eos.sound_speed(tr.rho, tr.pressure(&eos).unwrap()).unwrap();
                let ao = ext.velocity().norm() + eos.sound_speed(ext.rho, ext.pressure(&eos).unwrap()).unwrap();
                let alpha = ai.max(ao);
                let ti = tr.to_array();
                let to = ext.to_array();
                let mut f = [0.0; 4];
                for c in 0..4 {
                    f[c] = 0.5 * (fi[c] + fo[c]) - 0.5 * alpha * (to[c] - ti[c]);
                }
                f
            };
            let out = dg_p1_edge_flux(verts, nodal, &eos, flux_fn).unwrap();

            let nin = [
                -(verts[2] - verts[1]).cross_ez(),
                -(verts[0] - verts[2]).cross_ez(),
                -(verts[1] - verts[0]).cross_ez(),
            ];
            let ubar = GasState2::from_array({
                let mut a = [0.0; 4];
                for s in &nodal {
                    let sa = s.to_array();
                    for c in 0..4 {
                        a[c] += sa[c] / 3.0;
                    }
                }
                a
            });
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|s| {
                    let fn_s = euler_flux_n(&ubar, nin[s], &eos).unwrap();
                    (0..4)
                        .map(|c| 3.0 * out.residuals[s][c] - out.total[c] - 1.5 * fn_s[c])
                        .collect()
                })
                .collect();
            let psi = CompatibleResidualSet::from_rows(&g, &rows).unwrap();
            let rec = recover_fluxes(&pinv, &psi);
            for e in 0..3 {
                for c in 0..4 {
                    let diff = (rec.values()[(e, c)] - out.fluxes[e][c]).abs();
                    assert!(diff <= 1e-12 * (1.0 + out.fluxes[e][c].abs()), "diff {diff}");
                }
            }
        }
    }

    #[test]
    fn dg_p1_shared_quadrature_pairing_is_exact() {
        // On the shared edge the two basis functions integrate identically
        // under the symmetric 2-point rule, so a constant interface flux
        // contributes nothing to that edge's dissipation term.
        let w: f64 = GAUSS2.iter().map(|&g| (1.0 - g) - g).sum();
        assert!(w.abs() < 1e-15);
    }
}
