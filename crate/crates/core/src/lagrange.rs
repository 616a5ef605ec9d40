//! Cell-centered Lagrangian gas dynamics on moving polygonal meshes.
//!
//! Subface fluxes come from the parametrized simple Riemann solver, the free
//! contact velocity being the projection of the nodal velocity onto each
//! subface normal. The nodal velocity solves the small SPD system expressing
//! node-based conservation, which also drives the mesh motion, so the volume
//! update and the trajectory equation stay compatible.

pub use crate::entropy::EntropyTreatment;

use crate::entropy::{entropy_correct, LagrangianGas, NodeEntropyReport, NodeEntry};
use crate::error::{Error, Result};
use crate::fluxrec::{residuals_to_node_cycle, NodeCycleSources, RecoveredFluxes};
use crate::gas::{lag_flux_n, IdealGasEos, LagState};
use crate::mesh::{CornerGeometry, PolyMesh};
use crate::riemann::{
    face_velocity, simple_solver_with_speeds, wave_speeds, WAVE_SPEED_SAFETY,
};
use crate::vec2::Vec2;
use std::collections::BTreeMap;

/// Mass-carrying Lagrangian cell.
#[derive(Debug, Clone, Copy)]
pub struct LagCellData {
    pub mass: f64,
    pub state: LagState,
}

/// Which geometry evaluates the volume flux of the update.
///
/// `TimeN` is the plain explicit scheme (all normals frozen at `t^n`);
/// `HalfStep` moves the volume equation onto the trapezoidal normals, which
/// makes `m_c tau_c = |omega_c|` exact because the corner normal is linear in
/// the vertex positions. Both GCL defects are always measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GclConvention {
    TimeN,
    HalfStep,
}

/// Data of one solved subface at a node.
#[derive(Debug, Clone, Copy)]
pub struct SubfaceSolve {
    pub face: (usize, usize),
    /// Subface (half-face) length at `t^n`.
    pub length: f64,
    /// Unit normal pointing from the owner cell into the neighbour.
    pub normal: Vec2,
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub lambda_l: f64,
    pub lambda_r: f64,
    /// Face-based Godunov velocity of the pair.
    pub vbar: f64,
    /// Contact velocity actually used: `v_p . n`.
    pub vn_star: f64,
    pub p_star_l: f64,
    pub p_star_r: f64,
}

/// Nodal velocity with the per-subface Riemann data that produced it.
#[derive(Debug, Clone)]
pub struct NodalSolution {
    pub node: usize,
    pub v: Vec2,
    pub subfaces: Vec<SubfaceSolve>,
    /// Residual of the node-based conservation equation after the solve.
    pub residual: Vec2,
}

/// Per-step diagnostics.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub dt: f64,
    /// Max per-cell GCL defect with `t^n` normals.
    pub gcl_defect_tn: f64,
    /// Max per-cell GCL defect with trapezoidal normals.
    pub gcl_defect_half: f64,
    pub min_tau: f64,
    pub min_eps: f64,
    /// Pressure impulse exerted by all wall subfaces over the step.
    pub wall_impulse: Vec2,
    /// Pressure work done by all wall subfaces over the step.
    pub wall_work: f64,
    /// Max deviation `|m_c tau_c - |omega_c||` after the step.
    pub volume_consistency: f64,
    /// Node entropy reports (interior nodes), when requested.
    pub entropy_reports: Vec<(usize, NodeEntropyReport)>,
}

/// Moving-mesh Lagrangian solver. Boundary faces are walls (`v . n = 0`);
/// periodic directions come from the mesh's own identification.
pub struct LagrangeSolver {
    pub mesh: PolyMesh,
    pub cells: Vec<LagCellData>,
    pub eos: IdealGasEos,
    pub convention: GclConvention,
    pub entropy: EntropyTreatment,
}

/// One face incident to a node, reduced to its subface adjacent to the node.
pub struct FaceAtNode {
    pub key: (usize, usize),
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub normal: Vec2,
    /// Half of the face length: the subface adjacent to the node.
    pub sub_length: f64,
}

impl LagrangeSolver {
    pub fn new(
        mesh: PolyMesh,
        states: Vec<LagState>,
        eos: IdealGasEos,
        convention: GclConvention,
    ) -> Result<Self> {
        if states.len() != mesh.n_cells() {
            return Err(Error::Argument(format!(
                "{} states for {} cells",
                states.len(),
                mesh.n_cells()
            )));
        }
        let cells = states
            .iter()
            .enumerate()
            .map(|(c, s)| -> Result<LagCellData> {
                s.check_domain()?;
                Ok(LagCellData {
                    mass: mesh.cell_volume(c) / s.tau,
                    state: *s,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LagrangeSolver {
            mesh,
            cells,
            eos,
            convention,
            entropy: EntropyTreatment::Off,
        })
    }

    /// Faces incident to each node, reduced to node-adjacent subfaces.
    pub fn node_faces(&self, geom: &CornerGeometry) -> BTreeMap<usize, Vec<FaceAtNode>> {
        let mut map: BTreeMap<usize, Vec<FaceAtNode>> = BTreeMap::new();
        for (key, f) in geom.faces.iter() {
            for node in [f.p, f.q] {
                map.entry(node).or_default().push(FaceAtNode {
                    key: *key,
                    owner: f.owner,
                    neighbor: f.neighbor,
                    normal: f.normal,
                    sub_length: 0.5 * f.length,
                });
            }
        }
        map
    }

    /// Solve the nodal system at `node`: an unconstrained 2x2 SPD solve at
    /// interior nodes, a wall-tangential solve on one wall, and a pinned node
    /// on two independent walls. One Picard refresh of the wave speeds.
    pub fn nodal_solver(&self, node: usize, faces: &[FaceAtNode]) -> Result<NodalSolution> {
        let eos = &self.eos;
        let interior: Vec<&FaceAtNode> = faces.iter().filter(|f| f.neighbor.is_some()).collect();
        let walls: Vec<&FaceAtNode> = faces.iter().filter(|f| f.neighbor.is_none()).collect();

        let mut wall_lines: Vec<Vec2> = Vec::new();
        for w in &walls {
            if !wall_lines.iter().any(|l| l.dot(w.normal).abs() > 1.0 - 1e-12) {
                wall_lines.push(w.normal);
            }
        }
        if wall_lines.len() > 2 {
            return Err(Error::NodalSolver {
                node,
                reason: format!("{} wall directions meet here", wall_lines.len()),
            });
        }

        // initial guess: mean of adjacent cell velocities, wall-projected
        let mut guess = Vec2::ZERO;
        let mut count = 0.0;
        for f in faces {
            guess += self.cells[f.owner].state.v;
            count += 1.0;
            if let Some(nb) = f.neighbor {
                guess += self.cells[nb].state.v;
                count += 1.0;
            }
        }
        if count > 0.0 {
            guess = guess / count;
        }
        for n in &wall_lines {
            guess -= *n * guess.dot(*n);
        }

        let solve_with = |v_guess: Vec2| -> Result<(Vec2, Vec<(f64, f64, f64)>)> {
            // per interior face: lambda_l, lambda_r, vbar with v* = v_guess . n
            let mut coeffs = Vec::with_capacity(interior.len());
            let mut m = [[0.0; 2]; 2];
            let mut b = Vec2::ZERO;
            for f in &interior {
                let ul = self.cells[f.owner].state.along(f.normal);
                let ur = self.cells[f.neighbor.unwrap()].state.along(f.normal);
                let (ll, lr) =
                    wave_speeds(&ul, &ur, v_guess.dot(f.normal), eos, WAVE_SPEED_SAFETY)?;
                let vbar = face_velocity(&ul, &ur, ll, lr, eos)?;
                coeffs.push((ll, lr, vbar));
                let w = f.sub_length * (ll + lr);
                m[0][0] += w * f.normal.x * f.normal.x;
                m[0][1] += w * f.normal.x * f.normal.y;
                m[1][0] += w * f.normal.y * f.normal.x;
                m[1][1] += w * f.normal.y * f.normal.y;
                b += f.normal * (w * vbar);
            }
            let v = match wall_lines.len() {
                0 => {
                    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                    let scale = m[0][0].abs() + m[1][1].abs();
                    if det.abs() <= 1e-14 * scale * scale {
                        return Err(Error::NodalSolver {
                            node,
                            reason: format!(
                                "singular nodal matrix, det = {det:.3e}, scale = {scale:.3e}"
                            ),
                        });
                    }
                    Vec2::new(
                        (b.x * m[1][1] - b.y * m[0][1]) / det,
                        (m[0][0] * b.y - m[1][0] * b.x) / det,
                    )
                }
                1 => {
                    let t = Vec2::new(-wall_lines[0].y, wall_lines[0].x);
                    let mtt = t.x * (m[0][0] * t.x + m[0][1] * t.y)
                        + t.y * (m[1][0] * t.x + m[1][1] * t.y);
                    if mtt <= 0.0 {
                        return Err(Error::NodalSolver {
                            node,
                            reason: "no tangential stiffness on the wall".into(),
                        });
                    }
                    t * (b.dot(t) / mtt)
                }
                _ => Vec2::ZERO,
            };
            Ok((v, coeffs))
        };

        // one Picard refresh: speeds from the guess give v1, speeds from v1
        // give the final velocity; the second coefficient set is frozen so
        // the returned velocity solves exactly the system those speeds built
        let (v, coeffs) = if interior.is_empty() {
            (Vec2::ZERO, Vec::new())
        } else {
            let (v1, _) = solve_with(guess)?;
            solve_with(v1)?
        };

        let mut subfaces = Vec::with_capacity(faces.len());
        let mut residual = Vec2::ZERO;
        let mut idx = 0;
        for f in faces {
            let vn_star = v.dot(f.normal);
            match f.neighbor {
                Some(nb) => {
                    let (ll, lr, vbar) = coeffs[idx];
                    idx += 1;
                    let ul = self.cells[f.owner].state.along(f.normal);
                    let ur = self.cells[nb].state.along(f.normal);
                    let s = simple_solver_with_speeds(&ul, &ur, vn_star, ll, lr, eos)?;
                    residual += f.normal * (f.sub_length * (ll + lr) * (vn_star - vbar));
                    subfaces.push(SubfaceSolve {
                        face: f.key,
                        length: f.sub_length,
                        normal: f.normal,
                        owner: f.owner,
                        neighbor: f.neighbor,
                        lambda_l: ll,
                        lambda_r: lr,
                        vbar,
                        vn_star,
                        p_star_l: s.p_l_star,
                        p_star_r: s.p_r_star,
                    });
                }
                None => {
                    // one-sided wall closure; pressure from the owner star state
                    let ul = self.cells[f.owner].state.along(f.normal);
                    let al = ul.sound_speed(eos)?;
                    let ll = WAVE_SPEED_SAFETY
                        * (al / ul.tau).max(-(vn_star - ul.vn) / ul.tau);
                    let p = ul.pressure(eos)?;
                    let p_star = p - ll * (vn_star - ul.vn);
                    subfaces.push(SubfaceSolve {
                        face: f.key,
                        length: f.sub_length,
                        normal: f.normal,
                        owner: f.owner,
                        neighbor: None,
                        lambda_l: ll,
                        lambda_r: ll,
                        vbar: vn_star,
                        vn_star,
                        p_star_l: p_star,
                        p_star_r: p_star,
                    });
                }
            }
        }
        Ok(NodalSolution {
            node,
            v,
            subfaces,
            residual,
        })
    }

    /// Nodal solutions for every node that carries corners.
    pub fn solve_nodes(&self, geom: &CornerGeometry) -> Result<Vec<NodalSolution>> {
        let node_faces = self.node_faces(geom);
        node_faces
            .iter()
            .map(|(&node, faces)| self.nodal_solver(node, faces))
            .collect()
    }

    /// Subface flux `(-v_p . n, p* n, p* n . v_p)` seen from `cell`, for the
    /// subface of `solve` (length not included).
    pub fn subface_flux(&self, solve: &SubfaceSolve, cell: usize, v_p: Vec2) -> [f64; 4] {
        let (n, p_star) = if cell == solve.owner {
            (solve.normal, solve.p_star_l)
        } else {
            (-solve.normal, solve.p_star_r)
        };
        let vn = v_p.dot(n);
        [-vn, p_star * n.x, p_star * n.y, p_star * vn]
    }

    /// Largest stable time step `0.9 * min_c m_c / sum(l lambda)` (the convex
    /// combination bound), times `cfl_scale`.
    pub fn max_dt(&self, geom: &CornerGeometry, solutions: &[NodalSolution], cfl_scale: f64) -> f64 {
        let mut denom = vec![0.0; self.mesh.n_cells()];
        for sol in solutions {
            for sf in &sol.subfaces {
                denom[sf.owner] += sf.length * sf.lambda_l;
                if let Some(nb) = sf.neighbor {
                    denom[nb] += sf.length * sf.lambda_r;
                }
            }
        }
        let mut dt = f64::INFINITY;
        for c in 0..self.mesh.n_cells() {
            if denom[c] > 0.0 {
                dt = dt.min(self.cells[c].mass / denom[c]);
            }
        }
        let _ = geom;
        0.9 * cfl_scale * dt
    }

    /// One explicit step: solve all nodes, update all cells, move the mesh.
    pub fn step(&mut self, dt: f64) -> Result<StepReport> {
        let geom = self.mesh.corner_geometry()?;
        let solutions = self.solve_nodes(&geom)?;
        self.step_with(dt, &geom, &solutions)
    }

    /// Step with precomputed nodal solutions (lets drivers reuse them for
    /// diagnostics).
    pub fn step_with(
        &mut self,
        dt: f64,
        geom: &CornerGeometry,
        solutions: &[NodalSolution],
    ) -> Result<StepReport> {
        let bound = self.max_dt(geom, solutions, 1.0) / 0.9;
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::TimeStep(format!(
                "dt = {dt:.3e} exceeds the convex-combination bound {bound:.3e}"
            )));
        }

        let mut velocity = vec![Vec2::ZERO; self.mesh.n_vertices()];
        let mut wall_impulse = Vec2::ZERO;
        let mut wall_work = 0.0;
        // per-cell accumulators: d(m u) = -dt * sum l f
        let mut accum = vec![[0.0; 4]; self.mesh.n_cells()];
        // volume flux per cell with t^n normals: sum l n . v_p
        let mut volflux_tn = vec![0.0; self.mesh.n_cells()];
        let mut entropy_reports = Vec::new();

        for sol in solutions {
            velocity[sol.node] = sol.v;
            // per-cell corner residual at this node, for the entropy hook
            let mut corner_phi: BTreeMap<usize, [f64; 4]> = BTreeMap::new();
            let mut interior_node = true;
            for sf in &sol.subfaces {
                let contributions: &[usize] = match sf.neighbor {
                    Some(nb) => &[sf.owner, nb][..],
                    None => {
                        interior_node = false;
                        &[sf.owner][..]
                    }
                };
                for &c in contributions {
                    let f = self.subface_flux(sf, c, sol.v);
                    let n_out = if c == sf.owner { sf.normal } else { -sf.normal };
                    for k in 0..4 {
                        accum[c][k] += sf.length * f[k];
                    }
                    volflux_tn[c] += -sf.length * f[0]; // l (v_p . n_out)
                    if self.entropy != EntropyTreatment::Off {
                        let state = self.cells[c].state;
                        let p = state.pressure(&self.eos)?;
                        let fc = lag_flux_n(&state, n_out, p);
                        let phi = corner_phi.entry(c).or_insert([0.0; 4]);
                        for k in 0..4 {
                            phi[k] += sf.length * (f[k] - fc[k]);
                        }
                    }
                }
                if sf.neighbor.is_none() {
                    wall_impulse += sf.normal * (dt * sf.length * sf.p_star_l);
                    wall_work += dt * sf.length * sf.p_star_l * sf.vn_star;
                }
            }
            if self.entropy != EntropyTreatment::Off && interior_node && corner_phi.len() > 2 {
                let model = LagrangianGas(self.eos);
                let mut normals: BTreeMap<usize, Vec2> = BTreeMap::new();
                for &(c, k) in &geom.node_corners[sol.node] {
                    *normals.entry(c).or_insert(Vec2::ZERO) += geom.corners[c][k].normal;
                }
                let cells: Vec<usize> = corner_phi.keys().copied().collect();
                let entries: Vec<NodeEntry> = cells
                    .iter()
                    .map(|&c| NodeEntry {
                        state: self.cells[c].state.to_array(),
                        residual: corner_phi[&c],
                        corner_normal: normals.get(&c).copied().unwrap_or(Vec2::ZERO),
                    })
                    .collect();
                let (corrected, report) = entropy_correct(&entries, &model)?;
                if self.entropy == EntropyTreatment::Correct {
                    for (i, &c) in cells.iter().enumerate() {
                        for k in 0..4 {
                            accum[c][k] += corrected[i][k] - entries[i].residual[k];
                        }
                    }
                }
                entropy_reports.push((sol.node, report));
            }
        }

        // volumes before the move, then move the mesh
        let vol_before: Vec<f64> = (0..self.mesh.n_cells())
            .map(|c| geom.volumes[c])
            .collect();
        let mut moved = self.mesh.clone();
        moved.displace(&velocity, dt);
        let geom_after = moved.corner_geometry().map_err(|e| {
            Error::Geometry(format!("mesh tangled during the step: {e}"))
        })?;

        // GCL bookkeeping: both conventions, per cell
        let mut gcl_tn: f64 = 0.0;
        let mut gcl_half: f64 = 0.0;
        let mut volflux_half = vec![0.0; self.mesh.n_cells()];
        for c in 0..self.mesh.n_cells() {
            for (k, corner) in geom.corners[c].iter().enumerate() {
                let n_half = (corner.normal + geom_after.corners[c][k].normal) * 0.5;
                volflux_half[c] += n_half.dot(velocity[corner.node]);
            }
            let dv = geom_after.volumes[c] - vol_before[c];
            gcl_tn = gcl_tn.max((dv - dt * volflux_tn[c]).abs());
            gcl_half = gcl_half.max((dv - dt * volflux_half[c]).abs());
        }

        // state update
        let mut min_tau = f64::INFINITY;
        let mut min_eps = f64::INFINITY;
        let mut volume_consistency: f64 = 0.0;
        for c in 0..self.mesh.n_cells() {
            let cell = &mut self.cells[c];
            let a = cell.state.to_array();
            let mut b = [0.0; 4];
            for k in 0..4 {
                b[k] = a[k] - dt / cell.mass * accum[c][k];
            }
            if self.convention == GclConvention::HalfStep {
                // volume equation on trapezoidal normals: exact geometric
                // volume, the momentum/energy fluxes stay at t^n
                b[0] = geom_after.volumes[c] / cell.mass;
            }
            let s = LagState::from_array(b);
            s.check_domain().map_err(|_| {
                Error::InvariantDomain(format!(
                    "cell {c} left the invariant domain (tau = {}, eps = {})",
                    s.tau,
                    s.specific_internal_energy()
                ))
            })?;
            min_tau = min_tau.min(s.tau);
            min_eps = min_eps.min(s.specific_internal_energy());
            volume_consistency = volume_consistency
                .max((cell.mass * s.tau - geom_after.volumes[c]).abs());
            cell.state = s;
        }
        self.mesh = moved;

        Ok(StepReport {
            dt,
            gcl_defect_tn: gcl_tn,
            gcl_defect_half: gcl_half,
            min_tau,
            min_eps,
            wall_impulse,
            wall_work,
            volume_consistency,
            entropy_reports,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    pub fn total_momentum(&self) -> Vec2 {
        self.cells
            .iter()
            .fold(Vec2::ZERO, |s, c| s + c.state.v * c.mass)
    }

    pub fn total_energy(&self) -> f64 {
        self.cells.iter().map(|c| c.mass * c.state.e).sum()
    }
}

/// Cell-centered discrete divergence
/// `(1 / |omega_c|) sum l_pc n_pc . q_p` of a nodal field.
pub fn discrete_divergence(geom: &CornerGeometry, cell: usize, q: &dyn Fn(usize) -> Vec2) -> f64 {
    let mut s = 0.0;
    for corner in &geom.corners[cell] {
        s += corner.normal.dot(q(corner.node));
    }
    s / geom.volumes[cell]
}

/// Unique half-face fluxes around an interior node from the solved subface
/// data, through the node-cycle recovery. Lengths are folded into the
/// returned fluxes; edge `k` of the cycle crosses the face between
/// consecutive fan cells `k-1` and `k`.
pub fn halfface_fluxes(
    mesh: &PolyMesh,
    geom: &CornerGeometry,
    solver: &LagrangeSolver,
    sol: &NodalSolution,
) -> Result<RecoveredFluxes> {
    let fan = geom.fan(mesh, sol.node);
    let k = fan.len();
    if k < 3 {
        return Err(Error::Argument(format!(
            "half-face recovery needs at least 3 cells around node {}, got {k}",
            sol.node
        )));
    }
    let find_face = |a: usize, b: usize| -> Result<&SubfaceSolve> {
        sol.subfaces
            .iter()
            .find(|sf| {
                (sf.owner == a && sf.neighbor == Some(b))
                    || (sf.owner == b && sf.neighbor == Some(a))
            })
            .ok_or_else(|| {
                Error::Geometry(format!(
                    "cells {a} and {b} around node {} share no solved face",
                    sol.node
                ))
            })
    };
    let mut sources = Vec::with_capacity(k);
    for j in 0..k {
        let (c, _) = fan[j];
        let prev = fan[(j + k - 1) % k].0;
        let next = fan[(j + 1) % k].0;
        let f_in = find_face(prev, c)?; // face j, shared with the previous cell
        let f_out = find_face(c, next)?; // face j+1
        let flux_in = solver.subface_flux(f_in, c, sol.v);
        let flux_out = solver.subface_flux(f_out, c, sol.v);
        let mut s = [0.0; 4];
        for comp in 0..4 {
            s[comp] = f_in.length * flux_in[comp] + f_out.length * flux_out[comp];
        }
        sources.push(s.to_vec());
    }
    residuals_to_node_cycle(&NodeCycleSources { sources })
}
