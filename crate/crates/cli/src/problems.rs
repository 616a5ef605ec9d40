//! The built-in problems: setup, time loop, invariant logging and output
//! emission. Runs are deterministic given the configuration and seed; all
//! iteration orders are fixed.

use crate::config::{GclId, Problem, RunConfig, SchemeId};
use resdist::cornerfv::{cornerfv_max_dt, cornerfv_step_entropy, CornerBc};
use resdist::entropy::{EntropyTreatment, EulerianGas, EntropyModel};
use resdist::fluxrec::{recover_fluxes, CompatibleResidualSet, GraphPinv};
use resdist::gas::{
    euler_flux_1d, ExactRiemann, GasState1, GasState2, IdealGasEos, LagState, Primitive1,
};
use resdist::io::{fmt_f64, CsvWriter, VtkSnapshot};
use resdist::lagrange::{GclConvention, LagrangeSolver};
use resdist::mesh::{
    element_graph, read_tri_mesh, ElementGraphKind, Grid1D, PolyMesh, TriMesh,
};
use resdist::rd::{
    boundary_residual_scalar, inflow_params, lxf_scalar, n_scheme_scalar, rd_step_scalar,
    scalar_max_dt, total_residual_scalar, RdBc, ScalarScheme,
};
use resdist::riemann::{fv1d_step, max_dt_1d, roe_flux, rusanov_flux, Bc1d, Scheme1d, UpdateForm};
use resdist::{Error, Vec2};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

/// Deterministic 64-bit generator for the selftest right-hand sides.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

pub struct RunOutput {
    pub summary: Vec<String>,
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(BufWriter::new(File::create(cfg.output_dir.join(name))?))
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, Error> {
    match cfg.problem {
        Problem::Sod1d => run_sod1d(cfg),
        Problem::Advection2d => run_advection2d(cfg),
        Problem::AdvectionSteady => run_advection_steady(cfg),
        Problem::SodLagrangianStrip => run_sod_strip(cfg),
        Problem::CornerFvPeriodic => run_cornerfv(cfg),
        Problem::FluxRecoverySelftest => run_selftest(cfg),
    }
}

// ---------------------------------------------------------------------------
// sod1d
// ---------------------------------------------------------------------------

fn entropy_defect_1d(
    states: &[GasState1],
    scheme: Scheme1d,
    eos: &IdealGasEos,
) -> Result<f64, Error> {
    // Tadmor production of the interface fluxes, embedded in the 2D Eulerian
    // entropy pair (the y-momentum slot carries zeros).
    let model = EulerianGas(*eos);
    let embed = |u: &GasState1| [u.rho, u.mom, 0.0, u.energy];
    let mut worst: f64 = 0.0;
    for i in 0..states.len().saturating_sub(1) {
        let ul = &states[i];
        let ur = &states[i + 1];
        let f = match scheme {
            Scheme1d::Rusanov => rusanov_flux(ul, ur, eos)?.0,
            Scheme1d::Roe => roe_flux(ul, ur, eos)?,
        };
        let fhat = [f[0], f[1], 0.0, f[2]];
        let al = embed(ul);
        let ar = embed(ur);
        let wl = model.entropy_vars(&al)?;
        let wr = model.entropy_vars(&ar)?;
        let psi = |a: &[f64; 4], w: &[f64; 4], u: &GasState1| -> Result<f64, Error> {
            let fx = euler_flux_1d(u, eos)?;
            let fx4 = [fx[0], fx[1], 0.0, fx[2]];
            let g = model.entropy_flux(a)?.x;
            Ok(w.iter().zip(fx4.iter()).map(|(a, b)| a * b).sum::<f64>() - g)
        };
        let mut prod = psi(&al, &wl, ul)? - psi(&ar, &wr, ur)?;
        for c in 0..4 {
            prod += fhat[c] * (wr[c] - wl[c]);
        }
        worst = worst.max(-prod);
    }
    Ok(worst.max(0.0))
}

fn run_sod1d(cfg: &RunConfig) -> Result<RunOutput, Error> {
    let eos = IdealGasEos::new(cfg.gamma)?;
    let scheme = match cfg.scheme {
        Some(SchemeId::Roe) => Scheme1d::Roe,
        _ => Scheme1d::Rusanov,
    };
    let n = cfg.resolution;
    let grid = Grid1D::uniform(0.0, 1.0, n)?;
    let mut states: Vec<GasState1> = (0..n)
        .map(|i| {
            if grid.midpoint(i) < 0.5 {
                GasState1::from_primitive(1.0, 0.0, 1.0, &eos)
            } else {
                GasState1::from_primitive(0.125, 0.0, 0.1, &eos)
            }
        })
        .collect();

    let mut log = CsvWriter::new(
        out_file(cfg, "invariants.csv")?,
        &[
            "step", "time", "dt", "mass", "momentum", "energy", "min_density", "min_eps",
            "max_entropy_defect",
        ],
    )?;
    let mut t = 0.0;
    let mut step = 0usize;
    let result = (|| -> Result<(), Error> {
        while t < cfg.t_end {
            let dt = max_dt_1d(&states, &grid, &eos, cfg.cfl)?.min(cfg.t_end - t);
            states = fv1d_step(&states, &grid, dt, scheme, Bc1d::Transmissive, UpdateForm::Flux, &eos)?;
            t += dt;
            step += 1;
            let mut totals = [0.0; 3];
            let mut min_rho = f64::INFINITY;
            let mut min_eps = f64::INFINITY;
            for (i, u) in states.iter().enumerate() {
                let a = u.to_array();
                for c in 0..3 {
                    totals[c] += grid.cell_width(i) * a[c];
                }
                min_rho = min_rho.min(u.rho);
                min_eps = min_eps.min(u.specific_internal_energy());
            }
            let defect = entropy_defect_1d(&states, scheme, &eos)?;
            log.row_mixed(
                step,
                &[t, dt, totals[0], totals[1], totals[2], min_rho, min_eps, defect],
            )?;
        }
        Ok(())
    })();
    log.flush()?;
    result?;

    let mut sol = CsvWriter::new(out_file(cfg, "solution.csv")?, &["x", "rho", "v", "p"])?;
    for (i, u) in states.iter().enumerate() {
        sol.row(&[grid.midpoint(i), u.rho, u.velocity(), u.pressure(&eos)?])?;
    }
    sol.flush()?;

    let exact = ExactRiemann::solve(
        Primitive1 { rho: 1.0, v: 0.0, p: 1.0 },
        Primitive1 { rho: 0.125, v: 0.0, p: 0.1 },
        &eos,
    )?;
    let mut l1 = 0.0;
    for i in 0..n {
        let q = exact.sample((grid.midpoint(i) - 0.5) / cfg.t_end);
        l1 += grid.cell_width(i) * (states[i].rho - q.rho).abs();
    }
    Ok(RunOutput {
        summary: vec![format!("sod1d {scheme:?}: L1(rho) vs exact = {}", fmt_f64(l1))],
    })
}

// ---------------------------------------------------------------------------
// advection2d (periodic, unsteady)
// ---------------------------------------------------------------------------

fn scalar_scheme(cfg: &RunConfig) -> ScalarScheme {
    match cfg.scheme {
        Some(SchemeId::Lxf) => ScalarScheme::LaxFriedrichs,
        Some(SchemeId::Blended) => ScalarScheme::Blended,
        _ => ScalarScheme::NScheme,
    }
}

/// Element entropy defect of the scalar scheme for the pair
/// `(u^2/2, a u^2/2)`: positive part of `boundary flux - sum u phi`.
fn scalar_entropy_defect(
    mesh: &TriMesh,
    u: &[f64],
    a: Vec2,
    scheme: ScalarScheme,
) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles[t];
        let classes = [
            mesh.class_of(tri[0]),
            mesh.class_of(tri[1]),
            mesh.class_of(tri[2]),
        ];
        let uloc = [u[classes[0]], u[classes[1]], u[classes[2]]];
        let k = inflow_params(mesh.inward_normals(t), a);
        let total = total_residual_scalar(k, uloc);
        let phi = match scheme {
            ScalarScheme::NScheme | ScalarScheme::Blended => n_scheme_scalar(k, uloc),
            ScalarScheme::LaxFriedrichs => {
                let alpha = k.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
                lxf_scalar(uloc, total, alpha)
            }
        };
        let verts = [
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        ];
        let gflux = boundary_residual_scalar(verts, uloc, |_, uv| a * (0.5 * uv * uv), 2);
        let weighted: f64 = (0..3).map(|j| uloc[j] * phi[j]).sum();
        worst = worst.max(gflux - weighted);
    }
    worst.max(0.0)
}

fn advection_mesh(cfg: &RunConfig) -> Result<TriMesh, Error> {
    match &cfg.mesh {
        Some(path) => read_tri_mesh(path),
        None => TriMesh::periodic_unit_square(cfg.resolution),
    }
}

fn run_advection2d(cfg: &RunConfig) -> Result<RunOutput, Error> {
    let mesh = advection_mesh(cfg)?;
    let dual = mesh.dual_cells()?;
    let a = Vec2::new(1.0, 0.5);
    let adv = move |_: Vec2| a;
    let scheme = scalar_scheme(cfg);
    let profile = |x: Vec2| (2.0 * std::f64::consts::PI * (x.x + x.y)).sin();
    let mut u: Vec<f64> = (0..mesh.n_vertices())
        .map(|v| profile(mesh.vertices[mesh.class_of(v)]))
        .collect();

    let mut log = CsvWriter::new(
        out_file(cfg, "invariants.csv")?,
        &["step", "time", "dt", "total", "min", "max", "max_entropy_defect"],
    )?;
    let mut t = 0.0;
    let mut step = 0usize;
    let result = (|| -> Result<(), Error> {
        while t < cfg.t_end {
            let dt = scalar_max_dt(&mesh, &dual, &adv, cfg.cfl).min(cfg.t_end - t);
            u = rd_step_scalar(&mesh, &dual, &u, &adv, scheme, dt, &RdBc::Periodic, cfg.theta_jump)?;
            t += dt;
            step += 1;
            let mut total = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in 0..u.len() {
                if mesh.class_of(v) == v {
                    total += dual.areas[v] * u[v];
                    lo = lo.min(u[v]);
                    hi = hi.max(u[v]);
                }
            }
            let defect = scalar_entropy_defect(&mesh, &u, a, scheme);
            log.row_mixed(step, &[t, dt, total, lo, hi, defect])?;
        }
        Ok(())
    })();
    log.flush()?;
    result?;

    let mut sol = CsvWriter::new(out_file(cfg, "solution.csv")?, &["x", "y", "u"])?;
    let mut l1 = 0.0;
    for v in 0..mesh.n_vertices() {
        if mesh.class_of(v) == v {
            sol.row(&[mesh.vertices[v].x, mesh.vertices[v].y, u[v]])?;
            let exact = profile(mesh.vertices[v] - a * cfg.t_end);
            l1 += dual.areas[v] * (u[v] - exact).abs();
        }
    }
    sol.flush()?;
    Ok(RunOutput {
        summary: vec![format!("advection2d {scheme:?}: L1 vs translated profile = {}", fmt_f64(l1))],
    })
}

// ---------------------------------------------------------------------------
// advection-steady (Dirichlet inflow, pseudo-time to steady state)
// ---------------------------------------------------------------------------

pub fn steady_advection_error(
    resolution: usize,
    scheme: ScalarScheme,
    cfl: f64,
    theta_jump: f64,
) -> Result<(f64, usize), Error> {
    let mesh = TriMesh::unit_square(resolution)?;
    let dual = mesh.dual_cells()?;
    let a = Vec2::new(1.0, 0.5);
    let adv = move |_: Vec2| a;
    let exact = |x: Vec2| (2.0 * std::f64::consts::PI * (x.y - 0.5 * x.x)).sin();
    let inflow: Vec<(usize, f64)> = (0..mesh.n_vertices())
        .filter(|&v| mesh.vertices[v].x < 1e-12 || mesh.vertices[v].y < 1e-12)
        .map(|v| (v, exact(mesh.vertices[v])))
        .collect();
    let bc = RdBc::Dirichlet(inflow.clone());
    let mut u = vec![0.0; mesh.n_vertices()];
    for &(v, val) in &inflow {
        u[v] = val;
    }
    let dt = scalar_max_dt(&mesh, &dual, &adv, cfl);
    let mut iterations = 0usize;
    let budget = 200 * resolution * resolution;
    loop {
        let next = rd_step_scalar(&mesh, &dual, &u, &adv, scheme, dt, &bc, theta_jump)?;
        let delta = next
            .iter()
            .zip(u.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        u = next;
        iterations += 1;
        if delta / dt < 1e-10 {
            break;
        }
        if iterations > budget {
            return Err(Error::Argument(format!(
                "steady state not reached in {budget} iterations (residual {:.3e})",
                delta / dt
            )));
        }
    }
    let mut l1 = 0.0;
    for v in 0..mesh.n_vertices() {
        l1 += dual.areas[v] * (u[v] - exact(mesh.vertices[v])).abs();
    }
    Ok((l1, iterations))
}

fn run_advection_steady(cfg: &RunConfig) -> Result<RunOutput, Error> {
    let scheme = scalar_scheme(cfg);
    let (l1, iterations) =
        steady_advection_error(cfg.resolution, scheme, cfg.cfl, cfg.theta_jump)?;
    let mut log = CsvWriter::new(
        out_file(cfg, "invariants.csv")?,
        &["iterations", "l1_error"],
    )?;
    log.row(&[iterations as f64, l1])?;
    log.flush()?;
    Ok(RunOutput {
        summary: vec![format!(
            "advection-steady {scheme:?}: L1 = {} after {iterations} pseudo-time steps",
            fmt_f64(l1)
        )],
    })
}

// ---------------------------------------------------------------------------
// sod-lagrangian-strip
// ---------------------------------------------------------------------------

fn run_sod_strip(cfg: &RunConfig) -> Result<RunOutput, Error> {
    let eos = IdealGasEos::new(cfg.gamma)?;
    let n = cfg.resolution;
    let h = 1.0 / n as f64;
    let mesh = PolyMesh::cartesian(n, 1, 1.0, h)?;
    let states: Vec<LagState> = (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            if x < 0.5 {
                LagState::from_primitive(1.0, Vec2::ZERO, 1.0, &eos)
            } else {
                LagState::from_primitive(0.125, Vec2::ZERO, 0.1, &eos)
            }
        })
        .collect();
    let convention = match cfg.gcl_convention {
        GclId::HalfStep => GclConvention::HalfStep,
        GclId::TimeN => GclConvention::TimeN,
    };
    let mut solver = LagrangeSolver::new(mesh, states, eos, convention)?;
    solver.entropy = if cfg.entropy_correction {
        EntropyTreatment::Correct
    } else {
        EntropyTreatment::Measure
    };

    let mut log = CsvWriter::new(
        out_file(cfg, "invariants.csv")?,
        &[
            "step", "time", "dt", "mass", "momentum_x", "momentum_y", "energy", "min_tau",
            "min_eps", "gcl_defect", "max_entropy_defect",
        ],
    )?;
    let mut entropy_log = if cfg.entropy_correction {
        Some(CsvWriter::new(
            out_file(cfg, "entropy.csv")?,
            &["step", "node", "e_p", "d_p", "alpha_p", "post_defect"],
        )?)
    } else {
        None
    };

    let write_snapshot = |solver: &LagrangeSolver,
                          velocities: &[Vec2],
                          path: &Path|
     -> Result<(), Error> {
        let mut rho = Vec::with_capacity(solver.cells.len());
        let mut p = Vec::with_capacity(solver.cells.len());
        let mut eps = Vec::with_capacity(solver.cells.len());
        for c in &solver.cells {
            rho.push(1.0 / c.state.tau);
            p.push(c.state.pressure(&solver.eos)?);
            eps.push(c.state.specific_internal_energy());
        }
        VtkSnapshot {
            mesh: &solver.mesh,
            cell_scalars: vec![("rho", rho), ("p", p), ("eps", eps)],
            point_vectors: vec![("velocity", velocities.to_vec())],
        }
        .write_file(path)
    };

    let mut t = 0.0;
    let mut step = 0usize;
    let mut last_velocities = vec![Vec2::ZERO; solver.mesh.n_vertices()];
    let mut last_good: Option<(PolyMesh, Vec<resdist::lagrange::LagCellData>, Vec<Vec2>)> = None;
    let result = (|| -> Result<(), Error> {
        while t < cfg.t_end {
            let geom = solver.mesh.corner_geometry()?;
            let sols = solver.solve_nodes(&geom)?;
            let dt = solver.max_dt(&geom, &sols, cfg.cfl / 0.9).min(cfg.t_end - t);
            for s in &sols {
                last_velocities[s.node] = s.v;
            }
            last_good = Some((solver.mesh.clone(), solver.cells.clone(), last_velocities.clone()));
            let rep = solver.step_with(dt, &geom, &sols)?;
            t += dt;
            step += 1;
            let gcl = match convention {
                GclConvention::HalfStep => rep.gcl_defect_half,
                GclConvention::TimeN => rep.gcl_defect_tn,
            };
            let max_def = rep
                .entropy_reports
                .iter()
                .map(|(_, r)| (-r.e_p).max(0.0))
                .fold(0.0f64, f64::max);
            let mom = solver.total_momentum();
            log.row_mixed(
                step,
                &[
                    t,
                    dt,
                    solver.total_mass(),
                    mom.x,
                    mom.y,
                    solver.total_energy(),
                    rep.min_tau,
                    rep.min_eps,
                    gcl,
                    max_def,
                ],
            )?;
            if let Some(el) = entropy_log.as_mut() {
                let cadence_hit = cfg.output_every > 0 && step % cfg.output_every == 0;
                if cadence_hit || t >= cfg.t_end {
                    for (node, r) in &rep.entropy_reports {
                        el.row_mixed(step, &[*node as f64, r.e_p, r.d_p, r.alpha_p, r.post_defect])?;
                    }
                }
            }
            if cfg.output_every > 0 && step % cfg.output_every == 0 {
                write_snapshot(
                    &solver,
                    &last_velocities,
                    &cfg.output_dir.join(format!("strip_{step:06}.vtk")),
                )?;
            }
        }
        Ok(())
    })();
    log.flush()?;
    if let Some(el) = entropy_log.as_mut() {
        el.flush()?;
    }
    if let Err(e) = result {
        // flush the last valid snapshot before reporting the failure
        if let Some((mesh, cells, velocities)) = last_good {
            let recovered = LagrangeSolver {
                mesh,
                cells,
                eos,
                convention,
                entropy: EntropyTreatment::Off,
            };
            let _ = write_snapshot(
                &recovered,
                &velocities,
                &cfg.output_dir.join("strip_last_valid.vtk"),
            );
        }
        return Err(e);
    }
    write_snapshot(&solver, &last_velocities, &cfg.output_dir.join("strip_final.vtk"))?;

    let exact = ExactRiemann::solve(
        Primitive1 { rho: 1.0, v: 0.0, p: 1.0 },
        Primitive1 { rho: 0.125, v: 0.0, p: 0.1 },
        &eos,
    )?;
    let mut l1 = 0.0;
    for (c, cell) in solver.cells.iter().enumerate() {
        let verts = &solver.mesh.cells[c];
        let centroid = verts
            .iter()
            .fold(Vec2::ZERO, |s, &v| s + solver.mesh.vertices[v])
            / verts.len() as f64;
        let q = exact.sample((centroid.x - 0.5) / cfg.t_end);
        l1 += solver.mesh.cell_volume(c) / h * (1.0 / cell.state.tau - q.rho).abs();
    }
    Ok(RunOutput {
        summary: vec![format!("sod-lagrangian-strip: L1(rho) vs exact = {}", fmt_f64(l1))],
    })
}

// ---------------------------------------------------------------------------
// corner-fv-periodic
// ---------------------------------------------------------------------------

fn run_cornerfv(cfg: &RunConfig) -> Result<RunOutput, Error> {
    let eos = IdealGasEos::new(cfg.gamma)?;
    let n = cfg.resolution.max(3);
    let mesh = PolyMesh::periodic_cartesian(n, n, 1.0, 1.0)?;
    let geom = mesh.corner_geometry()?;
    let mut states: Vec<GasState2> = (0..mesh.n_cells())
        .map(|c| {
            let x = ((c % n) as f64 + 0.5) / n as f64;
            let y = ((c / n) as f64 + 0.5) / n as f64;
            GasState2::from_primitive(
                1.0 + 0.2 * (2.0 * std::f64::consts::PI * x).sin(),
                Vec2::new(0.3, 0.1 * (2.0 * std::f64::consts::PI * y).cos()),
                1.0,
                &eos,
            )
        })
        .collect();
    let treatment = if cfg.entropy_correction {
        EntropyTreatment::Correct
    } else {
        EntropyTreatment::Measure
    };

    let mut log = CsvWriter::new(
        out_file(cfg, "invariants.csv")?,
        &[
            "step", "time", "dt", "mass", "momentum_x", "momentum_y", "energy", "min_density",
            "min_eps", "max_entropy_defect",
        ],
    )?;
    let mut t = 0.0;
    let mut step = 0usize;
    let result = (|| -> Result<(), Error> {
        while t < cfg.t_end {
            let dt = cornerfv_max_dt(&mesh, &geom, &states, &eos, cfg.cfl)?.min(cfg.t_end - t);
            let (next, reports) =
                cornerfv_step_entropy(&mesh, &geom, &states, &eos, dt, CornerBc::Periodic, treatment)?;
            states = next;
            t += dt;
            step += 1;
            let mut totals = [0.0; 4];
            let mut min_rho = f64::INFINITY;
            let mut min_eps = f64::INFINITY;
            for (c, u) in states.iter().enumerate() {
                let a = u.to_array();
                for k in 0..4 {
                    totals[k] += geom.volumes[c] * a[k];
                }
                min_rho = min_rho.min(u.rho);
                min_eps = min_eps.min(u.specific_internal_energy());
            }
            let max_def = reports
                .iter()
                .map(|(_, r)| (-r.e_p).max(0.0))
                .fold(0.0f64, f64::max);
            log.row_mixed(
                step,
                &[t, dt, totals[0], totals[1], totals[2], totals[3], min_rho, min_eps, max_def],
            )?;
        }
        Ok(())
    })();
    log.flush()?;
    result?;

    let mut rho = Vec::new();
    let mut p = Vec::new();
    let mut eps = Vec::new();
    for u in &states {
        rho.push(u.rho);
        p.push(u.pressure(&eos)?);
        eps.push(u.specific_internal_energy());
    }
    VtkSnapshot {
        mesh: &mesh,
        cell_scalars: vec![("rho", rho), ("p", p), ("eps", eps)],
        point_vectors: vec![],
    }
    .write_file(&cfg.output_dir.join("cornerfv_final.vtk"))?;
    Ok(RunOutput {
        summary: vec![format!("corner-fv-periodic: {step} steps to t = {}", fmt_f64(t))],
    })
}

// ---------------------------------------------------------------------------
// flux-recovery-selftest
// ---------------------------------------------------------------------------

fn run_selftest(cfg: &RunConfig) -> Result<RunOutput, Error> {
    let mut rng = SplitMix(cfg.seed.wrapping_add(0x5eed));
    let mut kinds = vec![
        ElementGraphKind::TriangleP1,
        ElementGraphKind::TriangleP2Lattice,
        ElementGraphKind::QuadDgP3Lattice,
    ];
    for k in 3..=8 {
        kinds.push(ElementGraphKind::NodeCycle(k));
    }
    let mut worst: f64 = 0.0;
    let mut dump = CsvWriter::new(
        out_file(cfg, "recovered_fluxes.csv")?,
        &["edge", "from", "to", "flux_0", "flux_1", "flux_2"],
    )?;
    for kind in &kinds {
        let g = element_graph(*kind)?;
        let pinv = GraphPinv::new(&g)?;
        let a = g.incidence();
        for trial in 0..1000 {
            let mut rows: Vec<Vec<f64>> = (0..g.n_nodes())
                .map(|_| (0..3).map(|_| rng.next_f64()).collect())
                .collect();
            for c in 0..3 {
                let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / g.n_nodes() as f64;
                for r in rows.iter_mut() {
                    r[c] -= mean;
                }
            }
            let psi = CompatibleResidualSet::from_rows(&g, &rows)?;
            let rec = recover_fluxes(&pinv, &psi);
            worst = worst.max((&a * rec.values() - psi.values()).amax());
            if trial == 0 {
                for (e, &(from, to)) in rec.edges().iter().enumerate() {
                    dump.row_mixed(
                        e,
                        &[
                            from as f64,
                            to as f64,
                            rec.values()[(e, 0)],
                            rec.values()[(e, 1)],
                            rec.values()[(e, 2)],
                        ],
                    )?;
                }
            }
        }
    }
    dump.flush()?;
    let pass = worst <= 1e-12;
    let line = format!(
        "flux-recovery-selftest: max |A f - psi| = {} over {} graphs x 1000 rhs -> {}",
        fmt_f64(worst),
        kinds.len(),
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(RunOutput { summary: vec![line] })
    } else {
        Err(Error::Argument(line))
    }
}
