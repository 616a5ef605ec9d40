//! Mesh-refinement studies: L1 errors and observed orders across levels.

use crate::config::{Problem, RunConfig, SchemeId};
use crate::problems::steady_advection_error;
use resdist::gas::{ExactRiemann, GasState1, IdealGasEos, Primitive1};
use resdist::io::{fmt_f64, CsvWriter};
use resdist::mesh::{Grid1D, TriMesh};
use resdist::rd::{rd_step_scalar, scalar_max_dt, RdBc, ScalarScheme};
use resdist::riemann::{fv1d_step, max_dt_1d, Bc1d, Scheme1d, UpdateForm};
use resdist::{Error, Vec2};

pub struct RateRow {
    pub level: usize,
    pub error: f64,
    pub order: Option<f64>,
}

fn sod_error(cfg: &RunConfig, n: usize) -> Result<f64, Error> {
    let eos = IdealGasEos::new(cfg.gamma)?;
    let scheme = match cfg.scheme {
        Some(SchemeId::Roe) => Scheme1d::Roe,
        _ => Scheme1d::Rusanov,
    };
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
    let mut t = 0.0;
    while t < cfg.t_end {
        let dt = max_dt_1d(&states, &grid, &eos, cfg.cfl)?.min(cfg.t_end - t);
        states = fv1d_step(&states, &grid, dt, scheme, Bc1d::Transmissive, UpdateForm::Flux, &eos)?;
        t += dt;
    }
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
    Ok(l1)
}

fn advection_error(cfg: &RunConfig, n: usize) -> Result<f64, Error> {
    let mesh = TriMesh::periodic_unit_square(n)?;
    let dual = mesh.dual_cells()?;
    let a = Vec2::new(1.0, 0.5);
    let adv = move |_: Vec2| a;
    let scheme = match cfg.scheme {
        Some(SchemeId::Lxf) => ScalarScheme::LaxFriedrichs,
        Some(SchemeId::Blended) => ScalarScheme::Blended,
        _ => ScalarScheme::NScheme,
    };
    let profile = |x: Vec2| (2.0 * std::f64::consts::PI * (x.x + x.y)).sin();
    let mut u: Vec<f64> = (0..mesh.n_vertices())
        .map(|v| profile(mesh.vertices[mesh.class_of(v)]))
        .collect();
    let mut t = 0.0;
    while t < cfg.t_end {
        let dt = scalar_max_dt(&mesh, &dual, &adv, cfg.cfl).min(cfg.t_end - t);
        u = rd_step_scalar(&mesh, &dual, &u, &adv, scheme, dt, &RdBc::Periodic, cfg.theta_jump)?;
        t += dt;
    }
    let mut l1 = 0.0;
    for v in 0..mesh.n_vertices() {
        if mesh.class_of(v) == v {
            let exact = profile(mesh.vertices[v] - a * cfg.t_end);
            l1 += dual.areas[v] * (u[v] - exact).abs();
        }
    }
    Ok(l1)
}

/// Run the configured problem across mesh levels; rows carry observed orders.
pub fn convergence(cfg: &RunConfig, levels: &[usize]) -> Result<Vec<RateRow>, Error> {
    if levels.len() < 2 {
        return Err(Error::Argument(format!(
            "convergence needs at least 2 levels, got {}",
            levels.len()
        )));
    }
    let mut errors = Vec::with_capacity(levels.len());
    for &n in levels {
        let e = match cfg.problem {
            Problem::Sod1d => sod_error(cfg, n)?,
            Problem::Advection2d => advection_error(cfg, n)?,
            Problem::AdvectionSteady => {
                let scheme = match cfg.scheme {
                    Some(SchemeId::Lxf) => ScalarScheme::LaxFriedrichs,
                    Some(SchemeId::N) => ScalarScheme::NScheme,
                    _ => ScalarScheme::Blended,
                };
                steady_advection_error(n, scheme, cfg.cfl, cfg.theta_jump)?.0
            }
            other => {
                return Err(Error::Argument(format!(
                    "no refinement study is defined for problem {other:?}"
                )))
            }
        };
        errors.push(e);
    }
    let mut rows = Vec::with_capacity(levels.len());
    for (i, (&n, &e)) in levels.iter().zip(errors.iter()).enumerate() {
        let order = if i > 0 {
            let ratio = (levels[i] as f64) / (levels[i - 1] as f64);
            Some((errors[i - 1] / e).ln() / ratio.ln())
        } else {
            None
        };
        rows.push(RateRow { level: n, error: e, order });
    }
    Ok(rows)
}

pub fn write_rate_table(
    cfg: &RunConfig,
    rows: &[RateRow],
) -> Result<Vec<String>, Error> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let file = std::fs::File::create(cfg.output_dir.join("rates.csv"))?;
    let mut csv = CsvWriter::new(std::io::BufWriter::new(file), &["level", "l1_error", "order"])?;
    let mut lines = Vec::new();
    for row in rows {
        csv.row(&[row.level as f64, row.error, row.order.unwrap_or(f64::NAN)])?;
        lines.push(match row.order {
            Some(o) => format!(
                "level {:>5}: L1 = {} order = {:.3}",
                row.level,
                fmt_f64(row.error),
                o
            ),
            None => format!("level {:>5}: L1 = {}", row.level, fmt_f64(row.error)),
        });
    }
    csv.flush()?;
    Ok(lines)
}
