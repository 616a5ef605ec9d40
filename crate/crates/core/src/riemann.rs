//! 1D fluctuation machinery: the parametrized three-wave "simple" solver in
//! Lagrangian variables, the Roe linearization, dissipative-form fluxes, and
//! an explicit finite-volume step usable in flux or fluctuation form.

use crate::error::{Error, Result};
use crate::gas::{euler_flux_1d, GasState1, IdealGasEos, LagAxial};
use crate::mesh::Grid1D;
use nalgebra::{Matrix3, Vector3};

/// Safety factor on the positivity bound for the simple-solver wave speeds;
/// strict inequalities have to survive roundoff.
pub const WAVE_SPEED_SAFETY: f64 = 1.01;

/// Fluctuations sent to the two cells sharing an interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationPair<const N: usize> {
    pub left: [f64; N],
    pub right: [f64; N],
}

impl<const N: usize> FluctuationPair<N> {
    pub fn sum(&self) -> [f64; N] {
        let mut s = [0.0; N];
        for c in 0..N {
            s[c] = self.left[c] + self.right[c];
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Simple three-wave solver (Lagrangian variables)
// ---------------------------------------------------------------------------

/// Intermediate states and wave speeds of the simple solver; the contact
/// velocity `v_n_star` is the free parameter.
#[derive(Debug, Clone, Copy)]
pub struct SimpleSolverState {
    pub u_l: LagAxial,
    pub u_r: LagAxial,
    pub u_l_star: LagAxial,
    pub u_r_star: LagAxial,
    pub lambda_l: f64,
    pub lambda_r: f64,
    pub v_n_star: f64,
    pub p_l: f64,
    pub p_r: f64,
    pub p_l_star: f64,
    pub p_r_star: f64,
}

/// Wave speeds satisfying the positivity bound
/// `lambda_l >= max(a_l/tau_l, -(v* - v_l)/tau_l)` (and mirrored on the
/// right), amplified by `safety >= 1`.
pub fn wave_speeds(
    u_l: &LagAxial,
    u_r: &LagAxial,
    v_n_star: f64,
    eos: &IdealGasEos,
    safety: f64,
) -> Result<(f64, f64)> {
    let al = u_l.sound_speed(eos)?;
    let ar = u_r.sound_speed(eos)?;
    let ll = (al / u_l.tau).max(-(v_n_star - u_l.vn) / u_l.tau);
    let lr = (ar / u_r.tau).max((v_n_star - u_r.vn) / u_r.tau);
    Ok((safety * ll, safety * lr))
}

/// Solve the two conservation systems across the outer waves in closed form
/// for a given contact velocity.
pub fn simple_solver(
    u_l: &LagAxial,
    u_r: &LagAxial,
    v_n_star: f64,
    eos: &IdealGasEos,
) -> Result<SimpleSolverState> {
    u_l.check_domain()?;
    u_r.check_domain()?;
    let (lambda_l, lambda_r) = wave_speeds(u_l, u_r, v_n_star, eos, WAVE_SPEED_SAFETY)?;
    simple_solver_with_speeds(u_l, u_r, v_n_star, lambda_l, lambda_r, eos)
}

/// Same closed form with externally chosen wave speeds (the nodal solver
/// freezes them across its Picard refresh).
pub fn simple_solver_with_speeds(
    u_l: &LagAxial,
    u_r: &LagAxial,
    v_n_star: f64,
    lambda_l: f64,
    lambda_r: f64,
    eos: &IdealGasEos,
) -> Result<SimpleSolverState> {
    let p_l = u_l.pressure(eos)?;
    let p_r = u_r.pressure(eos)?;

    let p_l_star = p_l - lambda_l * (v_n_star - u_l.vn);
    let p_r_star = p_r + lambda_r * (v_n_star - u_r.vn);
    let tau_l_star = u_l.tau + (v_n_star - u_l.vn) / lambda_l;
    let tau_r_star = u_r.tau - (v_n_star - u_r.vn) / lambda_r;
    // energy equations: lambda (e* - e) +- (p* v* - p v) = 0
    let e_l_star = u_l.e - (p_l_star * v_n_star - p_l * u_l.vn) / lambda_l;
    let e_r_star = u_r.e + (p_r_star * v_n_star - p_r * u_r.vn) / lambda_r;

    let u_l_star = LagAxial::new(tau_l_star, v_n_star, u_l.vt, e_l_star);
    let u_r_star = LagAxial::new(tau_r_star, v_n_star, u_r.vt, e_r_star);
    for (side, s) in [("left", &u_l_star), ("right", &u_r_star)] {
        if !(s.tau > 0.0 && s.specific_internal_energy() > 0.0) {
            // cannot happen when the wave speeds obey the positivity bound
            return Err(Error::InvariantDomain(format!(
                "{side} star state left the invariant domain: tau = {}, eps = {}",
                s.tau,
                s.specific_internal_energy()
            )));
        }
    }

    Ok(SimpleSolverState {
        u_l: *u_l,
        u_r: *u_r,
        u_l_star,
        u_r_star,
        lambda_l,
        lambda_r,
        v_n_star,
        p_l,
        p_r,
        p_l_star,
        p_r_star,
    })
}

/// Godunov-like interface normal velocity
/// `(lambda_l v_l + lambda_r v_r - (p_r - p_l)) / (lambda_l + lambda_r)`.
pub fn face_velocity(
    u_l: &LagAxial,
    u_r: &LagAxial,
    lambda_l: f64,
    lambda_r: f64,
    eos: &IdealGasEos,
) -> Result<f64> {
    if !(lambda_l + lambda_r > 0.0) {
        return Err(Error::Argument("face velocity needs lambda_l + lambda_r > 0".into()));
    }
    let p_l = u_l.pressure(eos)?;
    let p_r = u_r.pressure(eos)?;
    Ok((lambda_l * u_l.vn + lambda_r * u_r.vn) / (lambda_l + lambda_r)
        - (p_r - p_l) / (lambda_l + lambda_r))
}

/// Fluctuations of the simple solver: the left cell collects the negative
/// parts of the wave speeds, the right cell the positive parts. When
/// `v_n_star` is not the face velocity, the standing wave carries a flux
/// jump and the pair no longer telescopes to `f(u_r) - f(u_l)`.
pub fn fluctuations_from_simple(s: &SimpleSolverState) -> FluctuationPair<4> {
    let ul = s.u_l.to_array();
    let uls = s.u_l_star.to_array();
    let urs = s.u_r_star.to_array();
    let ur = s.u_r.to_array();
    let mut left = [0.0; 4];
    let mut right = [0.0; 4];
    for c in 0..4 {
        left[c] = -s.lambda_l * (uls[c] - ul[c]);
        right[c] = s.lambda_r * (ur[c] - urs[c]);
    }
    FluctuationPair { left, right }
}

/// Intermediate fluxes of the simple solver; equal exactly when
/// `v_n_star` equals the face velocity.
pub fn simple_star_fluxes(s: &SimpleSolverState) -> ([f64; 4], [f64; 4]) {
    (
        [-s.v_n_star, s.p_l_star, 0.0, s.p_l_star * s.v_n_star],
        [-s.v_n_star, s.p_r_star, 0.0, s.p_r_star * s.v_n_star],
    )
}

// ---------------------------------------------------------------------------
// Roe linearization (1D Eulerian, gamma law)
// ---------------------------------------------------------------------------

/// Roe-averaged eigenstructure of the 1D Euler flux Jacobian.
#[derive(Debug, Clone)]
pub struct RoeAverage {
    pub u: f64,
    pub h: f64,
    pub a: f64,
    right: Matrix3<f64>,
    left: Matrix3<f64>,
    lambdas: [f64; 3],
}

impl RoeAverage {
    pub fn new(u_l: &GasState1, u_r: &GasState1, eos: &IdealGasEos) -> Result<Self> {
        u_l.check_domain()?;
        u_r.check_domain()?;
        let sl = u_l.rho.sqrt();
        let sr = u_r.rho.sqrt();
        let vl = u_l.velocity();
        let vr = u_r.velocity();
        let hl = (u_l.energy + u_l.pressure(eos)?) / u_l.rho;
        let hr = (u_r.energy + u_r.pressure(eos)?) / u_r.rho;
        let u = (sl * vl + sr * vr) / (sl + sr);
        let h = (sl * hl + sr * hr) / (sl + sr);
        let a2 = (eos.gamma() - 1.0) * (h - 0.5 * u * u);
        if !(a2 > 0.0) {
            return Err(Error::Linearization(format!(
                "Roe average has nonpositive sound speed squared {a2}"
            )));
        }
        let a = a2.sqrt();
        let g1 = eos.gamma() - 1.0;

        let right = Matrix3::new(
            1.0,
            1.0,
            1.0,
            u - a,
            u,
            u + a,
            h - u * a,
            0.5 * u * u,
            h + u * a,
        );
        // analytic inverse of the right-eigenvector matrix
        let b1 = g1 / a2;
        let b2 = b1 * 0.5 * u * u;
        let left = Matrix3::new(
            0.5 * (b2 + u / a),
            -0.5 * (b1 * u + 1.0 / a),
            0.5 * b1,
            1.0 - b2,
            b1 * u,
            -b1,
            0.5 * (b2 - u / a),
            -0.5 * (b1 * u - 1.0 / a),
            0.5 * b1,
        );
        Ok(RoeAverage {
            u,
            h,
            a,
            right,
            left,
            lambdas: [u - a, u, u + a],
        })
    }

    fn assemble(&self, f: impl Fn(f64) -> f64) -> Matrix3<f64> {
        let d = Matrix3::from_diagonal(&Vector3::new(
            f(self.lambdas[0]),
            f(self.lambdas[1]),
            f(self.lambdas[2]),
        ));
        self.right * d * self.left
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.assemble(|l| l)
    }

    pub fn matrix_abs(&self) -> Matrix3<f64> {
        self.assemble(f64::abs)
    }

    pub fn matrix_plus(&self) -> Matrix3<f64> {
        self.assemble(|l| 0.5 * (l + l.abs()))
    }

    pub fn matrix_minus(&self) -> Matrix3<f64> {
        self.assemble(|l| 0.5 * (l - l.abs()))
    }
}

/// Roe interface flux `(f_l + f_r - |Abar| (u_r - u_l)) / 2`.
pub fn roe_flux(u_l: &GasState1, u_r: &GasState1, eos: &IdealGasEos) -> Result<[f64; 3]> {
    let roe = RoeAverage::new(u_l, u_r, eos)?;
    let fl = euler_flux_1d(u_l, eos)?;
    let fr = euler_flux_1d(u_r, eos)?;
    let du = Vector3::from_iterator(
        u_r.to_array().iter().zip(u_l.to_array()).map(|(r, l)| r - l),
    );
    let diss = roe.matrix_abs() * du;
    Ok([
        0.5 * (fl[0] + fr[0] - diss[0]),
        0.5 * (fl[1] + fr[1] - diss[1]),
        0.5 * (fl[2] + fr[2] - diss[2]),
    ])
}

/// Upwind fluctuations `Abar^- du` (left cell) and `Abar^+ du` (right cell).
pub fn roe_fluctuations(
    u_l: &GasState1,
    u_r: &GasState1,
    eos: &IdealGasEos,
) -> Result<FluctuationPair<3>> {
    let roe = RoeAverage::new(u_l, u_r, eos)?;
    let du = Vector3::from_iterator(
        u_r.to_array().iter().zip(u_l.to_array()).map(|(r, l)| r - l),
    );
    let minus = roe.matrix_minus() * du;
    let plus = roe.matrix_plus() * du;
    Ok(FluctuationPair {
        left: [minus[0], minus[1], minus[2]],
        right: [plus[0], plus[1], plus[2]],
    })
}

// ---------------------------------------------------------------------------
// Dissipative-form fluxes
// ---------------------------------------------------------------------------

/// `fhat = (f_l + f_r - Q (u_r - u_l)) / 2` with the matching fluctuation
/// split; conservation holds by construction for any viscosity matrix.
pub fn dissipative_flux(
    u_l: &GasState1,
    u_r: &GasState1,
    q: &Matrix3<f64>,
    eos: &IdealGasEos,
) -> Result<([f64; 3], FluctuationPair<3>)> {
    let fl = euler_flux_1d(u_l, eos)?;
    let fr = euler_flux_1d(u_r, eos)?;
    let du = Vector3::from_iterator(
        u_r.to_array().iter().zip(u_l.to_array()).map(|(r, l)| r - l),
    );
    let qdu = q * du;
    let mut flux = [0.0; 3];
    let mut left = [0.0; 3];
    let mut right = [0.0; 3];
    for c in 0..3 {
        flux[c] = 0.5 * (fl[c] + fr[c] - qdu[c]);
        left[c] = 0.5 * (fr[c] - fl[c] - qdu[c]);
        right[c] = 0.5 * (fr[c] - fl[c] + qdu[c]);
    }
    Ok((flux, FluctuationPair { left, right }))
}

/// Rusanov flux: scalar viscosity at the maximal signal speed of the pair.
pub fn rusanov_flux(
    u_l: &GasState1,
    u_r: &GasState1,
    eos: &IdealGasEos,
) -> Result<([f64; 3], FluctuationPair<3>)> {
    let al = eos.sound_speed(u_l.rho, u_l.pressure(eos)?)?;
    let ar = eos.sound_speed(u_r.rho, u_r.pressure(eos)?)?;
    let alpha = (u_l.velocity().abs() + al).max(u_r.velocity().abs() + ar);
    dissipative_flux(u_l, u_r, &(Matrix3::identity() * alpha), eos)
}

// ---------------------------------------------------------------------------
// Explicit 1D finite-volume step
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc1d {
    Periodic,
    Transmissive,
    /// Solid walls at both ends (mirror state with reflected velocity).
    Reflecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme1d {
    Rusanov,
    Roe,
}

/// Update form: accumulate interface fluxes or per-cell fluctuations. Both
/// are algebraically identical; keeping the two paths makes the duality
/// testable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateForm {
    Flux,
    Fluctuation,
}

fn ghost(states: &[GasState1], i: isize, bc: Bc1d) -> GasState1 {
    let n = states.len() as isize;
    match bc {
        Bc1d::Periodic => states[(i.rem_euclid(n)) as usize],
        Bc1d::Transmissive => states[i.clamp(0, n - 1) as usize],
        Bc1d::Reflecting => {
            let j = if i < 0 { -1 - i } else { 2 * n - 1 - i };
            let s = states[j as usize];
            GasState1::new(s.rho, -s.mom, s.energy)
        }
    }
}

/// Maximal stable time step `cfl * min dx / max signal speed`.
pub fn max_dt_1d(states: &[GasState1], grid: &Grid1D, eos: &IdealGasEos, cfl: f64) -> Result<f64> {
    let mut speed: f64 = 0.0;
    for s in states {
        s.check_domain()?;
        let a = eos.sound_speed(s.rho, s.pressure(eos)?)?;
        speed = speed.max(s.velocity().abs() + a);
    }
    Ok(cfl * grid.min_width() / speed)
}

/// One forward-Euler step of the Eulerian 1D scheme.
pub fn fv1d_step(
    states: &[GasState1],
    grid: &Grid1D,
    dt: f64,
    scheme: Scheme1d,
    bc: Bc1d,
    form: UpdateForm,
    eos: &IdealGasEos,
) -> Result<Vec<GasState1>> {
    let n = states.len();
    if n != grid.n_cells() {
        return Err(Error::Argument(format!("{n} states on a {} cell grid", grid.n_cells())));
    }
    let stable = max_dt_1d(states, grid, eos, 1.0)?;
    if dt > stable {
        return Err(Error::TimeStep(format!(
            "dt = {dt:.3e} exceeds the stability bound {stable:.3e}"
        )));
    }

    // interface data i = 0..n, between ghost-extended cells i-1 and i
    let mut fluxes = vec![[0.0; 3]; n + 1];
    let mut flucts = vec![FluctuationPair { left: [0.0; 3], right: [0.0; 3] }; n + 1];
    for i in 0..=n {
        let ul = ghost(states, i as isize - 1, bc);
        let ur = ghost(states, i as isize, bc);
        let (f, phi) = match scheme {
            Scheme1d::Rusanov => rusanov_flux(&ul, &ur, eos)?,
            Scheme1d::Roe => {
                let f = roe_flux(&ul, &ur, eos)?;
                let phi = roe_fluctuations(&ul, &ur, eos)?;
                (f, phi)
            }
        };
        fluxes[i] = f;
        flucts[i] = phi;
    }

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let dx = grid.cell_width(i);
        let u = states[i].to_array();
        let mut du = [0.0; 3];
        match form {
            UpdateForm::Flux => {
                for c in 0..3 {
                    du[c] = -(dt / dx) * (fluxes[i + 1][c] - fluxes[i][c]);
                }
            }
            UpdateForm::Fluctuation => {
                // cell i receives the left fluctuation of interface i+1 and
                // the right fluctuation of interface i
                for c in 0..3 {
                    du[c] = -(dt / dx) * (flucts[i + 1].left[c] + flucts[i].right[c]);
                }
            }
        }
        let new = GasState1::new(u[0] + du[0], u[1] + du[1], u[2] + du[2]);
        new.check_domain().map_err(|_| {
            Error::InvariantDomain(format!(
                "cell {i} left the invariant domain after the update (rho = {}, eps = {})",
                new.rho,
                new.specific_internal_energy()
            ))
        })?;
        out.push(new);
    }
    Ok(out)
}

/// One forward-Euler step of the 1D Lagrangian scheme in mass coordinates,
/// using the simple solver with the conservative contact choice
/// `v* = vbar`. `masses[i]` is the constant cell mass.
pub fn fv1d_lagrangian_step(
    states: &[LagAxial],
    masses: &[f64],
    dt: f64,
    bc: Bc1d,
    eos: &IdealGasEos,
) -> Result<Vec<LagAxial>> {
    let n = states.len();
    if masses.len() != n {
        return Err(Error::Argument("masses and states lengths differ".into()));
    }
    let ghost_lag = |i: isize| -> LagAxial {
        match bc {
            Bc1d::Periodic => states[i.rem_euclid(n as isize) as usize],
            Bc1d::Transmissive => states[i.clamp(0, n as isize - 1) as usize],
            Bc1d::Reflecting => {
                let j = if i < 0 { -1 - i } else { 2 * n as isize - 1 - i };
                let s = states[j as usize];
                LagAxial::new(s.tau, -s.vn, s.vt, s.e)
            }
        }
    };
    let mut fluxes = vec![[0.0; 4]; n + 1];
    let mut rate = vec![0.0; n];
    for i in 0..=n {
        let ul = ghost_lag(i as isize - 1);
        let ur = ghost_lag(i as isize);
        // provisional speeds, then the conservative contact velocity
        let (l0, r0) = wave_speeds(&ul, &ur, 0.5 * (ul.vn + ur.vn), eos, WAVE_SPEED_SAFETY)?;
        let vbar = face_velocity(&ul, &ur, l0, r0, eos)?;
        let s = simple_solver(&ul, &ur, vbar, eos)?;
        let (fl, _) = simple_star_fluxes(&s);
        fluxes[i] = fl;
        if i < n {
            rate[i] += s.lambda_r / masses[i];
        }
        if i > 0 {
            rate[i - 1] += s.lambda_l / masses[i - 1];
        }
    }
    let max_rate = rate.iter().fold(0.0f64, |a, &b| a.max(b));
    if dt * max_rate > 1.0 {
        return Err(Error::TimeStep(format!(
            "dt = {dt:.3e} exceeds the Lagrangian bound {:.3e}",
            1.0 / max_rate
        )));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let u = states[i].to_array();
        let mut a = [0.0; 4];
        for c in 0..4 {
            a[c] = u[c] - dt / masses[i] * (fluxes[i + 1][c] - fluxes[i][c]);
        }
        let s = LagAxial::from_array(a);
        s.check_domain()?;
        out.push(s);
    }
    Ok(out)
}
