//! Ideal-gas thermodynamics, Euler fluxes in Eulerian and Lagrangian form,
//! entropy pairs, and an exact Riemann solver used as a test oracle.
//!
//! Conventions fixed here and relied on everywhere else:
//! - `c_v = 1` and all entropy additive constants are zero, so the specific
//!   entropy is `eta = ln p - gamma ln rho` and the temperature is
//!   `theta = eps`;
//! - the entropy is the *physical* (concave) one; inequalities elsewhere keep
//!   that orientation;
//! - Lagrangian entropy pair is `(eta, 0)`, Eulerian pair is
//!   `(rho eta, rho eta v)`.

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Polytropic (gamma-law) equation of state.
#[derive(Debug, Clone, Copy)]
pub struct IdealGasEos {
    gamma: f64,
}

impl IdealGasEos {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::Argument(format!(
                "polytropic index must satisfy gamma > 1, got {gamma}"
            )));
        }
        Ok(IdealGasEos { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `p = (gamma - 1) rho eps`.
    pub fn pressure(&self, rho: f64, eps: f64) -> Result<f64> {
        if !(rho > 0.0 && eps > 0.0) {
            return Err(Error::InvariantDomain(format!(
                "pressure needs rho > 0 and eps > 0, got rho = {rho}, eps = {eps}"
            )));
        }
        Ok((self.gamma - 1.0) * rho * eps)
    }

    /// `a = sqrt(gamma p / rho)`.
    pub fn sound_speed(&self, rho: f64, p: f64) -> Result<f64> {
        if !(rho > 0.0 && p > 0.0) {
            return Err(Error::InvariantDomain(format!(
                "sound speed needs rho > 0 and p > 0, got rho = {rho}, p = {p}"
            )));
        }
        Ok((self.gamma * p / rho).sqrt())
    }

    /// Temperature of the calorically perfect gas with `c_v = 1`.
    pub fn temperature(&self, eps: f64) -> f64 {
        eps
    }

    /// Specific entropy `eta = ln p - gamma ln rho` (constants dropped).
    pub fn specific_entropy(&self, rho: f64, p: f64) -> f64 {
        p.ln() - self.gamma * rho.ln()
    }
}

// ---------------------------------------------------------------------------
// Eulerian states
// ---------------------------------------------------------------------------

/// Conserved Eulerian state in one space dimension: `(rho, rho v, E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasState1 {
    pub rho: f64,
    pub mom: f64,
    pub energy: f64,
}

impl GasState1 {
    pub fn new(rho: f64, mom: f64, energy: f64) -> Self {
        GasState1 { rho, mom, energy }
    }

    pub fn from_primitive(rho: f64, v: f64, p: f64, eos: &IdealGasEos) -> Self {
        let eps = p / ((eos.gamma() - 1.0) * rho);
        GasState1 {
            rho,
            mom: rho * v,
            energy: rho * (eps + 0.5 * v * v),
        }
    }

    pub fn velocity(&self) -> f64 {
        self.mom / self.rho
    }

    pub fn specific_internal_energy(&self) -> f64 {
        self.energy / self.rho - 0.5 * self.velocity().powi(2)
    }

    pub fn pressure(&self, eos: &IdealGasEos) -> Result<f64> {
        eos.pressure(self.rho, self.specific_internal_energy())
    }

    pub fn check_domain(&self) -> Result<()> {
        if self.rho > 0.0 && self.specific_internal_energy() > 0.0 {
            Ok(())
        } else {
            Err(Error::InvariantDomain(format!(
                "rho = {}, eps = {}",
                self.rho,
                self.specific_internal_energy()
            )))
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.rho, self.mom, self.energy]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        GasState1::new(a[0], a[1], a[2])
    }
}

/// Conserved Eulerian state in two space dimensions: `(rho, rho v, E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasState2 {
    pub rho: f64,
    pub mom: Vec2,
    pub energy: f64,
}

impl GasState2 {
    pub fn new(rho: f64, mom: Vec2, energy: f64) -> Self {
        GasState2 { rho, mom, energy }
    }

    pub fn from_primitive(rho: f64, v: Vec2, p: f64, eos: &IdealGasEos) -> Self {
        let eps = p / ((eos.gamma() - 1.0) * rho);
        GasState2 {
            rho,
            mom: rho * v,
            energy: rho * (eps + 0.5 * v.dot(v)),
        }
    }

    pub fn velocity(&self) -> Vec2 {
        self.mom / self.rho
    }

    pub fn specific_internal_energy(&self) -> f64 {
        let v = self.velocity();
        self.energy / self.rho - 0.5 * v.dot(v)
    }

    pub fn pressure(&self, eos: &IdealGasEos) -> Result<f64> {
        eos.pressure(self.rho, self.specific_internal_energy())
    }

    pub fn check_domain(&self) -> Result<()> {
        if self.rho > 0.0 && self.specific_internal_energy() > 0.0 {
            Ok(())
        } else {
            Err(Error::InvariantDomain(format!(
                "rho = {}, eps = {}",
                self.rho,
                self.specific_internal_energy()
            )))
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.rho, self.mom.x, self.mom.y, self.energy]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        GasState2::new(a[0], Vec2::new(a[1], a[2]), a[3])
    }
}

// ---------------------------------------------------------------------------
// Lagrangian states
// ---------------------------------------------------------------------------

/// Conserved Lagrangian state in two dimensions: `(tau, v, e)` per unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagState {
    pub tau: f64,
    pub v: Vec2,
    pub e: f64,
}

impl LagState {
    pub fn new(tau: f64, v: Vec2, e: f64) -> Self {
        LagState { tau, v, e }
    }

    pub fn from_primitive(rho: f64, v: Vec2, p: f64, eos: &IdealGasEos) -> Self {
        let eps = p / ((eos.gamma() - 1.0) * rho);
        LagState {
            tau: 1.0 / rho,
            v,
            e: eps + 0.5 * v.dot(v),
        }
    }

    pub fn specific_internal_energy(&self) -> f64 {
        self.e - 0.5 * self.v.dot(self.v)
    }

    pub fn pressure(&self, eos: &IdealGasEos) -> Result<f64> {
        eos.pressure(1.0 / self.tau, self.specific_internal_energy())
    }

    pub fn sound_speed(&self, eos: &IdealGasEos) -> Result<f64> {
        let p = self.pressure(eos)?;
        eos.sound_speed(1.0 / self.tau, p)
    }

    pub fn check_domain(&self) -> Result<()> {
        if self.tau > 0.0 && self.specific_internal_energy() > 0.0 {
            Ok(())
        } else {
            Err(Error::InvariantDomain(format!(
                "tau = {}, eps = {}",
                self.tau,
                self.specific_internal_energy()
            )))
        }
    }

    /// Rotate into the frame of a unit normal: `(tau, v.n, v.t, e)` where the
    /// tangent is `n` turned counterclockwise.
    pub fn along(&self, n: Vec2) -> LagAxial {
        let t = Vec2::new(-n.y, n.x);
        LagAxial {
            tau: self.tau,
            vn: self.v.dot(n),
            vt: self.v.dot(t),
            e: self.e,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.tau, self.v.x, self.v.y, self.e]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        LagState::new(a[0], Vec2::new(a[1], a[2]), a[3])
    }
}

/// Lagrangian state resolved along a face normal: `(tau, v_n, v_t, e)`.
///
/// The 1D Lagrangian machinery works on this type; a genuinely one-dimensional
/// state simply carries `vt = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagAxial {
    pub tau: f64,
    pub vn: f64,
    pub vt: f64,
    pub e: f64,
}

impl LagAxial {
    pub fn new(tau: f64, vn: f64, vt: f64, e: f64) -> Self {
        LagAxial { tau, vn, vt, e }
    }

    pub fn from_primitive(rho: f64, vn: f64, p: f64, eos: &IdealGasEos) -> Self {
        let eps = p / ((eos.gamma() - 1.0) * rho);
        LagAxial {
            tau: 1.0 / rho,
            vn,
            vt: 0.0,
            e: eps + 0.5 * vn * vn,
        }
    }

    pub fn specific_internal_energy(&self) -> f64 {
        self.e - 0.5 * (self.vn * self.vn + self.vt * self.vt)
    }

    pub fn pressure(&self, eos: &IdealGasEos) -> Result<f64> {
        eos.pressure(1.0 / self.tau, self.specific_internal_energy())
    }

    pub fn sound_speed(&self, eos: &IdealGasEos) -> Result<f64> {
        let p = self.pressure(eos)?;
        eos.sound_speed(1.0 / self.tau, p)
    }

    pub fn check_domain(&self) -> Result<()> {
        if self.tau > 0.0 && self.specific_internal_energy() > 0.0 {
            Ok(())
        } else {
            Err(Error::InvariantDomain(format!(
                "tau = {}, eps = {}",
                self.tau,
                self.specific_internal_energy()
            )))
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.tau, self.vn, self.vt, self.e]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        LagAxial::new(a[0], a[1], a[2], a[3])
    }

    /// Physical Lagrangian flux along the normal: `(-v_n, p, 0, p v_n)`.
    pub fn flux(&self, eos: &IdealGasEos) -> Result<[f64; 4]> {
        let p = self.pressure(eos)?;
        Ok([-self.vn, p, 0.0, p * self.vn])
    }
}

// ---------------------------------------------------------------------------
// Fluxes
// ---------------------------------------------------------------------------

/// 1D Eulerian flux `(rho v, rho v^2 + p, (E + p) v)`.
pub fn euler_flux_1d(u: &GasState1, eos: &IdealGasEos) -> Result<[f64; 3]> {
    u.check_domain()?;
    let v = u.velocity();
    let p = u.pressure(eos)?;
    Ok([u.mom, u.mom * v + p, (u.energy + p) * v])
}

/// 2D Eulerian flux projected on a direction `n` (not necessarily unit).
pub fn euler_flux_n(u: &GasState2, n: Vec2, eos: &IdealGasEos) -> Result<[f64; 4]> {
    u.check_domain()?;
    let v = u.velocity();
    let p = u.pressure(eos)?;
    let vn = v.dot(n);
    Ok([
        u.rho * vn,
        u.mom.x * vn + p * n.x,
        u.mom.y * vn + p * n.y,
        (u.energy + p) * vn,
    ])
}

/// Lagrangian normal flux `(-v.n, p n, p v.n)` in cell-frame components
/// `(tau, v_x, v_y, e)`.
pub fn lag_flux_n(u: &LagState, n: Vec2, p: f64) -> [f64; 4] {
    let vn = u.v.dot(n);
    [-vn, p * n.x, p * n.y, p * vn]
}

// ---------------------------------------------------------------------------
// Entropy pairs
// ---------------------------------------------------------------------------

/// Entropy, entropy variables and entropy flux at one state.
#[derive(Debug, Clone)]
pub struct EntropyEval {
    /// Entropy value: specific entropy `eta` (Lagrangian) or entropy density
    /// `rho eta` (Eulerian).
    pub eta: f64,
    /// Entropy variables `d eta / d u` in the matching conserved layout.
    pub w: [f64; 4],
    /// Entropy flux; zero for the Lagrangian pair.
    pub g: Vec2,
}

/// Lagrangian entropy pair `(eta, 0)` with `w = (p, -v, 1) / theta`.
pub fn entropy_pair_lag(u: &LagState, eos: &IdealGasEos) -> Result<EntropyEval> {
    u.check_domain()?;
    let eps = u.specific_internal_energy();
    let p = u.pressure(eos)?;
    let theta = eos.temperature(eps);
    Ok(EntropyEval {
        eta: eos.specific_entropy(1.0 / u.tau, p),
        w: [p / theta, -u.v.x / theta, -u.v.y / theta, 1.0 / theta],
        g: Vec2::ZERO,
    })
}

/// Same pair for a face-aligned state; the `w` layout is `(tau, v_n, v_t, e)`.
pub fn entropy_pair_axial(u: &LagAxial, eos: &IdealGasEos) -> Result<EntropyEval> {
    u.check_domain()?;
    let eps = u.specific_internal_energy();
    let p = u.pressure(eos)?;
    let theta = eos.temperature(eps);
    Ok(EntropyEval {
        eta: eos.specific_entropy(1.0 / u.tau, p),
        w: [p / theta, -u.vn / theta, -u.vt / theta, 1.0 / theta],
        g: Vec2::ZERO,
    })
}

/// Eulerian entropy pair `(rho eta, rho eta v)`.
pub fn entropy_pair_euler(u: &GasState2, eos: &IdealGasEos) -> Result<EntropyEval> {
    u.check_domain()?;
    let v = u.velocity();
    let eps = u.specific_internal_energy();
    let theta = eos.temperature(eps);
    let p = u.pressure(eos)?;
    let eta = eos.specific_entropy(u.rho, p);
    Ok(EntropyEval {
        eta: u.rho * eta,
        w: [
            eta - eos.gamma() + 0.5 * v.dot(v) / theta,
            -v.x / theta,
            -v.y / theta,
            1.0 / theta,
        ],
        g: u.rho * eta * v,
    })
}

// ---------------------------------------------------------------------------
// Exact Riemann solver (gamma-law, 1D) - test oracle
// ---------------------------------------------------------------------------

/// Primitive 1D state used by the exact solver.
#[derive(Debug, Clone, Copy)]
pub struct Primitive1 {
    pub rho: f64,
    pub v: f64,
    pub p: f64,
}

/// Self-similar exact solution of the 1D Riemann problem for a gamma-law gas.
#[derive(Debug, Clone)]
pub struct ExactRiemann {
    pub left: Primitive1,
    pub right: Primitive1,
    pub gamma: f64,
    pub p_star: f64,
    pub v_star: f64,
    pub rho_star_l: f64,
    pub rho_star_r: f64,
}

fn star_side_fn(p: f64, side: &Primitive1, gamma: f64) -> (f64, f64) {
    // Returns (f, f') for one side of the pressure equation.
    let a = (gamma * side.p / side.rho).sqrt();
    if p > side.p {
        // shock branch
        let ak = 2.0 / ((gamma + 1.0) * side.rho);
        let bk = (gamma - 1.0) / (gamma + 1.0) * side.p;
        let sq = (ak / (p + bk)).sqrt();
        let f = (p - side.p) * sq;
        let df = sq * (1.0 - 0.5 * (p - side.p) / (p + bk));
        (f, df)
    } else {
        // rarefaction branch
        let ex = (gamma - 1.0) / (2.0 * gamma);
        let pr = p / side.p;
        let f = 2.0 * a / (gamma - 1.0) * (pr.powf(ex) - 1.0);
        let df = 1.0 / (side.rho * a) * pr.powf(-(gamma + 1.0) / (2.0 * gamma));
        (f, df)
    }
}

fn pressure_fn(p: f64, left: &Primitive1, right: &Primitive1, gamma: f64) -> f64 {
    let (fl, _) = star_side_fn(p, left, gamma);
    let (fr, _) = star_side_fn(p, right, gamma);
    fl + fr + (right.v - left.v)
}

impl ExactRiemann {
    /// Newton iteration on the star pressure, to a 1e-12 relative residual.
    pub fn solve(left: Primitive1, right: Primitive1, eos: &IdealGasEos) -> Result<Self> {
        let gamma = eos.gamma();
        for (name, s) in [("left", &left), ("right", &right)] {
            if !(s.rho > 0.0 && s.p > 0.0) {
                return Err(Error::InvariantDomain(format!(
                    "{name} state has rho = {}, p = {}",
                    s.rho, s.p
                )));
            }
        }
        let al = (gamma * left.p / left.rho).sqrt();
        let ar = (gamma * right.p / right.rho).sqrt();
        if 2.0 * (al + ar) / (gamma - 1.0) <= right.v - left.v {
            return Err(Error::InvariantDomain(format!(
                "vacuum forms: velocity gap {} exceeds 2(a_l + a_r)/(gamma - 1) = {}",
                right.v - left.v,
                2.0 * (al + ar) / (gamma - 1.0)
            )));
        }

        // Two-rarefaction guess; robust enough as a Newton start for gas tests.
        let z = (gamma - 1.0) / (2.0 * gamma);
        let guess = ((al + ar - 0.5 * (gamma - 1.0) * (right.v - left.v))
            / (al / left.p.powf(z) + ar / right.p.powf(z)))
        .powf(1.0 / z);
        let mut p = guess.max(1e-14);
        for _ in 0..100 {
            let (fl, dfl) = star_side_fn(p, &left, gamma);
            let (fr, dfr) = star_side_fn(p, &right, gamma);
            let f = fl + fr + (right.v - left.v);
            let dp = f / (dfl + dfr);
            let p_new = (p - dp).max(1e-14 * p);
            let change = (p_new - p).abs() / (0.5 * (p_new + p));
            p = p_new;
            if change < 1e-14 || f.abs() < 1e-12 * (1.0 + p) {
                break;
            }
        }
        let (fl, _) = star_side_fn(p, &left, gamma);
        let (fr, _) = star_side_fn(p, &right, gamma);
        let v_star = 0.5 * (left.v + right.v) + 0.5 * (fr - fl);

        let star_density = |side: &Primitive1| -> f64 {
            let g = gamma;
            if p > side.p {
                let r = p / side.p;
                side.rho * (r + (g - 1.0) / (g + 1.0)) / ((g - 1.0) / (g + 1.0) * r + 1.0)
            } else {
                side.rho * (p / side.p).powf(1.0 / g)
            }
        };

        Ok(ExactRiemann {
            left,
            right,
            gamma,
            p_star: p,
            v_star,
            rho_star_l: star_density(&left),
            rho_star_r: star_density(&right),
        })
    }

    /// Bisection on the same pressure function; independent cross-check.
    pub fn star_pressure_bisection(
        left: Primitive1,
        right: Primitive1,
        eos: &IdealGasEos,
    ) -> Result<f64> {
        let gamma = eos.gamma();
        let mut lo = 1e-12;
        let mut hi = 100.0 * left.p.max(right.p);
        while pressure_fn(hi, &left, &right, gamma) < 0.0 {
            hi *= 10.0;
            if hi > 1e300 {
                return Err(Error::Argument("bisection bracket blew up".into()));
            }
        }
        if pressure_fn(lo, &left, &right, gamma) > 0.0 {
            return Err(Error::InvariantDomain("vacuum forms".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pressure_fn(mid, &left, &right, gamma) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Sample the self-similar solution at `xi = x / t`.
    pub fn sample(&self, xi: f64) -> Primitive1 {
        let g = self.gamma;
        if xi <= self.v_star {
            // left of the contact
            let s = &self.left;
            let a = (g * s.p / s.rho).sqrt();
            if self.p_star > s.p {
                let shock_speed =
                    s.v - a * ((g + 1.0) / (2.0 * g) * self.p_star / s.p + (g - 1.0) / (2.0 * g))
                        .sqrt();
                if xi < shock_speed {
                    *s
                } else {
                    Primitive1 {
                        rho: self.rho_star_l,
                        v: self.v_star,
                        p: self.p_star,
                    }
                }
            } else {
                let a_star = a * (self.p_star / s.p).powf((g - 1.0) / (2.0 * g));
                let head = s.v - a;
                let tail = self.v_star - a_star;
                if xi < head {
                    *s
                } else if xi > tail {
                    Primitive1 {
                        rho: self.rho_star_l,
                        v: self.v_star,
                        p: self.p_star,
                    }
                } else {
                    let v = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * s.v + xi);
                    let afan = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * (s.v - xi));
                    let rho = s.rho * (afan / a).powf(2.0 / (g - 1.0));
                    let p = s.p * (afan / a).powf(2.0 * g / (g - 1.0));
                    Primitive1 { rho, v, p }
                }
            }
        } else {
            // right of the contact
            let s = &self.right;
            let a = (g * s.p / s.rho).sqrt();
            if self.p_star > s.p {
                let shock_speed =
                    s.v + a * ((g + 1.0) / (2.0 * g) * self.p_star / s.p + (g - 1.0) / (2.0 * g))
                        .sqrt();
                if xi > shock_speed {
                    *s
                } else {
                    Primitive1 {
                        rho: self.rho_star_r,
                        v: self.v_star,
                        p: self.p_star,
                    }
                }
            } else {
                let a_star = a * (self.p_star / s.p).powf((g - 1.0) / (2.0 * g));
                let head = s.v + a;
                let tail = self.v_star + a_star;
                if xi > head {
                    *s
                } else if xi < tail {
                    Primitive1 {
                        rho: self.rho_star_r,
                        v: self.v_star,
                        p: self.p_star,
                    }
                } else {
                    let v = 2.0 / (g + 1.0) * (-a + 0.5 * (g - 1.0) * s.v + xi);
                    let afan = 2.0 / (g + 1.0) * (a - 0.5 * (g - 1.0) * (s.v - xi));
                    let rho = s.rho * (afan / a).powf(2.0 / (g - 1.0));
                    let p = s.p * (afan / a).powf(2.0 * g / (g - 1.0));
                    Primitive1 { rho, v, p }
                }
            }
        }
    }
}
