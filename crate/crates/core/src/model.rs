//! Potentials, energies and first integrals.
//!
//! Unless stated otherwise, states are in the standardized chart: the primary
//! (mass `m1`) at the origin, the secondary (mass `m2`) at `(0, -2h)` and the
//! Hooke center at `(0, -h)`, with the Euclidean metric.
//!
//! A state of a curved system carries the chart velocity with respect to the
//! curved system's own time. Central projection turns curved orbits into
//! reparametrized orbits of a Euclidean problem; [`to_partner`] rescales the
//! velocity to that Euclidean time, and all Kepler quantities (`E_Kep`, `C`,
//! `A`, `D`, `K`) of a curved state are those of its partner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{conformal_factor, cross, dot, Frame, PhaseState, Space, Vec2};

/// Distance to a center below which potentials refuse to evaluate.
pub const SINGULAR_RADIUS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m1: f64,
    pub m2: f64,
    #[serde(default)]
    pub f: f64,
    pub a: f64,
    pub space: Space,
}

impl ModelParams {
    pub fn new(m1: f64, m2: f64, f: f64, a: f64, space: Space) -> Result<Self> {
        let p = Self { m1, m2, f, a, space };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("m1", self.m1), ("m2", self.m2), ("f", self.f)] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {x} is not finite")));
            }
        }
        Frame::new(self.a, self.partner_curvature()).map(|_| ())
    }

    /// Curvature of the surface whose energy accompanies this problem: the
    /// Euclidean problem pairs with the sphere.
    pub fn partner_curvature(&self) -> f64 {
        match self.space {
            Space::Hyperbolic => -1.0,
            _ => 1.0,
        }
    }

    pub fn frame(&self) -> Frame {
        Frame::new(self.a, self.partner_curvature()).expect("validated center parameter")
    }

    pub fn h(&self) -> f64 {
        self.frame().h()
    }

    pub fn with_space(mut self, space: Space) -> Self {
        self.space = space;
        self
    }

    pub fn without_secondary(mut self) -> Self {
        self.m2 = 0.0;
        self.f = 0.0;
        self
    }

    /// The Euclidean problem whose standardized dynamics coincide with the
    /// partner dynamics of `self` (same `m1`, `m2`, `f`, `h`).
    pub fn euclidean_partner(&self) -> Result<Self> {
        let h = self.h();
        if h >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "h = {h} has no Euclidean counterpart with a sphere-paired frame"
            )));
        }
        let a = h / (1.0 - h * h).sqrt();
        Self::new(self.m1, self.m2, self.f, a, Space::Euclidean)
    }
}

/// Kepler quantities and energies of one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegrals {
    pub e_target: f64,
    pub e_kep: f64,
    pub c: f64,
    pub a: [f64; 2],
    pub d: f64,
    pub k: f64,
    pub e_sph: f64,
}

impl FirstIntegrals {
    /// Component of the Laplace–Runge–Lenz vector toward the secondary center.
    pub fn a1(&self) -> f64 {
        -self.a[1]
    }
}

fn guarded_distance(q: Vec2, center: Vec2, mass: f64, what: &'static str) -> Result<f64> {
    let r = (q[0] - center[0]).hypot(q[1] - center[1]);
    if mass != 0.0 && !(r >= SINGULAR_RADIUS) {
        return Err(Error::Singular { what, distance: r });
    }
    Ok(r)
}

fn kinetic(v: Vec2) -> f64 {
    0.5 * dot(v, v)
}

/// `-m1 / r`.
pub fn kepler_potential(q: Vec2, m1: f64) -> Result<f64> {
    let r = guarded_distance(q, [0.0, 0.0], m1, "primary center")?;
    Ok(if m1 == 0.0 { 0.0 } else { -m1 / r })
}

pub fn kepler_energy(state: &PhaseState, m1: f64) -> Result<f64> {
    Ok(kinetic(state.v) + kepler_potential(state.q, m1)?)
}

/// `V₂ = -m2 / r₂ + f |q - (0, -h)|²`.
pub fn secondary_potential(q: Vec2, params: &ModelParams) -> Result<f64> {
    let h = params.h();
    let r2 = guarded_distance(q, [0.0, -2.0 * h], params.m2, "secondary center")?;
    let mut v = if params.m2 == 0.0 { 0.0 } else { -params.m2 / r2 };
    if params.f != 0.0 {
        v += params.f * (q[0] * q[0] + (q[1] + h) * (q[1] + h));
    }
    Ok(v)
}

/// Gradient of `-m1/r + V₂`.
pub fn euclidean_potential_gradient(q: Vec2, params: &ModelParams) -> Result<Vec2> {
    let h = params.h();
    let mut g = [0.0, 0.0];
    let r1 = guarded_distance(q, [0.0, 0.0], params.m1, "primary center")?;
    if params.m1 != 0.0 {
        let c = params.m1 / (r1 * r1 * r1);
        g[0] += c * q[0];
        g[1] += c * q[1];
    }
    let d2 = [q[0], q[1] + 2.0 * h];
    let r2 = guarded_distance(q, [0.0, -2.0 * h], params.m2, "secondary center")?;
    if params.m2 != 0.0 {
        let c = params.m2 / (r2 * r2 * r2);
        g[0] += c * d2[0];
        g[1] += c * d2[1];
    }
    if params.f != 0.0 {
        g[0] += 2.0 * params.f * q[0];
        g[1] += 2.0 * params.f * (q[1] + h);
    }
    Ok(g)
}

/// Energy of the Euclidean Lagrange problem (two-center at `f = 0`, Kepler at `m2 = f = 0`).
pub fn energy_euclidean(state: &PhaseState, params: &ModelParams) -> Result<f64> {
    Ok(kepler_energy(state, params.m1)? + secondary_potential(state.q, params)?)
}

/// Angular momentum `C` and Laplace–Runge–Lenz vector `A` about the primary.
pub fn kepler_first_integrals(state: &PhaseState, m1: f64) -> Result<(f64, [f64; 2])> {
    let [x, y] = state.q;
    let [vx, vy] = state.v;
    let r = x.hypot(y);
    if !(r >= SINGULAR_RADIUS) {
        return Err(Error::Singular { what: "primary center", distance: r });
    }
    let c = x * vy - y * vx;
    Ok((c, [c * vy - m1 * x / r, -c * vx - m1 * y / r]))
}

/// `A₁ = Cξ̇ + m1 η / r`, the LRL component along `-η`, which points from the
/// primary to the secondary.
pub fn lrl_toward_secondary(state: &PhaseState, m1: f64) -> Result<f64> {
    Ok(-kepler_first_integrals(state, m1)?.1[1])
}

/// `D = C² - 2h A₁`.
pub fn integral_d(state: &PhaseState, params: &ModelParams) -> Result<f64> {
    let [x, y] = state.q;
    let [vx, vy] = state.v;
    let r = x.hypot(y);
    if !(r >= SINGULAR_RADIUS) {
        return Err(Error::Singular { what: "primary center", distance: r });
    }
    let c = x * vy - y * vx;
    let h = params.h();
    Ok(c * c - 2.0 * h * (c * vx + params.m1 * y / r))
}

/// The part of the curved energy beyond `E_Kep + V₂ + D/2` (up to the factor
/// `(1 + κa²)`): `K = 2 m2 h (η + 2h) / r₂ - 2 f h² ξ²`.
pub fn remainder_k(state: &PhaseState, params: &ModelParams) -> Result<f64> {
    let [x, y] = state.q;
    let h = params.h();
    let r2 = guarded_distance(state.q, [0.0, -2.0 * h], params.m2, "secondary center")?;
    let mut k = 0.0;
    if params.m2 != 0.0 {
        k += 2.0 * params.m2 * h * (y + 2.0 * h) / r2;
    }
    k -= 2.0 * params.f * h * h * x * x;
    Ok(k)
}

/// Curved potential in the raw chart: cotangent-type Kepler terms at
/// `(0, ±a)` with masses scaled by `√(1 + κa²)`, plus the squared-tangent
/// Hooke term `f |q|²`.
pub fn curved_potential_raw(q: Vec2, params: &ModelParams, kappa: f64) -> Result<f64> {
    let s = (1.0 + kappa * params.a * params.a).sqrt();
    let mut v = params.f * dot(q, q);
    for (m, z, what) in [(params.m1, [0.0, params.a], "primary center"), (params.m2, [0.0, -params.a], "secondary center")] {
        if m == 0.0 {
            continue;
        }
        let (c, n) = center_terms(q, z, kappa);
        if !(n >= SINGULAR_RADIUS * SINGULAR_RADIUS) {
            return Err(Error::Singular { what, distance: n.max(0.0).sqrt() });
        }
        v -= m * s * c / n.sqrt();
    }
    Ok(v)
}

// c = 1 + κ q·z, N = |q - z|² + κ (q × z)²
fn center_terms(q: Vec2, z: Vec2, kappa: f64) -> (f64, f64) {
    let d = [q[0] - z[0], q[1] - z[1]];
    let w = cross(q, z);
    (1.0 + kappa * dot(q, z), dot(d, d) + kappa * w * w)
}

/// Gradient of [`curved_potential_raw`] with respect to the raw chart point.
pub fn curved_potential_gradient_raw(q: Vec2, params: &ModelParams, kappa: f64) -> Result<Vec2> {
    let s = (1.0 + kappa * params.a * params.a).sqrt();
    let mut g = [2.0 * params.f * q[0], 2.0 * params.f * q[1]];
    for (m, z, what) in [(params.m1, [0.0, params.a], "primary center"), (params.m2, [0.0, -params.a], "secondary center")] {
        if m == 0.0 {
            continue;
        }
        let (c, n) = center_terms(q, z, kappa);
        if !(n >= SINGULAR_RADIUS * SINGULAR_RADIUS) {
            return Err(Error::Singular { what, distance: n.max(0.0).sqrt() });
        }
        let w = cross(q, z);
        let dn = [2.0 * (q[0] - z[0]) + 2.0 * kappa * w * z[1], 2.0 * (q[1] - z[1]) - 2.0 * kappa * w * z[0]];
        let rn = n.sqrt();
        for i in 0..2 {
            let dci = kappa * z[i];
            g[i] -= m * s * (dci / rn - 0.5 * c * dn[i] / (n * rn));
        }
    }
    Ok(g)
}

/// Chart expression of the curved energy, `κ = ±1`, at a raw chart point
/// with Euclidean-time raw velocity:
/// `½|v|² + κ½(q × v)² + V_curved(q)`.
pub fn curved_chart_energy(raw: &PhaseState, params: &ModelParams, kappa: f64) -> Result<f64> {
    let w = cross(raw.q, raw.v);
    Ok(kinetic(raw.v) + 0.5 * kappa * w * w + curved_potential_raw(raw.q, params, kappa)?)
}

/// Energy of the spherical problem corresponding to `params` (masses scaled
/// by `√(1+a²)`), at a raw chart state.
pub fn energy_spherical(raw: &PhaseState, params: &ModelParams) -> Result<f64> {
    crate::geometry::check_chart_domain(raw.q, Space::Spherical)?;
    curved_chart_energy(raw, params, 1.0)
}

/// Hyperbolic counterpart of [`energy_spherical`]; requires `a < 1`.
pub fn energy_hyperbolic(raw: &PhaseState, params: &ModelParams) -> Result<f64> {
    Frame::hyperbolic(params.a)?;
    crate::geometry::check_chart_domain(raw.q, Space::Hyperbolic)?;
    curved_chart_energy(raw, params, -1.0)
}

/// The curved energy accompanying a standardized Euclidean state: spherical
/// unless `params.space` is hyperbolic.
pub fn corresponding_energy(state: &PhaseState, params: &ModelParams) -> Result<f64> {
    let raw = params.frame().unstandardize(state);
    match params.space {
        Space::Hyperbolic => energy_hyperbolic(&raw, params),
        _ => energy_spherical(&raw, params),
    }
}

/// `E_curved - (1 + κa²)(E_Kep + V₂ + κ(D + K)/2)` at a standardized state.
pub fn identity_residual(state: &PhaseState, params: &ModelParams) -> Result<f64> {
    let kappa = params.partner_curvature();
    let e_curved = corresponding_energy(state, params)?;
    let rhs = kepler_energy(state, params.m1)?
        + secondary_potential(state.q, params)?
        + 0.5 * kappa * (integral_d(state, params)? + remainder_k(state, params)?);
    Ok(e_curved - (1.0 + kappa * params.a * params.a) * rhs)
}

/// `λ` of the raw chart point underlying a standardized point.
pub fn conformal_factor_std(q: Vec2, params: &ModelParams) -> f64 {
    conformal_factor(params.frame().point_to_raw(q), params.space)
}

/// Euclidean partner of a standardized curved state: same point, velocity
/// divided by `λ`. The identity on Euclidean states.
pub fn to_partner(state: &PhaseState, params: &ModelParams) -> PhaseState {
    if !params.space.is_curved() {
        return *state;
    }
    let lam = conformal_factor_std(state.q, params);
    PhaseState { q: state.q, v: [state.v[0] / lam, state.v[1] / lam], t: state.t }
}

pub fn from_partner(state: &PhaseState, params: &ModelParams) -> PhaseState {
    if !params.space.is_curved() {
        return *state;
    }
    let lam = conformal_factor_std(state.q, params);
    PhaseState { q: state.q, v: [state.v[0] * lam, state.v[1] * lam], t: state.t }
}

/// True energy of the system `params` at a standardized state of that space.
pub fn system_energy(state: &PhaseState, params: &ModelParams) -> Result<f64> {
    match params.space {
        Space::Euclidean => energy_euclidean(state, params),
        _ => {
            let frame = params.frame();
            crate::geometry::check_chart_domain(frame.point_to_raw(state.q), params.space)?;
            let partner = to_partner(state, params);
            curved_chart_energy(&frame.unstandardize(&partner), params, params.partner_curvature())
        }
    }
}

/// All first integrals of a standardized state of the system `params`;
/// `e_target` is the system energy.
pub fn first_integrals(state: &PhaseState, params: &ModelParams) -> Result<FirstIntegrals> {
    let e_target = system_energy(state, params)?;
    let p = to_partner(state, params);
    let (c, a) = kepler_first_integrals(&p, params.m1)?;
    Ok(FirstIntegrals {
        e_target,
        e_kep: kepler_energy(&p, params.m1)?,
        c,
        a,
        d: integral_d(&p, params)?,
        k: remainder_k(&p, params)?,
        e_sph: corresponding_energy(&p, params)?,
    })
}
