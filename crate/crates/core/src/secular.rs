//! Osculating elements, Kepler's equation and the partially-averaged systems.
//!
//! The secondary potential (the second Kepler center plus the Hooke term) is
//! averaged over the closed orbit of the primary Kepler problem through the
//! current state. On the plane the average is over mean anomaly. On curved
//! surfaces it is the time average along the curved Kepler orbit; that orbit
//! is the centrally projected Euclidean ellipse of the partner state, run with
//! the time change `dt = dτ/λ`, so the same eccentric-anomaly quadrature
//! applies with an extra weight `1/λ`.
//!
//! Quadrature is the periodic trapezoid rule in eccentric anomaly `E`
//! (`dℓ = (1 - e cos E) dE`), which keeps the integrand smooth even for
//! eccentric orbits.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::flow::{self, Dop853, StepperOptions, System, SystemKind};
use crate::geometry::{conformal_factor, PhaseState, Space, Vec2, EQUATOR_GUARD};
use crate::model::{self, ModelParams};

pub const DEFAULT_QUAD_TOL: f64 = 1e-12;
pub const DEFAULT_NODE_CAP: usize = 1 << 16;
/// Closest admissible approach of an averaged orbit to the secondary center.
pub const EXCLUSION_RADIUS: f64 = 1e-6;
const START_NODES: usize = 16;

/// Planar osculating Kepler elements.
///
/// `lambda` is the circular angular momentum at the orbit's energy,
/// `E_Kep = -m1²/(2Λ²)`; `(k, h_e) = e (cos g, sin g)` with `g` the argument
/// of pericenter measured from the `ξ` axis; `l` is the mean anomaly and
/// `sigma` the sign of the angular momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitElements {
    pub lambda: f64,
    pub k: f64,
    pub h_e: f64,
    pub l: f64,
    pub sigma: f64,
}

impl OrbitElements {
    pub fn eccentricity(&self) -> f64 {
        self.k.hypot(self.h_e)
    }

    pub fn pericenter_argument(&self) -> f64 {
        self.h_e.atan2(self.k)
    }

    pub fn semi_major_axis(&self, m1: f64) -> f64 {
        self.lambda * self.lambda / m1
    }

    pub fn mean_motion(&self, m1: f64) -> f64 {
        m1 * m1 / self.lambda.powi(3)
    }

    pub fn period(&self, m1: f64) -> f64 {
        TAU / self.mean_motion(m1)
    }

    pub fn angular_momentum(&self) -> f64 {
        let e = self.eccentricity();
        self.sigma * self.lambda * ((1.0 - e) * (1.0 + e)).sqrt()
    }

    pub fn energy(&self, m1: f64) -> f64 {
        -m1 * m1 / (2.0 * self.lambda * self.lambda)
    }

    /// Position on the orbit at eccentric anomaly `ecc`.
    pub fn position_at(&self, m1: f64, ecc: f64) -> Vec2 {
        Ellipse::new(self, m1).at(ecc)
    }
}

/// Orbit geometry precomputed for repeated evaluation along the ellipse.
struct Ellipse {
    alpha: f64,
    e: f64,
    minor: f64,
    cg: f64,
    sg: f64,
}

impl Ellipse {
    fn new(el: &OrbitElements, m1: f64) -> Self {
        let e = el.eccentricity();
        let (sg, cg) = el.pericenter_argument().sin_cos();
        let alpha = el.semi_major_axis(m1);
        Self { alpha, e, minor: el.sigma * alpha * ((1.0 - e) * (1.0 + e)).sqrt(), cg, sg }
    }

    fn at(&self, ecc: f64) -> Vec2 {
        let (se, ce) = ecc.sin_cos();
        let x = self.alpha * (ce - self.e);
        let y = self.minor * se;
        [self.cg * x - self.sg * y, self.sg * x + self.cg * y]
    }
}

/// Solves `E - e sin E = ℓ` and returns `E` on the same branch as `ℓ`.
pub fn solve_kepler(l: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0 - 1e-12).contains(&e) || !l.is_finite() {
        return Err(Error::InvalidParameter(format!("Kepler equation needs 0 ≤ e < 1 and finite ℓ (e = {e}, ℓ = {l})")));
    }
    let turns = (l / TAU).round();
    let m = l - turns * TAU;
    if m == 0.0 {
        return Ok(l);
    }
    let (mut lo, mut hi) = (-PI, PI);
    let mut x = if e < 0.8 { m + e * m.sin() } else { PI.copysign(m) };
    for _ in 0..100 {
        let f = x - e * x.sin() - m;
        if f == 0.0 {
            return Ok(x + turns * TAU);
        }
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let mut next = x - f / (1.0 - e * x.cos());
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.abs().max(1.0) {
            return Ok(next + turns * TAU);
        }
        x = next;
    }
    let residual = x - e * x.sin() - m;
    if residual.abs() <= 1e-14 {
        Ok(x + turns * TAU)
    } else {
        Err(Error::KeplerNonConvergence { mean_anomaly: l, eccentricity: e })
    }
}

/// Elements of a standardized Euclidean state with respect to the primary.
pub fn state_to_elements(state: &PhaseState, m1: f64) -> Result<OrbitElements> {
    if !(m1 > 0.0) {
        return Err(Error::InvalidParameter("elements need m1 > 0".into()));
    }
    let energy = model::kepler_energy(state, m1)?;
    if !(energy < 0.0) {
        return Err(Error::OutsideRegion("E_Kep ≥ 0, the Kepler orbit is not closed"));
    }
    let (c, a) = model::kepler_first_integrals(state, m1)?;
    if c == 0.0 {
        return Err(Error::OutsideRegion("C = 0, the Kepler orbit is collisional"));
    }
    let lambda = m1 / (-2.0 * energy).sqrt();
    let (k, h_e) = (a[0] / m1, a[1] / m1);
    let e = k.hypot(h_e);
    if !(e < 1.0) {
        return Err(Error::OutsideRegion("eccentricity ≥ 1"));
    }
    let sigma = c.signum();
    let g = h_e.atan2(k);
    let theta = state.q[1].atan2(state.q[0]);
    let nu = sigma * (theta - g);
    let ecc = 2.0 * ((1.0 - e).sqrt() * (0.5 * nu).sin()).atan2((1.0 + e).sqrt() * (0.5 * nu).cos());
    Ok(OrbitElements { lambda, k, h_e, l: ecc - e * ecc.sin(), sigma })
}

/// State at mean anomaly `l` on the orbit `el` (the `l` field of `el` is ignored).
pub fn elements_to_state(el: &OrbitElements, m1: f64, l: f64) -> Result<PhaseState> {
    let e = el.eccentricity();
    if !(el.lambda > 0.0) || !(m1 > 0.0) {
        return Err(Error::InvalidParameter("elements need Λ > 0 and m1 > 0".into()));
    }
    let ecc = solve_kepler(l, e)?;
    let alpha = el.semi_major_axis(m1);
    let n = el.mean_motion(m1);
    let (se, ce) = ecc.sin_cos();
    let b = ((1.0 - e) * (1.0 + e)).sqrt();
    let denom = 1.0 - e * ce;
    let x = alpha * (ce - e);
    let y = el.sigma * alpha * b * se;
    let vx = -n * alpha * se / denom;
    let vy = el.sigma * n * alpha * b * ce / denom;
    let (sg, cg) = el.pericenter_argument().sin_cos();
    Ok(PhaseState::new([cg * x - sg * y, sg * x + cg * y], [cg * vx - sg * vy, sg * vx + cg * vy]))
}

/// Parameters of a partially-averaged system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragedSystem {
    pub params: ModelParams,
    pub quad_tol: f64,
    pub node_cap: usize,
}

impl AveragedSystem {
    pub fn new(params: ModelParams, quad_tol: f64, node_cap: usize) -> Result<Self> {
        params.validate()?;
        if !(params.m1 > 0.0) {
            return Err(Error::InvalidParameter("averaging needs m1 > 0".into()));
        }
        if !(1e-14..=1e-6).contains(&quad_tol) {
            return Err(Error::InvalidParameter(format!("quadrature tolerance {quad_tol} outside [1e-14, 1e-6]")));
        }
        if node_cap < START_NODES {
            return Err(Error::InvalidParameter(format!("node cap {node_cap} below {START_NODES}")));
        }
        Ok(Self { params, quad_tol, node_cap })
    }
}

fn nodes_sum(el: &OrbitElements, p: &ModelParams, n: usize, offset: usize, stride: usize) -> Result<(f64, f64)> {
    let orbit = Ellipse::new(el, p.m1);
    let frame = p.frame();
    let secondary = ModelParams { m1: 0.0, ..*p };
    let kappa = p.partner_curvature();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut j = offset;
    while j < n {
        let ecc = TAU * j as f64 / n as f64;
        let q = orbit.at(ecc);
        // dℓ = (1 - e cos E) dE, and dt = dτ/λ on curved surfaces
        let mut w = 1.0 - orbit.e * ecc.cos();
        let v = if p.space.is_curved() {
            let raw = frame.point_to_raw(q);
            w /= conformal_factor(raw, p.space);
            model::curved_potential_raw(raw, &secondary, kappa)?
        } else {
            model::secondary_potential(q, p)?
        };
        num += v * w;
        den += w;
        j += stride;
    }
    Ok((num, den))
}

/// Average of the secondary potential over the orbit with a fixed number of nodes.
pub fn averaged_secondary_potential_nodes(el: &OrbitElements, sys: &AveragedSystem, n: usize) -> Result<f64> {
    if sys.params.m2 == 0.0 && sys.params.f == 0.0 {
        return Ok(0.0);
    }
    if !(el.eccentricity() < 1.0 && el.lambda > 0.0) {
        return Err(Error::OutsideRegion("the orbit is not a closed ellipse"));
    }
    let (num, den) = nodes_sum(el, &sys.params, n, 0, 1)?;
    Ok(num / den)
}

/// Node-doubling quadrature: returns the converged average and the node count used.
pub fn averaged_secondary_potential_adaptive(el: &OrbitElements, sys: &AveragedSystem) -> Result<(f64, usize)> {
    if sys.params.m2 == 0.0 && sys.params.f == 0.0 {
        return Ok((0.0, START_NODES));
    }
    check_orbit_admissible(el, &sys.params)?;
    let mut n = START_NODES;
    let (mut num, mut den) = nodes_sum(el, &sys.params, n, 0, 1)?;
    let mut prev = num / den;
    let mut change = f64::INFINITY;
    while 2 * n <= sys.node_cap {
        // the doubled rule reuses the current nodes
        let (a, b) = nodes_sum(el, &sys.params, 2 * n, 1, 2)?;
        num += a;
        den += b;
        n *= 2;
        let cur = num / den;
        change = (cur - prev).abs();
        if change <= sys.quad_tol * cur.abs().max(1.0) {
            return Ok((cur, n));
        }
        prev = cur;
    }
    Err(Error::NodeCapExceeded { cap: sys.node_cap, change })
}

pub fn averaged_secondary_potential(el: &OrbitElements, sys: &AveragedSystem) -> Result<f64> {
    averaged_secondary_potential_adaptive(el, sys).map(|r| r.0)
}

/// Minimum of `f` over a period by sampling and golden-section refinement
/// around the best sample.
fn periodic_min(f: impl Fn(f64) -> f64) -> f64 {
    const SAMPLES: usize = 128;
    let step = TAU / SAMPLES as f64;
    let (mut best_j, mut best) = (0, f64::INFINITY);
    for j in 0..SAMPLES {
        let d = f(step * j as f64);
        if d < best {
            best = d;
            best_j = j;
        }
    }
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (step * (best_j as f64 - 1.0), step * (best_j as f64 + 1.0));
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    best.min(fc).min(fd)
}

/// Smallest distance from the orbit to `point`.
pub fn orbit_min_distance(el: &OrbitElements, m1: f64, point: Vec2) -> f64 {
    let orbit = Ellipse::new(el, m1);
    periodic_min(|ecc| {
        let q = orbit.at(ecc);
        (q[0] - point[0]).hypot(q[1] - point[1])
    })
}

/// Rejects orbits through the exclusion ball of the secondary center and, on
/// curved surfaces, orbits leaving the chart domain.
pub fn check_orbit_admissible(el: &OrbitElements, p: &ModelParams) -> Result<()> {
    if !(el.eccentricity() < 1.0 && el.lambda > 0.0) {
        return Err(Error::OutsideRegion("the orbit is not a closed ellipse"));
    }
    if p.m2 != 0.0 {
        let d = orbit_min_distance(el, p.m1, [0.0, -2.0 * p.h()]);
        if d < EXCLUSION_RADIUS {
            return Err(Error::OrbitExcluded { distance: d });
        }
    }
    if p.space.is_curved() {
        let frame = p.frame();
        let orbit = Ellipse::new(el, p.m1);
        let margin = periodic_min(|ecc| {
            let lam = conformal_factor(frame.point_to_raw(orbit.at(ecc)), p.space);
            match p.space {
                Space::Spherical => 1.0 / lam.sqrt() - EQUATOR_GUARD,
                _ => lam - EQUATOR_GUARD,
            }
        });
        if !(margin > 0.0) {
            return Err(Error::OrbitLeavesChart { margin });
        }
    }
    Ok(())
}

/// Elements of the osculating Euclidean orbit of a state of `p.space`.
pub fn osculating_elements(state: &PhaseState, p: &ModelParams) -> Result<OrbitElements> {
    state_to_elements(&model::to_partner(state, p), p.m1)
}

/// `E_Kep + ⟨V₂⟩` (on curved surfaces the curved Kepler energy plus the
/// curved time average).
pub fn averaged_hamiltonian(state: &PhaseState, sys: &AveragedSystem) -> Result<f64> {
    let p = &sys.params;
    let kep = model::system_energy(state, &p.without_secondary())?;
    let el = osculating_elements(state, p)?;
    Ok(kep + averaged_secondary_potential(&el, sys)?)
}

/// `∂(Λ, k, h_e)/∂(ξ, η, ξ̇, η̇)` of a planar state.
fn element_jacobian(state: &PhaseState, m1: f64) -> Result<[[f64; 4]; 3]> {
    let [x, y] = state.q;
    let [vx, vy] = state.v;
    let r = x.hypot(y);
    let r3 = r * r * r;
    let energy = model::kepler_energy(state, m1)?;
    if !(energy < 0.0) {
        return Err(Error::OutsideRegion("E_Kep ≥ 0, the Kepler orbit is not closed"));
    }
    let c = x * vy - y * vx;
    // dΛ/dE = Λ³/m1²
    let lam = m1 / (-2.0 * energy).sqrt();
    let dl = lam.powi(3) / (m1 * m1);
    let row_l = [dl * m1 * x / r3, dl * m1 * y / r3, dl * vx, dl * vy];
    let row_k = [
        vy * vy - m1 * (1.0 / r - x * x / r3),
        -vx * vy + m1 * x * y / r3,
        -y * vy,
        x * vy + c,
    ];
    let row_h = [
        -vy * vx + m1 * x * y / r3,
        vx * vx - m1 * (1.0 / r - y * y / r3),
        y * vx - c,
        -x * vx,
    ];
    Ok([row_l, row_k.map(|d| d / m1), row_h.map(|d| d / m1)])
}

/// `∂(q, v_partner)/∂(q, p)` for standardized canonical coordinates `z`.
/// The raw partner velocity is `p + κ(q·p)q`, so no conformal factor appears.
fn partner_jacobian(z: &[f64; 4], p: &ModelParams) -> [[f64; 4]; 4] {
    let mut j = [[0.0; 4]; 4];
    j[0][0] = 1.0;
    j[1][1] = 1.0;
    if !p.space.is_curved() {
        j[2][2] = 1.0;
        j[3][3] = 1.0;
        return j;
    }
    let kappa = p.space.curvature();
    let frame = p.frame();
    let s = frame.scale();
    let q = frame.point_to_raw([z[0], z[1]]);
    let pr = frame.covector_to_raw([z[2], z[3]]);
    let qp = q[0] * pr[0] + q[1] * pr[1];
    // raw blocks: ∂v/∂q = κ((q·p)I + q pᵀ), ∂v/∂p = I + κ q qᵀ
    let dq = |i: usize, k: usize| kappa * (if i == k { qp } else { 0.0 } + q[i] * pr[k]);
    let dp = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 } + kappa * q[i] * q[k];
    // standardized: v_std = diag(1, 1/s) v_raw, q_raw = (ξ, sη + a), p_raw = (p_ξ, p_η/s)
    let out_scale = [1.0, 1.0 / s];
    let q_scale = [1.0, s];
    let p_scale = [1.0, 1.0 / s];
    for i in 0..2 {
        for k in 0..2 {
            j[2 + i][k] = out_scale[i] * dq(i, k) * q_scale[k];
            j[2 + i][2 + k] = out_scale[i] * dp(i, k) * p_scale[k];
        }
    }
    j
}

/// `(∂⟨V₂⟩/∂q, ∂⟨V₂⟩/∂p)` in standardized canonical coordinates.
///
/// The average depends on the state only through `(Λ, k, h_e)` of the
/// osculating orbit. Its derivatives in those variables come from central
/// differences with Richardson extrapolation through a quadrature whose node
/// count is fixed at the central point; the chain rule through the element
/// map is analytic. Differencing in phase space instead would need steps
/// small against the pericenter distance of eccentric orbits.
pub fn averaged_potential_gradient(state: &PhaseState, sys: &AveragedSystem) -> Result<([f64; 2], [f64; 2])> {
    let p = &sys.params;
    let partner = model::to_partner(state, p);
    let el = state_to_elements(&partner, p.m1)?;
    if p.m2 == 0.0 && p.f == 0.0 {
        return Ok(([0.0; 2], [0.0; 2]));
    }
    let (_, n) = averaged_secondary_potential_adaptive(&el, sys)?;
    let w = |d: [f64; 3]| {
        let e = OrbitElements { lambda: el.lambda + d[0], k: el.k + d[1], h_e: el.h_e + d[2], ..el };
        averaged_secondary_potential_nodes(&e, sys, n)
    };
    let step = 1e-5 * el.lambda.max(1.0);
    // the stencil reaches e + 2√2·step
    if el.eccentricity() + 3.0 * step >= 1.0 {
        return Err(Error::OutsideRegion("eccentricity too close to 1 for the averaged gradient"));
    }
    let mut dw = [0.0; 3];
    for (i, out) in dw.iter_mut().enumerate() {
        let at = |h: f64| {
            let mut d = [0.0; 3];
            d[i] = h;
            w(d)
        };
        let d1 = (at(step)? - at(-step)?) / (2.0 * step);
        let d2 = (at(2.0 * step)? - at(-2.0 * step)?) / (4.0 * step);
        *out = (4.0 * d1 - d2) / 3.0;
    }
    let je = element_jacobian(&partner, p.m1)?;
    let jp = partner_jacobian(&flow::to_canonical(state, p), p);
    let mut g = [0.0; 4];
    for (k, gk) in g.iter_mut().enumerate() {
        for (i, dwi) in dw.iter().enumerate() {
            for (m, jpm) in jp.iter().enumerate() {
                *gk += dwi * je[i][m] * jpm[k];
            }
        }
    }
    Ok(([g[0], g[1]], [g[2], g[3]]))
}

/// Hamiltonian vector field of the averaged system at a standardized state.
pub fn averaged_vector_field(state: &PhaseState, sys: &AveragedSystem) -> Result<[f64; 4]> {
    System::averaged(sys.params, sys.quad_tol, sys.node_cap)?.vector_field(state)
}

/// `(k̇, ḣ_e)` of the planar secular problem at fixed `Λ`:
/// `k̇ = (C/Λ²) ∂W/∂h_e`, `ḣ_e = -(C/Λ²) ∂W/∂k` with `W = ⟨V₂⟩(k, h_e)`.
/// Defined for the Euclidean system.
pub fn reduced_secular_field(el: &OrbitElements, sys: &AveragedSystem) -> Result<[f64; 2]> {
    if sys.params.space != Space::Euclidean {
        return Err(Error::InvalidParameter("the reduced secular field is defined on the plane".into()));
    }
    let (_, n) = averaged_secondary_potential_adaptive(el, sys)?;
    let w = |k: f64, h: f64| averaged_secondary_potential_nodes(&OrbitElements { k, h_e: h, ..*el }, sys, n);
    let step = 1e-5;
    let deriv = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let d1 = (f(step)? - f(-step)?) / (2.0 * step);
        let d2 = (f(2.0 * step)? - f(-2.0 * step)?) / (4.0 * step);
        Ok((4.0 * d1 - d2) / 3.0)
    };
    let wk = deriv(&|d| w(el.k + d, el.h_e))?;
    let wh = deriv(&|d| w(el.k, el.h_e + d))?;
    let c = el.angular_momentum() / (el.lambda * el.lambda);
    Ok([c * wh, -c * wk])
}

/// Result of the integration-based average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAverage {
    pub value: f64,
    pub period: f64,
    /// Distance between the start point and the detected return point.
    pub closure: f64,
}

/// Time average of the secondary potential along one period of the Kepler
/// flow of `sys.params.space` through `state`, computed by integrating the
/// flow and detecting the first return to a section through the start point
/// transverse to the velocity. Independent of the quadrature route.
pub fn time_average_by_integration(state: &PhaseState, sys: &AveragedSystem, tol: f64) -> Result<TimeAverage> {
    let p = sys.params;
    let el = osculating_elements(state, &p)?;
    check_orbit_admissible(&el, &p)?;
    let kepler = System::new(SystemKind::Kepler, p)?;
    let frame = p.frame();
    let secondary = ModelParams { m1: 0.0, ..p };
    let v2 = |q: Vec2| -> Result<f64> {
        match p.space {
            Space::Euclidean => model::secondary_potential(q, &p),
            _ => model::curved_potential_raw(frame.point_to_raw(q), &secondary, p.partner_curvature()),
        }
    };
    let mut f = |t: f64, y: &[f64; 5]| -> Result<[f64; 5]> {
        let d = kepler.vector_field(&PhaseState::new([y[0], y[1]], [y[2], y[3]]).at(t))?;
        Ok([d[0], d[1], d[2], d[3], v2([y[0], y[1]])?])
    };
    let q0 = state.q;
    let w0 = state.v;
    let section = |y: &[f64; 5]| (y[0] - q0[0]) * w0[0] + (y[1] - q0[1]) * w0[1];
    // generous cap: several times the partner period stretched by the largest λ
    let mut stretch: f64 = 1.0;
    if p.space.is_curved() {
        for j in 0..256 {
            let raw = frame.point_to_raw(el.position_at(p.m1, TAU * j as f64 / 256.0));
            stretch = stretch.max(1.0 / conformal_factor(raw, p.space));
        }
    }
    let t_cap = 5.0 * el.period(p.m1) * stretch;
    let opts = StepperOptions::with_tol(tol);
    let y0 = [q0[0], q0[1], w0[0], w0[1], 0.0];
    let mut stepper = Dop853::new(&mut f, 0.0, y0, t_cap, opts)?;
    let mut left = false;
    while stepper.t() < t_cap {
        let seg = stepper.step(&mut f, t_cap)?;
        let (s0, s1) = (section(&seg.start()), section(&seg.end()));
        if s0 < 0.0 {
            left = true;
        }
        if left && s0 < 0.0 && s1 >= 0.0 {
            let (mut a, mut b) = (seg.t0, seg.t1());
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if section(&seg.eval(m)) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let t = 0.5 * (a + b);
            let y = seg.eval(t);
            let closure = (y[0] - q0[0]).hypot(y[1] - q0[1]);
            return Ok(TimeAverage { value: y[4] / t, period: t, closure });
        }
    }
    Err(Error::PeriodDetection { periods: 5 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn euclid(m2: f64, f: f64, a: f64) -> AveragedSystem {
        AveragedSystem::new(ModelParams::new(1.0, m2, f, a, Space::Euclidean).unwrap(), 1e-12, DEFAULT_NODE_CAP).unwrap()
    }

    #[test]
    fn kepler_equation_examples() {
        assert_eq!(solve_kepler(0.0, 0.7).unwrap(), 0.0);
        assert_abs_diff_eq!(solve_kepler(PI / 3.0, 0.0).unwrap(), PI / 3.0, epsilon = 1e-15);
        // oracle: plain Newton iteration on E - 0.5 sin E = 1
        let mut x: f64 = 1.0;
        for _ in 0..50 {
            x -= (x - 0.5 * x.sin() - 1.0) / (1.0 - 0.5 * x.cos());
        }
        let e = solve_kepler(1.0, 0.5).unwrap();
        assert_abs_diff_eq!(e, x, epsilon = 1e-14);
        assert_abs_diff_eq!(e, 1.49870, epsilon = 1e-5);
        assert!(solve_kepler(1.0, 1.0).is_err());
    }

    #[test]
    fn kepler_equation_keeps_branch() {
        let e = solve_kepler(1.0 + 4.0 * PI, 0.3).unwrap();
        assert_abs_diff_eq!(e - 0.3 * e.sin(), 1.0 + 4.0 * PI, epsilon = 1e-13);
    }

    #[test]
    fn element_examples() {
        let el = state_to_elements(&PhaseState::new([1.0, 0.0], [0.0, 1.0]), 1.0).unwrap();
        assert_abs_diff_eq!(el.lambda, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(el.eccentricity(), 0.0, epsilon = 1e-15);
        let s = PhaseState::new([1.0, 0.0], [0.0, 1.1]);
        let el = state_to_elements(&s, 1.0).unwrap();
        let (_, a) = model::kepler_first_integrals(&s, 1.0).unwrap();
        assert_abs_diff_eq!(el.k, a[0], epsilon = 1e-15);
        assert_abs_diff_eq!(el.k, 0.21, epsilon = 1e-14);
        assert_abs_diff_eq!(el.h_e, 0.0, epsilon = 1e-15);
        assert!(state_to_elements(&PhaseState::new([1.0, 0.0], [0.0, 2.0]), 1.0).is_err());
        assert!(state_to_elements(&PhaseState::new([1.0, 0.0], [0.5, 0.0]), 1.0).is_err());
    }

    #[test]
    fn element_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let m1 = rng.gen_range(0.5..2.0);
            let el = OrbitElements {
                lambda: rng.gen_range(0.5..2.0),
                k: rng.gen_range(-0.65..0.65),
                h_e: rng.gen_range(-0.65..0.65),
                l: 0.0,
                sigma: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            };
            let l = rng.gen_range(-PI..PI);
            let s = elements_to_state(&el, m1, l).unwrap();
            let back = state_to_elements(&s, m1).unwrap();
            assert_abs_diff_eq!(back.lambda, el.lambda, epsilon = 1e-10);
            assert_abs_diff_eq!(back.k, el.k, epsilon = 1e-10);
            assert_abs_diff_eq!(back.h_e, el.h_e, epsilon = 1e-10);
            assert_eq!(back.sigma, el.sigma);
            let dl = (back.l - l + PI).rem_euclid(TAU) - PI;
            assert!(dl.abs() < 1e-10, "{dl}");
            let s2 = elements_to_state(&back, m1, back.l).unwrap();
            for (a, b) in s.to_array().iter().zip(s2.to_array().iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn far_field_monopole() {
        // circular orbit of radius 0.1 about the primary, secondary center at distance 1
        let h: f64 = 0.5;
        let sys = euclid(1.0, 0.0, h / (1.0 - h * h).sqrt());
        assert_abs_diff_eq!(sys.params.h(), h, epsilon = 1e-15);
        let r = 0.1;
        let el = state_to_elements(&PhaseState::new([r, 0.0], [0.0, (1.0 / r).sqrt()]), 1.0).unwrap();
        let v = averaged_secondary_potential(&el, &sys).unwrap();
        assert!((v + 1.0).abs() <= 0.003);
        let brute: f64 = (0..4096)
            .map(|j| {
                let t = TAU * j as f64 / 4096.0;
                -1.0 / (r * t.cos()).hypot(r * t.sin() + 2.0 * h)
            })
            .sum::<f64>()
            / 4096.0;
        assert_abs_diff_eq!(v, brute, epsilon = 1e-12);
    }

    #[test]
    fn hooke_average_of_circle() {
        // a tiny a puts the Hooke center essentially at the primary
        let sys = euclid(0.0, 0.7, 1e-9);
        let r: f64 = 1.3;
        let el = state_to_elements(&PhaseState::new([r, 0.0], [0.0, (1.0 / r).sqrt()]), 1.0).unwrap();
        let v = averaged_secondary_potential(&el, &sys).unwrap();
        assert_abs_diff_eq!(v, 0.7 * r * r, epsilon = 1e-8);
        assert_eq!(averaged_secondary_potential(&el, &euclid(0.0, 0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn mean_anomaly_oracle_agrees() {
        // quadrature in E versus a dense rule in ℓ through the Kepler solver
        let sys = euclid(0.1, 0.05, 1.0);
        let s = PhaseState::new([0.7, 0.2], [-0.3, 1.15]);
        let el = state_to_elements(&s, 1.0).unwrap();
        let v = averaged_secondary_potential(&el, &sys).unwrap();
        let n = 20000;
        let mut acc = 0.0;
        for j in 0..n {
            let st = elements_to_state(&el, 1.0, TAU * j as f64 / n as f64).unwrap();
            acc += model::secondary_potential(st.q, &sys.params).unwrap();
        }
        assert_abs_diff_eq!(v, acc / n as f64, epsilon = 1e-11);
        let h0 = averaged_hamiltonian(&s, &sys).unwrap();
        assert_abs_diff_eq!(h0, model::kepler_energy(&s, 1.0).unwrap() + acc / n as f64, epsilon = 1e-11);
    }

    #[test]
    fn averaged_hamiltonian_is_phase_independent() {
        let sys = euclid(0.1, 0.0, 1.0);
        let el = state_to_elements(&PhaseState::new([0.7, 0.2], [-0.3, 1.15]), 1.0).unwrap();
        let h1 = averaged_hamiltonian(&elements_to_state(&el, 1.0, 0.3).unwrap(), &sys).unwrap();
        let h2 = averaged_hamiltonian(&elements_to_state(&el, 1.0, 2.9).unwrap(), &sys).unwrap();
        assert_abs_diff_eq!(h1, h2, epsilon = 1e-10);
        let free = euclid(0.0, 0.0, 1.0);
        let s = PhaseState::new([0.7, 0.2], [-0.3, 1.15]);
        assert_eq!(averaged_hamiltonian(&s, &free).unwrap(), model::kepler_energy(&s, 1.0).unwrap());
    }

    #[test]
    fn exclusion_and_chart_guards() {
        // circular orbit of radius 2h passes through the secondary center
        let sys = euclid(0.5, 0.0, 1.0);
        let r = 2.0 * sys.params.h();
        let el = state_to_elements(&PhaseState::new([r, 0.0], [0.0, (1.0 / r).sqrt()]), 1.0).unwrap();
        assert!(matches!(averaged_secondary_potential(&el, &sys), Err(Error::OrbitExcluded { .. })));
        let hyp = AveragedSystem::new(ModelParams::new(1.0, 0.1, 0.0, 0.3, Space::Hyperbolic).unwrap(), 1e-12, DEFAULT_NODE_CAP).unwrap();
        let el = state_to_elements(&PhaseState::new([2.0, 0.0], [0.0, 0.7]), 1.0).unwrap();
        assert!(matches!(averaged_secondary_potential(&el, &hyp), Err(Error::OrbitLeavesChart { .. })));
    }

    #[test]
    fn integration_oracle_matches_quadrature() {
        for space in [Space::Euclidean, Space::Spherical, Space::Hyperbolic] {
            let p = ModelParams::new(1.0, 0.2, 0.1, 0.4, space).unwrap();
            let sys = AveragedSystem::new(p, 1e-13, DEFAULT_NODE_CAP).unwrap();
            let s = model::from_partner(&PhaseState::new([0.3, 0.05], [-0.4, 1.7]), &p);
            let el = osculating_elements(&s, &p).unwrap();
            let quad = averaged_secondary_potential(&el, &sys).unwrap();
            let ode = time_average_by_integration(&s, &sys, 1e-12).unwrap();
            assert!(ode.closure < 1e-9, "{space:?} closure {}", ode.closure);
            assert_abs_diff_eq!(quad, ode.value, epsilon = 1e-9);
        }
    }

    #[test]
    fn reduced_field_matches_full_field() {
        let sys = euclid(0.1, 0.05, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let el0 = OrbitElements {
                lambda: rng.gen_range(0.7..1.0),
                k: rng.gen_range(-0.4..0.4),
                h_e: rng.gen_range(-0.4..0.4),
                l: 0.0,
                sigma: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            };
            let s = elements_to_state(&el0, 1.0, rng.gen_range(-PI..PI)).unwrap();
            let el = state_to_elements(&s, 1.0).unwrap();
            let field = averaged_vector_field(&s, &sys).unwrap();
            let eps = 1e-6;
            let shifted = |sgn: f64| {
                let st = PhaseState::new(
                    [s.q[0] + sgn * eps * field[0], s.q[1] + sgn * eps * field[1]],
                    [s.v[0] + sgn * eps * field[2], s.v[1] + sgn * eps * field[3]],
                );
                state_to_elements(&st, 1.0).unwrap()
            };
            let (a, b) = (shifted(1.0), shifted(-1.0));
            let kdot = (a.k - b.k) / (2.0 * eps);
            let hdot = (a.h_e - b.h_e) / (2.0 * eps);
            let ldot = (a.lambda - b.lambda) / (2.0 * eps);
            let red = reduced_secular_field(&el, &sys).unwrap();
            assert_abs_diff_eq!(kdot, red[0], epsilon = 1e-6);
            assert_abs_diff_eq!(hdot, red[1], epsilon = 1e-6);
            assert_abs_diff_eq!(ldot, 0.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn quadrature_converges_geometrically() {
        let sys = euclid(0.3, 0.1, 1.0);
        for e in [0.0, 0.5, 0.9] {
            let el = OrbitElements { lambda: 0.8, k: 0.0, h_e: e, l: 0.0, sigma: 1.0 };
            let exact = averaged_secondary_potential_nodes(&el, &sys, 8192).unwrap();
            let e64 = (averaged_secondary_potential_nodes(&el, &sys, 64).unwrap() - exact).abs();
            let e128 = (averaged_secondary_potential_nodes(&el, &sys, 128).unwrap() - exact).abs();
            assert!(e128 <= e64 / 10.0 || e64 < 1e-14, "e = {e}: {e64} -> {e128}");
        }
    }

    #[test]
    fn zero_average_of_kepler_brackets() {
        let p = ModelParams::new(1.0, 0.3, 0.2, 0.7, Space::Euclidean).unwrap();
        let el = state_to_elements(&PhaseState::new([0.6, -0.1], [0.2, 1.3]), 1.0).unwrap();
        let observables: [Box<dyn Fn(&PhaseState) -> Result<f64>>; 3] = [
            Box::new(|s: &PhaseState| Ok(s.q[0] * s.q[0] + s.q[1] * s.v[0])),
            Box::new(|s: &PhaseState| model::remainder_k(s, &p)),
            Box::new(|s: &PhaseState| model::secondary_potential(s.q, &p)),
        ];
        for obs in observables.iter() {
            let n = 256;
            let mut acc = 0.0;
            for j in 0..n {
                let s = elements_to_state(&el, 1.0, TAU * j as f64 / n as f64).unwrap();
                acc += flow::poisson_bracket_states(|x| model::kepler_energy(x, 1.0), |x| obs(x), &s, &p).unwrap();
            }
            assert!((acc / n as f64).abs() <= 1e-8, "{}", acc / n as f64);
        }
    }
}
