//! WebAssembly exports behind `www/index.html`.
//!
//! Every export takes plain numbers and returns a JSON document (or an error
//! message), so the page needs no bindings beyond strings and the functions
//! can be exercised natively in tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use secbill_core::billiard::{center_foci, natural_point, run_billiard, trace_wall, BilliardStatus, Wall, WallKind};
use secbill_core::flow::{Dop853, StepperOptions, System, SystemKind};
use secbill_core::geometry::Vec2;
use secbill_core::model::{self, from_partner};
use secbill_core::secular::{reduced_secular_field, AveragedSystem, OrbitElements};
use secbill_core::{ModelParams, PhaseState, Space};

type Out = Result<String, String>;

fn space(name: &str) -> Result<Space, String> {
    match name {
        "euclidean" => Ok(Space::Euclidean),
        "spherical" => Ok(Space::Spherical),
        "hyperbolic" => Ok(Space::Hyperbolic),
        _ => Err(format!("unknown space {name:?}")),
    }
}

fn json(value: &impl Serialize) -> Out {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn err(e: secbill_core::Error) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Bounce {
    t: f64,
    point: Vec2,
    d_jump: f64,
}

#[derive(Serialize)]
struct BilliardView {
    status: String,
    foci: [Vec2; 2],
    path: Vec<Vec2>,
    wall: Vec<Option<Vec2>>,
    bounces: Vec<Bounce>,
    d: f64,
    max_d_jump: f64,
}

/// Kepler billiard about the primary center with a confocal wall (`ellipse`,
/// `hyperbola` or `focal_line`; `s` is ignored for the focal line). The
/// initial state is given as its Euclidean partner in standardized
/// coordinates. Points are in the natural chart of the surface.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn kepler_billiard(space_name: &str, wall_kind: &str, s: f64, xi: f64, eta: f64, vxi: f64, veta: f64, bounces: usize) -> Out {
    let p = ModelParams::new(1.0, 0.0, 0.0, 0.5, space(space_name)?).map_err(err)?;
    let (kind, branch) = match wall_kind {
        "ellipse" => (WallKind::Ellipse, 1.0),
        "hyperbola" => (WallKind::HyperbolaBranch, -1.0),
        "focal_line" => (WallKind::FocalLine, 1.0),
        _ => return Err(format!("unknown wall {wall_kind:?}")),
    };
    let wall = Wall::confocal(kind, s, branch, &p).map_err(err)?;
    let sys = System::new(SystemKind::Kepler, p).map_err(err)?;
    let s0 = from_partner(&PhaseState::new([xi, eta], [vxi, veta]), &p);
    let run = run_billiard(&sys, &[wall], &s0, 200.0, bounces.min(500), 1e-10).map_err(err)?;

    let mut path = Vec::new();
    for seg in &run.trajectory.segments {
        for j in 0..8 {
            let t = seg.t0 + seg.h * j as f64 / 8.0;
            let y = seg.eval(t);
            path.push(natural_point([y[0], y[1]], &p));
        }
    }
    path.push(natural_point(run.trajectory.last().q, &p));
    let status = match &run.status {
        BilliardStatus::Completed => "completed".to_string(),
        BilliardStatus::MaxBounces => "bounce limit reached".to_string(),
        BilliardStatus::SingularityStop { reason, .. } => format!("stopped: {reason}"),
        BilliardStatus::FocusDegeneracy { .. } => "stopped: impact at a focus".to_string(),
        BilliardStatus::CornerDegeneracy { .. } => "stopped: impact at a corner".to_string(),
    };
    let bounces: Vec<Bounce> =
        run.bounces.iter().map(|b| Bounce { t: b.t, point: natural_point(b.point, &p), d_jump: b.delta_d() }).collect();
    let reach = if p.space == Space::Hyperbolic { 2.0 } else { 6.0 };
    json(&BilliardView {
        status,
        foci: center_foci(&p),
        path,
        wall: trace_wall(&wall, p.space, reach, 360),
        max_d_jump: bounces.iter().map(|b| b.d_jump.abs()).fold(0.0, f64::max),
        bounces,
        d: sys.first_integrals(&s0).map_err(err)?.d,
    })
}

#[derive(Serialize)]
struct IdentityView {
    e_kep: f64,
    v2: f64,
    d: f64,
    k: f64,
    curved_energy: f64,
    factorized: f64,
    residual: f64,
}

/// Both sides of the energy factorization at a standardized Euclidean state:
/// the curved energy of the paired problem, and `s²(E_Kep + V₂ + κ(D + K)/2)`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn factorization(space_name: &str, m2: f64, f: f64, a: f64, xi: f64, eta: f64, vxi: f64, veta: f64) -> Out {
    let p = ModelParams::new(1.0, m2, f, a, space(space_name)?).map_err(err)?;
    if !p.space.is_curved() {
        return Err("choose the sphere or the hyperbolic plane".into());
    }
    let st = PhaseState::new([xi, eta], [vxi, veta]);
    let kappa = p.partner_curvature();
    let e_kep = model::kepler_energy(&st, p.m1).map_err(err)?;
    let v2 = model::secondary_potential(st.q, &p).map_err(err)?;
    let d = model::integral_d(&st, &p).map_err(err)?;
    let k = model::remainder_k(&st, &p).map_err(err)?;
    let curved_energy = model::corresponding_energy(&st, &p).map_err(err)?;
    let factorized = (1.0 + kappa * a * a) * (e_kep + v2 + 0.5 * kappa * (d + k));
    json(&IdentityView { e_kep, v2, d, k, curved_energy, factorized, residual: curved_energy - factorized })
}

#[derive(Serialize)]
struct SecularView {
    path: Vec<[f64; 2]>,
    /// Center `(0, c)` and radius of the D-level circle through the start.
    circle_center: f64,
    circle_radius: f64,
    max_d_drift: f64,
    status: String,
}

fn d_of(lambda: f64, m1: f64, h: f64, k: f64, h_e: f64) -> f64 {
    lambda * lambda * (1.0 - k * k - h_e * h_e) + 2.0 * h * m1 * h_e
}

/// Path of the eccentricity vector `(k, h_e)` under the planar secular flow
/// of the two-center problem at fixed `Λ`, started at eccentricity `e`
/// pointing along `+k`.
#[wasm_bindgen]
pub fn secular_path(m2: f64, a: f64, lambda: f64, e: f64, t_end: f64) -> Out {
    let p = ModelParams::new(1.0, m2, 0.0, a, Space::Euclidean).map_err(err)?;
    let sys = AveragedSystem::new(p, 1e-10, 1 << 14).map_err(err)?;
    if !(0.0..1.0).contains(&e) || !(t_end > 0.0) {
        return Err("need 0 <= e < 1 and a positive time span".into());
    }
    let el = |y: &[f64; 2]| OrbitElements { lambda, k: y[0], h_e: y[1], l: 0.0, sigma: 1.0 };
    let mut field = |_t: f64, y: &[f64; 2]| reduced_secular_field(&el(y), &sys);
    let y0 = [e, 0.0];
    let h = p.h();
    let d0 = d_of(lambda, p.m1, h, y0[0], y0[1]);
    let c = h * p.m1 / (lambda * lambda);
    let mut path = vec![y0];
    let mut status = "completed".to_string();
    let mut st = Dop853::new(&mut field, 0.0, y0, t_end, StepperOptions::with_tol(1e-9)).map_err(err)?;
    while st.t() < t_end && path.len() < 20_000 {
        match st.step(&mut field, t_end) {
            Ok(seg) => {
                for j in 1..=4 {
                    path.push(seg.eval(seg.t0 + seg.h * j as f64 / 4.0));
                }
            }
            Err(e) => {
                status = format!("stopped: {e}");
                break;
            }
        }
    }
    let max_d_drift = path.iter().map(|y| (d_of(lambda, p.m1, h, y[0], y[1]) - d0).abs()).fold(0.0, f64::max);
    json(&SecularView { path, circle_center: c, circle_radius: y0[0].hypot(y0[1] - c), max_d_drift, status })
}
