//! Verification suites run by `secbill check`.

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use secbill_core::flow::{integrate_with, poisson_bracket_fd, IntegrateOptions, Status, System, SystemKind, Trajectory};
use secbill_core::geometry::{ambient_form, conformal_factor, geodesic_distance, lift_to_surface, Vec2};
use secbill_core::model::{conformal_factor_std, corresponding_energy, energy_euclidean, from_partner, identity_residual};
use secbill_core::secular::{averaged_secondary_potential_nodes, AveragedSystem, OrbitElements};
use secbill_core::{ModelParams, PhaseState, Space};

use crate::output::{Csv, Field};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Brackets,
    Projective,
    Quadrature,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Brackets => "brackets",
            Suite::Projective => "projective",
            Suite::Quadrature => "quadrature",
        }
    }

    pub fn default_samples(self) -> usize {
        match self {
            Suite::Identities => 1000,
            Suite::Brackets => 100,
            Suite::Projective => 2000,
            Suite::Quadrature => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub label: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
}

impl CheckRow {
    fn at_most(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { label: label.into(), value, relation: Relation::AtMost, bound }
    }

    fn at_least(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { label: label.into(), value, relation: Relation::AtLeast, bound }
    }

    pub fn pass(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.value <= self.bound,
            Relation::AtLeast => self.value >= self.bound,
        }
    }
}

pub struct CheckReport {
    pub suite: Suite,
    pub rows: Vec<CheckRow>,
    /// Extra table (the quadrature convergence table).
    pub table: Option<Csv>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(CheckRow::pass)
    }

    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["label", "value", "relation", "bound", "pass"]);
        for r in &self.rows {
            let rel = match r.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            csv.row(&[Field::S(r.label.clone()), Field::F(r.value), Field::S(rel.into()), Field::F(r.bound), Field::S(r.pass().to_string())]);
        }
        csv
    }
}

pub struct CheckOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

pub fn run_check(suite: Suite, opts: &CheckOptions) -> Result<CheckReport, CliError> {
    let mut table = None;
    let rows = match suite {
        Suite::Identities => identities(opts.samples, opts.seed)?,
        Suite::Brackets => brackets(opts.samples, opts.seed)?,
        Suite::Projective => projective(opts.samples, opts.tol)?,
        Suite::Quadrature => {
            let (rows, t) = quadrature()?;
            table = Some(t);
            rows
        }
    };
    Ok(CheckReport { suite, rows, table })
}

fn curved_space(p: &ModelParams) -> Space {
    match p.space {
        Space::Hyperbolic => Space::Hyperbolic,
        _ => Space::Spherical,
    }
}

/// A random problem paired with the sphere (`space` Euclidean) or with the
/// hyperbolic plane, and a raw chart state well inside the chart and away
/// from both centers.
fn draw_sample(rng: &mut ChaCha8Rng, hyperbolic: bool, lagrange: bool) -> Result<(ModelParams, PhaseState), CliError> {
    let a = if hyperbolic { rng.gen_range(0.1..0.8) } else { rng.gen_range(0.1..2.0) };
    let f = if lagrange { rng.gen_range(0.05..0.5) } else { 0.0 };
    let space = if hyperbolic { Space::Hyperbolic } else { Space::Euclidean };
    let p = ModelParams::new(rng.gen_range(0.2..2.0), rng.gen_range(0.0..2.0), f, a, space)?;
    let cs = curved_space(&p);
    loop {
        let q: Vec2 = if hyperbolic {
            [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)]
        } else {
            [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]
        };
        if hyperbolic && q[0].hypot(q[1]) > 0.9 {
            continue;
        }
        let d1 = geodesic_distance(q, [0.0, a], cs)?;
        let d2 = geodesic_distance(q, [0.0, -a], cs)?;
        if d1 < 0.05 || d2 < 0.05 {
            continue;
        }
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        return Ok((p, PhaseState::new(q, v)));
    }
}

/// Curved energy through the ambient lift: metric kinetic energy plus
/// `-m s cot θ` (or `coth`) per center and `f tan² θ₀` (or `tanh²`) about the
/// chart center.
fn ambient_energy(p: &ModelParams, raw: &PhaseState) -> Result<f64, CliError> {
    let cs = curved_space(p);
    let lam = conformal_factor(raw.q, cs);
    // the raw state carries the partner velocity; the curved one is λ times it
    let lift = lift_to_surface(&PhaseState::new(raw.q, [lam * raw.v[0], lam * raw.v[1]]), cs)?;
    let s = p.frame().scale();
    let (cot, tan2): (fn(f64) -> f64, fn(f64) -> f64) = match cs {
        Space::Hyperbolic => (|x| 1.0 / x.tanh(), |x| x.tanh().powi(2)),
        _ => (|x| 1.0 / x.tan(), |x| x.tan().powi(2)),
    };
    let t1 = geodesic_distance(raw.q, [0.0, p.a], cs)?;
    let t2 = geodesic_distance(raw.q, [0.0, -p.a], cs)?;
    let t0 = geodesic_distance(raw.q, [0.0, 0.0], cs)?;
    Ok(0.5 * ambient_form(lift.velocity, lift.velocity, cs) - p.m1 * s * cot(t1) - p.m2 * s * cot(t2) + p.f * tan2(t0))
}

/// The right-hand side of the factorization spelled out in standardized
/// coordinates.
fn factorized_energy(p: &ModelParams, st: &PhaseState) -> f64 {
    let kappa = p.partner_curvature();
    let h = p.h();
    let [x, y] = st.q;
    let [vx, vy] = st.v;
    let r = x.hypot(y);
    let r2 = x.hypot(y + 2.0 * h);
    let c = x * vy - y * vx;
    let e_kep = 0.5 * (vx * vx + vy * vy) - p.m1 / r;
    let v2 = -p.m2 / r2 + p.f * (x * x + (y + h) * (y + h));
    let d = c * c - 2.0 * h * (c * vx + p.m1 * y / r);
    let k = 2.0 * p.m2 * h * (y + 2.0 * h) / r2 - 2.0 * p.f * h * h * x * x;
    (1.0 + kappa * p.a * p.a) * (e_kep + v2 + 0.5 * kappa * (d + k))
}

fn identities(samples: usize, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::new();
    for (hyp, lag) in [(false, false), (false, true), (true, false), (true, true)] {
        let name = match (hyp, lag) {
            (false, false) => "spherical two-center",
            (false, true) => "spherical Lagrange",
            (true, false) => "hyperbolic two-center",
            (true, true) => "hyperbolic Lagrange",
        };
        labels.push((hyp, lag, name, 0.0f64, 0.0f64));
    }
    for i in 0..samples {
        let slot = i % labels.len();
        let (hyp, lag) = (labels[slot].0, labels[slot].1);
        let (p, raw) = draw_sample(&mut rng, hyp, lag)?;
        let st = p.frame().standardize(&raw);
        let res = identity_residual(&st, &p)?.abs();
        let oracle = (ambient_energy(&p, &raw)? - factorized_energy(&p, &st)).abs();
        labels[slot].3 = labels[slot].3.max(res);
        labels[slot].4 = labels[slot].4.max(oracle);
    }
    let mut rows = Vec::new();
    for (_, _, name, res, oracle) in labels {
        rows.push(CheckRow::at_most(format!("{name}: max |identity_residual|"), res, 1e-10));
        rows.push(CheckRow::at_most(format!("{name}: max |ambient energy - factorized energy|"), oracle, 1e-10));
    }
    Ok(rows)
}

fn bracket_of(p: &ModelParams, q: &ModelParams, st: &PhaseState) -> Result<f64, CliError> {
    let z = st.to_array();
    let e1 = |y: &[f64; 4]| energy_euclidean(&PhaseState::from_array(y, 0.0), p);
    let e2 = |y: &[f64; 4]| corresponding_energy(&PhaseState::from_array(y, 0.0), q);
    Ok(poisson_bracket_fd(e1, e2, &z, None)?)
}

fn brackets(samples: usize, seed: u64) -> Result<Vec<CheckRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (hyp, lag, name) in [
        (false, false, "{E_Eucl, E_sph} two-center"),
        (false, true, "{E_Eucl, E_sph} Lagrange"),
        (true, false, "{E_Eucl, E_hyp} two-center"),
        (true, true, "{E_Eucl, E_hyp} Lagrange"),
    ] {
        let (mut worst, mut self_worst, mut control) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..samples {
            let (p, raw) = draw_sample(&mut rng, hyp, lag)?;
            let st = p.frame().standardize(&raw);
            worst = worst.max(bracket_of(&p, &p, &st)?.abs());
            let z = st.to_array();
            let e = |y: &[f64; 4]| energy_euclidean(&PhaseState::from_array(y, 0.0), &p);
            self_worst = self_worst.max(poisson_bracket_fd(e, e, &z, None)?.abs());
            // the curved energy of a problem with different center distance
            let other = ModelParams { a: p.a * 1.2, ..p };
            if other.validate().is_ok() {
                if let Ok(b) = bracket_of(&p, &other, &st) {
                    control = control.max(b.abs());
                }
            }
        }
        rows.push(CheckRow::at_most(format!("{name}: max |bracket|"), worst, 1e-6));
        rows.push(CheckRow::at_most(format!("{name}: max |{{E_Eucl, E_Eucl}}|"), self_worst, 1e-12));
        rows.push(CheckRow::at_least(format!("{name}: control with mismatched a, max |bracket|"), control, 1e-3));
    }
    Ok(rows)
}

fn kind_of(p: &ModelParams) -> SystemKind {
    if p.f == 0.0 {
        SystemKind::TwoCenter
    } else {
        SystemKind::Lagrange
    }
}

fn quiet(tol: f64) -> IntegrateOptions {
    IntegrateOptions { track_energy: false, ..IntegrateOptions::new(tol) }
}

fn completed(tr: Trajectory, what: &str) -> Result<Trajectory, CliError> {
    match &tr.status {
        Status::Completed => Ok(tr),
        Status::SingularityStop { reason, .. } => Err(CliError::Config(format!("{what} stopped early: {reason}"))),
    }
}

/// One-sided discrete Hausdorff distance from `n` points of the curved orbit
/// of `curved` through the partner state `e0`, over `t_curved`, to the
/// orbit of the Euclidean problem `euclid` through `e0`.
///
/// Each curved sample is matched near the Euclidean time predicted by
/// `dτ = λ dt` and the distance is minimized by golden-section search on the
/// dense output, so the result bounds the distance to the continuous curve.
pub fn projective_distance(curved: &ModelParams, euclid: &ModelParams, e0: &PhaseState, t_curved: f64, n: usize, tol: f64) -> Result<f64, CliError> {
    let cs = System::new(kind_of(curved), *curved)?;
    let tc = completed(integrate_with(&cs, &from_partner(e0, curved), t_curved, &quiet(tol))?, "curved orbit")?;
    let n = n.max(2);
    let mut pts = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut prev: Option<(f64, f64)> = None;
    let mut acc = 0.0;
    for i in 0..n {
        let t = if i + 1 == n { tc.t_end() } else { t_curved * i as f64 / (n - 1) as f64 };
        let s = tc.state_at(t).unwrap_or(*tc.last());
        let lam = conformal_factor_std(s.q, curved);
        if let Some((t0, l0)) = prev {
            acc += 0.5 * (lam + l0) * (t - t0);
        }
        prev = Some((t, lam));
        pts.push(s.q);
        tau.push(acc);
    }
    let es = System::new(kind_of(euclid), *euclid)?;
    let te = completed(integrate_with(&es, e0, acc + 1.0, &quiet(tol))?, "Euclidean orbit")?;
    let window = 0.02f64.max(4.0 * t_curved / n as f64);
    let mut worst = 0.0f64;
    for (q, t) in pts.iter().zip(&tau) {
        let dist = |s: f64| {
            let p = te.state_at(s.clamp(0.0, te.t_end())).expect("clamped into the trajectory").q;
            (p[0] - q[0]).hypot(p[1] - q[1])
        };
        let (mut a, mut b) = ((t - window).max(0.0), (t + window).min(te.t_end()));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (dist(c), dist(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = dist(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = dist(d);
            }
        }
        worst = worst.max(fc.min(fd).min(dist(*t)));
    }
    Ok(worst)
}

/// Pairs run by the projective suite: curved problem and partner state.
pub fn projective_pairs() -> Vec<(String, ModelParams, PhaseState)> {
    let e0 = PhaseState::new([0.6, 0.1], [0.1, 1.0]);
    let mut out = Vec::new();
    for space in [Space::Spherical, Space::Hyperbolic] {
        for f in [0.0, 0.15] {
            let p = ModelParams::new(1.0, 0.3, f, 0.5, space).expect("valid pair parameters");
            let kind = if f == 0.0 { "two-center" } else { "Lagrange" };
            out.push((format!("{} {kind}", space.name()), p, e0));
        }
    }
    out
}

pub const PROJECTIVE_SPAN: f64 = 20.0;

fn projective(samples: usize, tol: f64) -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();
    for (name, cp, e0) in projective_pairs() {
        let ep = cp.euclidean_partner()?;
        let d = projective_distance(&cp, &ep, &e0, PROJECTIVE_SPAN, samples, tol)?;
        rows.push(CheckRow::at_most(format!("{name}: Hausdorff distance"), d, 1e-6));
    }
    let (name, cp, e0) = projective_pairs().swap_remove(0);
    let h = 1.2 * cp.h();
    let wrong = ModelParams::new(cp.m1, cp.m2, cp.f, h / (1.0 - h * h).sqrt(), Space::Euclidean)?;
    let d = projective_distance(&cp, &wrong, &e0, PROJECTIVE_SPAN, samples, tol)?;
    rows.push(CheckRow::at_least(format!("{name}: control with mismatched h"), d, 1e-3));
    Ok(rows)
}

pub const QUADRATURE_ECCENTRICITIES: [f64; 4] = [0.0, 0.3, 0.6, 0.9];

/// Orbit of eccentricity `e` whose apocenter passes `QUADRATURE_GAP` from
/// the secondary center. A near approach keeps the integrand's complex
/// singularities close to the real axis, so the convergence rate is
/// visible above rounding at 64 and 128 nodes.
pub fn quadrature_orbit(p: &ModelParams, e: f64) -> OrbitElements {
    let alpha = (2.0 * p.h() - QUADRATURE_GAP) / (1.0 + e);
    OrbitElements { lambda: (alpha * p.m1).sqrt(), k: 0.0, h_e: e, l: 0.0, sigma: 1.0 }
}

pub const QUADRATURE_GAP: f64 = 0.08;

fn quadrature() -> Result<(Vec<CheckRow>, Csv), CliError> {
    let p = ModelParams::new(1.0, 0.3, 0.1, 1.0, Space::Euclidean)?;
    let sys = AveragedSystem::new(p, 1e-12, 1 << 16)?;
    let mut table = Csv::new(&["e", "nodes", "value", "abs_error", "reduction"]);
    let mut rows = Vec::new();
    for e in QUADRATURE_ECCENTRICITIES {
        let el = quadrature_orbit(&p, e);
        let reference = averaged_secondary_potential_nodes(&el, &sys, 16384)?;
        let floor = 1e-14 * reference.abs().max(1.0);
        let mut prev: Option<f64> = None;
        let (mut e64, mut e128) = (0.0, 0.0);
        for n in [16, 32, 64, 128, 256, 512] {
            let v = averaged_secondary_potential_nodes(&el, &sys, n)?;
            let err = (v - reference).abs();
            let red = prev.map_or(f64::NAN, |p| p / err);
            table.row(&[Field::F(e), Field::U(n), Field::F(v), Field::F(err), Field::F(red)]);
            if n == 64 {
                e64 = err;
            }
            if n == 128 {
                e128 = err;
            }
            prev = Some(err);
        }
        // once the error is at rounding level there is nothing left to reduce
        let reduction = if e64 <= floor { f64::INFINITY } else { e64 / e128.max(f64::MIN_POSITIVE) };
        rows.push(CheckRow::at_least(format!("e = {e}: error reduction 64 -> 128 nodes"), reduction, 10.0));
    }
    Ok((rows, table))
}
