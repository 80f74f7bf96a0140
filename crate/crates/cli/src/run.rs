//! `simulate` and `billiard`.

use std::path::Path;

use serde::Serialize;

use secbill_core::billiard::{run_billiard, BilliardStatus, BounceRecord};
use secbill_core::flow::{integrate_with, IntegrateOptions, Status, System, Trajectory};
use secbill_core::model::{identity_residual, to_partner};
use secbill_core::{FirstIntegrals, PhaseState};

use crate::output::{write_atomic, Csv, Field};
use crate::scenario::Scenario;
use crate::{svg, CliError, Outcome};

pub const TRAJECTORY_COLUMNS: [&str; 12] =
    ["t", "xi", "eta", "vxi", "veta", "E_target", "E_kep", "C", "A1", "D", "E_sph", "identity_residual"];

pub const BOUNCE_COLUMNS: [&str; 21] = [
    "index", "wall", "t", "xi", "eta", "vxi_pre", "veta_pre", "vxi_post", "veta_post", "E_target_pre", "E_target_post",
    "dE_target", "E_kep_pre", "E_kep_post", "dE_kep", "C_pre", "C_post", "D_pre", "D_post", "dD", "dD_rel",
];

/// Largest deviations from the first row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Drifts {
    pub e_target: f64,
    pub e_kep: f64,
    pub c: f64,
    /// Relative to `1 + |D(0)|`.
    pub d: f64,
    /// Relative to `|E_sph(0)|`.
    pub e_sph: f64,
    /// Largest `|identity_residual|` (not a drift).
    pub identity_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BounceSummary {
    pub count: usize,
    pub grazes: usize,
    pub max_abs_d_jump: f64,
    pub max_rel_d_jump: f64,
    pub max_abs_e_kep_jump: f64,
    pub max_rel_e_kep_jump: f64,
    pub max_abs_e_target_jump: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub command: &'static str,
    pub system: &'static str,
    pub space: &'static str,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub rows: usize,
    pub drifts: Drifts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounces: Option<BounceSummary>,
    pub checks: Vec<CheckLine>,
    pub exit_code: i32,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: Summary,
    pub outcome: Outcome,
    pub bounces: Vec<BounceRecord>,
}

struct Rows {
    csv: Csv,
    count: usize,
    drifts: Drifts,
    /// Evaluation error that cut the table short.
    stop: Option<String>,
}

fn output_states(traj: &Trajectory, sample_dt: Option<f64>) -> Vec<PhaseState> {
    let Some(dt) = sample_dt else {
        return traj.samples.clone();
    };
    let (t0, t1) = (traj.t_start(), traj.t_end());
    let n = ((t1 - t0) / dt).floor() as usize;
    let mut out: Vec<PhaseState> = (0..=n).filter_map(|i| traj.state_at(t0 + dt * i as f64)).collect();
    if out.last().is_none_or(|s| s.t < t1) {
        out.push(*traj.last());
    }
    out
}

fn integral_row(sys: &System, s: &PhaseState) -> secbill_core::Result<(FirstIntegrals, f64)> {
    let fi = sys.first_integrals(s)?;
    let res = identity_residual(&to_partner(s, &sys.params), &sys.params)?;
    Ok((fi, res))
}

fn trajectory_rows(sys: &System, states: &[PhaseState]) -> Rows {
    let mut rows = Rows { csv: Csv::new(&TRAJECTORY_COLUMNS), count: 0, drifts: Drifts::default(), stop: None };
    let mut first: Option<FirstIntegrals> = None;
    for s in states {
        let (fi, res) = match integral_row(sys, s) {
            Ok(r) => r,
            Err(e) => {
                rows.stop = Some(format!("integrals at t = {}: {e}", s.t));
                break;
            }
        };
        let f0 = *first.get_or_insert(fi);
        let d = &mut rows.drifts;
        d.e_target = d.e_target.max((fi.e_target - f0.e_target).abs());
        d.e_kep = d.e_kep.max((fi.e_kep - f0.e_kep).abs());
        d.c = d.c.max((fi.c - f0.c).abs());
        d.d = d.d.max((fi.d - f0.d).abs() / (1.0 + f0.d.abs()));
        d.e_sph = d.e_sph.max((fi.e_sph - f0.e_sph).abs() / f0.e_sph.abs());
        d.identity_residual = d.identity_residual.max(res.abs());
        use Field::F;
        rows.csv.row(&[
            F(s.t),
            F(s.q[0]),
            F(s.q[1]),
            F(s.v[0]),
            F(s.v[1]),
            F(fi.e_target),
            F(fi.e_kep),
            F(fi.c),
            F(fi.a1()),
            F(fi.d),
            F(fi.e_sph),
            F(res),
        ]);
        rows.count += 1;
    }
    rows
}

fn bound_line(name: &str, value: f64, bound: Option<f64>) -> Option<CheckLine> {
    bound.map(|b| CheckLine { name: name.into(), value, bound: b, pass: value <= b })
}

fn drift_checks(sc: &Scenario, d: &Drifts) -> Vec<CheckLine> {
    let c = &sc.checks;
    [
        bound_line("energy_drift", d.e_target, c.energy_drift),
        bound_line("kepler_drift", d.e_kep, c.kepler_drift),
        bound_line("d_drift", d.d, c.d_drift),
        bound_line("e_sph_drift", d.e_sph, c.e_sph_drift),
        bound_line("identity_residual", d.identity_residual, c.identity_residual),
    ]
    .into_iter()
    .flatten()
    .collect()
}

fn polyline(states: &[PhaseState]) -> Vec<[f64; 2]> {
    states.iter().map(|s| s.q).collect()
}

fn finish(
    sc: &Scenario,
    command: &'static str,
    traj: &Trajectory,
    rows: &Rows,
    status: String,
    stop_reason: Option<String>,
    mut outcome: Outcome,
    checks: Vec<CheckLine>,
    bounces: Option<BounceSummary>,
) -> Summary {
    if outcome == Outcome::Pass && checks.iter().any(|c| !c.pass) {
        outcome = Outcome::CheckFailure;
    }
    Summary {
        name: sc.name.clone(),
        command,
        system: sc.system.name(),
        space: sc.space.name(),
        status,
        stop_reason,
        t_start: traj.t_start(),
        t_end: traj.t_end(),
        steps: traj.stats.steps,
        rejected: traj.stats.rejected,
        evaluations: traj.stats.evaluations,
        rows: rows.count,
        drifts: rows.drifts,
        bounces,
        checks,
        exit_code: outcome.code(),
    }
}

fn write_summary(out: &Path, summary: &Summary) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(summary).expect("summaries serialize");
    text.push('\n');
    write_atomic(&out.join("summary.json"), &text)?;
    Ok(())
}

pub fn simulate(sc: &Scenario, out: &Path, svg_path: Option<&Path>) -> Result<RunReport, CliError> {
    let sys = sc.system()?;
    let s0 = sc.initial_state()?;
    let traj = integrate_with(&sys, &s0, sc.run.t_end, &IntegrateOptions { track_energy: false, ..IntegrateOptions::new(sc.run.tol) })?;
    let states = output_states(&traj, sc.run.sample_dt);
    let rows = trajectory_rows(&sys, &states);
    let (status, mut reason, mut outcome) = match &traj.status {
        Status::Completed => ("completed".to_string(), None, Outcome::Pass),
        Status::SingularityStop { reason, .. } => ("singularity_stop".to_string(), Some(reason.clone()), Outcome::SingularityStop),
    };
    if let Some(stop) = &rows.stop {
        reason = Some(stop.clone());
        outcome = Outcome::SingularityStop;
    }
    let status = if outcome == Outcome::SingularityStop { "singularity_stop".to_string() } else { status };
    let checks = drift_checks(sc, &rows.drifts);
    let summary = finish(sc, "simulate", &traj, &rows, status, reason, outcome, checks, None);
    write_atomic(&out.join("trajectory.csv"), rows.csv.as_str())?;
    write_summary(out, &summary)?;
    if let Some(p) = svg_path {
        svg::render(p, &sys.params, &[polyline(&states)], &[])?;
    }
    let outcome = Outcome::from_code(summary.exit_code);
    Ok(RunReport { summary, outcome, bounces: Vec::new() })
}

pub fn billiard(sc: &Scenario, out: &Path, svg_path: Option<&Path>) -> Result<RunReport, CliError> {
    let walls = sc.require_walls()?;
    let sys = sc.system()?;
    let s0 = sc.initial_state()?;
    let run = run_billiard(&sys, &walls, &s0, sc.run.t_end, sc.run.max_bounces, sc.run.tol)
        .map_err(|e| match e {
            secbill_core::Error::InvalidParameter(m) => CliError::Config(m),
            e => CliError::Model(e),
        })?;
    let states = output_states(&run.trajectory, sc.run.sample_dt);
    let rows = trajectory_rows(&sys, &states);

    let mut csv = Csv::new(&BOUNCE_COLUMNS);
    let mut bs = BounceSummary { count: run.bounces.len(), grazes: run.grazes.len(), ..Default::default() };
    for b in &run.bounces {
        let rel_d = b.delta_d().abs() / (1.0 + b.pre.d.abs());
        let rel_e = b.delta_e_kep().abs() / (1.0 + b.pre.e_kep.abs());
        bs.max_abs_d_jump = bs.max_abs_d_jump.max(b.delta_d().abs());
        bs.max_rel_d_jump = bs.max_rel_d_jump.max(rel_d);
        bs.max_abs_e_kep_jump = bs.max_abs_e_kep_jump.max(b.delta_e_kep().abs());
        bs.max_rel_e_kep_jump = bs.max_rel_e_kep_jump.max(rel_e);
        bs.max_abs_e_target_jump = bs.max_abs_e_target_jump.max(b.delta_e_target().abs());
        use Field::{F, U};
        csv.row(&[
            U(b.index),
            U(b.wall),
            F(b.t),
            F(b.point[0]),
            F(b.point[1]),
            F(b.v_pre[0]),
            F(b.v_pre[1]),
            F(b.v_post[0]),
            F(b.v_post[1]),
            F(b.pre.e_target),
            F(b.post.e_target),
            F(b.delta_e_target()),
            F(b.pre.e_kep),
            F(b.post.e_kep),
            F(b.delta_e_kep()),
            F(b.pre.c),
            F(b.post.c),
            F(b.pre.d),
            F(b.post.d),
            F(b.delta_d()),
            F(rel_d),
        ]);
    }

    let (status, mut reason, mut outcome) = match &run.status {
        BilliardStatus::Completed => ("completed".to_string(), None, Outcome::Pass),
        BilliardStatus::MaxBounces => ("max_bounces".to_string(), None, Outcome::Pass),
        BilliardStatus::SingularityStop { reason, .. } => ("singularity_stop".to_string(), Some(reason.clone()), Outcome::SingularityStop),
        BilliardStatus::FocusDegeneracy { t } => ("focus_degeneracy".to_string(), Some(format!("impact at a focus at t = {t}")), Outcome::Degeneracy),
        BilliardStatus::CornerDegeneracy { t } => {
            ("corner_degeneracy".to_string(), Some(format!("impact at an arc endpoint at t = {t}")), Outcome::Degeneracy)
        }
    };
    if let (Some(stop), Outcome::Pass) = (&rows.stop, outcome) {
        reason = Some(stop.clone());
        outcome = Outcome::SingularityStop;
    }
    let mut checks = drift_checks(sc, &rows.drifts);
    checks.extend(bound_line("bounce_d", bs.max_rel_d_jump, sc.checks.bounce_d));
    checks.extend(bound_line("bounce_e_kep", bs.max_rel_e_kep_jump, sc.checks.bounce_e_kep));
    if let Some(n) = sc.checks.min_bounces {
        checks.push(CheckLine { name: "min_bounces".into(), value: bs.count as f64, bound: n as f64, pass: bs.count >= n });
    }
    let summary = finish(sc, "billiard", &run.trajectory, &rows, status, reason, outcome, checks, Some(bs));
    write_atomic(&out.join("trajectory.csv"), rows.csv.as_str())?;
    write_atomic(&out.join("bounces.csv"), csv.as_str())?;
    write_summary(out, &summary)?;
    if let Some(p) = svg_path {
        svg::render(p, &sys.params, &[polyline(&states)], &walls)?;
    }
    let outcome = Outcome::from_code(summary.exit_code);
    Ok(RunReport { summary, outcome, bounces: run.bounces })
}
