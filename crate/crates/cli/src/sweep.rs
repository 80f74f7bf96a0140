//! Batches of scenarios: a base scenario plus a list of overrides.
//!
//! ```json
//! {"base": {...scenario...}, "runs": [{"name": "m2_01", "params": {"m2": 0.1}}, ...]}
//! ```
//!
//! Each override is merged key by key into the base (objects recursively,
//! everything else replaced). Runs with walls go through `billiard`, the rest
//! through `simulate`. Every run writes into its own directory, which is
//! assembled under a temporary name and renamed into place when complete.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::output::{write_atomic, Csv, Field};
use crate::run::{billiard, simulate, RunReport};
use crate::scenario::{parse_scenario_str, Scenario};
use crate::{CliError, Outcome};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Batch {
    base: Value,
    runs: Vec<Value>,
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// Expands a batch document into validated scenarios.
pub fn parse_batch(text: &str) -> Result<Vec<Scenario>, CliError> {
    let batch: Batch = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let base_name = batch.base.get("name").and_then(Value::as_str).unwrap_or("run").to_string();
    let mut out: Vec<Scenario> = Vec::with_capacity(batch.runs.len());
    for (i, patch) in batch.runs.iter().enumerate() {
        let mut doc = batch.base.clone();
        merge(&mut doc, patch);
        if patch.get("name").is_none() {
            doc["name"] = Value::String(format!("{base_name}_{i:03}"));
        }
        let sc = parse_scenario_str(&doc.to_string()).map_err(|e| CliError::Config(format!("run {i}: {e}")))?;
        if out.iter().any(|o| o.name == sc.name) {
            return Err(CliError::Config(format!("run {i}: duplicate name {:?}", sc.name)));
        }
        out.push(sc);
    }
    Ok(out)
}

pub struct SweepResult {
    pub name: String,
    pub outcome: Outcome,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

fn run_one(sc: &Scenario, out: &Path) -> Result<RunReport, CliError> {
    let final_dir = out.join(&sc.name);
    let tmp = out.join(format!(".{}.{}.partial", sc.name, std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    fs::write(tmp.join("scenario.json"), sc.to_json() + "\n")?;
    let report = if sc.walls.is_empty() { simulate(sc, &tmp, None) } else { billiard(sc, &tmp, None) };
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            let _ = fs::remove_dir_all(&tmp);
            return Err(e);
        }
    };
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir)?;
    }
    fs::rename(&tmp, &final_dir)?;
    Ok(report)
}

/// Runs the scenarios on `jobs` worker threads; each scenario runs sequentially.
pub fn run_sweep(scenarios: &[Scenario], out: &Path, jobs: usize) -> Result<Vec<SweepResult>, CliError> {
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<SweepResult> = pool.install(|| {
        use rayon::prelude::*;
        scenarios
            .par_iter()
            .map(|sc| match run_one(sc, out) {
                Ok(r) => SweepResult { name: sc.name.clone(), outcome: r.outcome, report: Some(r), error: None },
                Err(e) => SweepResult { name: sc.name.clone(), outcome: e.outcome(), report: None, error: Some(e.to_string()) },
            })
            .collect()
    });

    let mut csv = Csv::new(&[
        "name", "command", "exit_code", "status", "t_end", "steps", "drift_E_target", "drift_E_kep", "drift_D", "bounces", "max_dD_rel",
    ]);
    for r in &results {
        use Field::{F, S, U};
        match &r.report {
            Some(rep) => {
                let s = &rep.summary;
                let b = s.bounces.as_ref();
                csv.row(&[
                    S(r.name.clone()),
                    S(s.command.into()),
                    U(s.exit_code as usize),
                    S(s.status.clone()),
                    F(s.t_end),
                    U(s.steps),
                    F(s.drifts.e_target),
                    F(s.drifts.e_kep),
                    F(s.drifts.d),
                    U(b.map_or(0, |b| b.count)),
                    F(b.map_or(0.0, |b| b.max_rel_d_jump)),
                ]);
            }
            None => csv.row(&[
                S(r.name.clone()),
                S("none".into()),
                U(r.outcome.code() as usize),
                S("error".into()),
                F(f64::NAN),
                U(0),
                F(f64::NAN),
                F(f64::NAN),
                F(f64::NAN),
                U(0),
                F(f64::NAN),
            ]),
        }
    }
    write_atomic(&out.join("sweep.csv"), csv.as_str())?;
    Ok(results)
}

pub fn sweep_file(path: &Path) -> Result<Vec<Scenario>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_batch(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
