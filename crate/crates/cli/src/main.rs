use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use secbill_cli::checks::{run_check, CheckOptions, Suite};
use secbill_cli::output::write_atomic;
use secbill_cli::run::{billiard, simulate, RunReport};
use secbill_cli::scenario::{parse_scenario, Scenario};
use secbill_cli::sweep::{run_sweep, sweep_file};
use secbill_cli::{CliError, Outcome};

const AFTER_HELP: &str = "\
OUTPUT FILES
  trajectory.csv (simulate, billiard), one row per output sample:
    t                  time
    xi, eta            standardized chart position
    vxi, veta          standardized chart velocity (for averaged runs, the osculating velocity)
    E_target           energy of the governing system (averaged Hamiltonian for averaged runs)
    E_kep              Kepler energy about the primary, on the Euclidean partner state
    C                  angular momentum about the primary
    A1                 Laplace-Runge-Lenz component pointing to the secondary center
    D                  C^2 - 2 h A1
    E_sph              curved energy accompanying the partner state (hyperbolic for hyperbolic runs)
    identity_residual  E_sph - s^2 (E_kep + V2 + kappa (D + K) / 2)
  bounces.csv (billiard), one row per reflection:
    index, wall        bounce number and wall index in the scenario
    t, xi, eta         impact time and point
    vxi_pre, veta_pre, vxi_post, veta_post   velocities before and after
    E_target_pre, E_target_post, dE_target   governing energy and its jump
    E_kep_pre, E_kep_post, dE_kep            Kepler energy and its jump
    C_pre, C_post                            angular momentum
    D_pre, D_post, dD, dD_rel                D, its jump and |dD| / (1 + |D_pre|)
  summary.json: status, step counts, maximal drifts, bounce statistics and checks.
  check_<suite>.csv (check): label, value, relation, bound, pass.
  quadrature_table.csv (check quadrature): e, nodes, value, abs_error, reduction.
  sweep.csv (sweep): name, command, exit_code, status, t_end, steps, drift_E_target,
    drift_E_kep, drift_D, bounces, max_dD_rel.
  Numbers use the shortest decimal form that reads back to the same binary64.

EXIT CODES
  0 pass, 2 configuration error, 3 singularity stop, 4 billiard degeneracy,
  5 check failure, 1 other failure.";

#[derive(Parser)]
#[command(name = "secbill", version, about = "Two-center, Lagrange and Kepler problems on the plane, sphere and hyperbolic plane, their averaged flows, and Kepler billiards", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the integrator tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the quadrature tolerance of averaged systems.
    #[arg(long)]
    qtol: Option<f64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also render the trajectory (and walls) to this SVG file.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write trajectory.csv and summary.json.
    Simulate(RunArgs),
    /// Run a billiard scenario and write bounces.csv, trajectory.csv and summary.json.
    Billiard(RunArgs),
    /// Run a verification suite.
    Check {
        suite: Suite,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Integrator tolerance (projective suite).
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a batch of scenarios, one output directory each.
    Sweep {
        /// Batch JSON file: {"base": scenario, "runs": [overrides]}.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn load(args: &RunArgs) -> Result<Scenario, CliError> {
    let mut sc = parse_scenario(&args.scenario)?;
    if let Some(t) = args.tol {
        sc.run.tol = t;
    }
    if let Some(q) = args.qtol {
        sc.run.quad_tol = q;
    }
    if let Some(s) = args.seed {
        sc.seed = s;
    }
    sc.validate()?;
    Ok(sc)
}

fn report_run(r: &RunReport) {
    let s = &r.summary;
    println!("{} {}: {} (t = {}, {} steps, {} rows)", s.command, s.name, s.status, s.t_end, s.steps, s.rows);
    if let Some(reason) = &s.stop_reason {
        println!("  stop: {reason}");
    }
    if let Some(b) = &s.bounces {
        println!("  bounces {} (grazes {}), max |dD|/(1+|D|) {:e}, max |dE_kep| {:e}", b.count, b.grazes, b.max_rel_d_jump, b.max_abs_e_kep_jump);
    }
    for c in &s.checks {
        println!("  {} {} = {:e} (bound {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
}

fn execute(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let sc = load(&args)?;
            let r = simulate(&sc, &args.out, args.svg.as_deref())?;
            report_run(&r);
            Ok(r.outcome)
        }
        Command::Billiard(args) => {
            let sc = load(&args)?;
            let r = billiard(&sc, &args.out, args.svg.as_deref())?;
            report_run(&r);
            Ok(r.outcome)
        }
        Command::Check { suite, samples, seed, tol, out } => {
            let opts = CheckOptions { samples: samples.unwrap_or(suite.default_samples()), seed, tol };
            if !(1e-14..=1e-4).contains(&tol) {
                return Err(CliError::Config(format!("--tol {tol} outside [1e-14, 1e-4]")));
            }
            let report = run_check(suite, &opts)?;
            write_atomic(&out.join(format!("check_{}.csv", suite.name())), report.csv().as_str())?;
            if let Some(t) = &report.table {
                write_atomic(&out.join("quadrature_table.csv"), t.as_str())?;
            }
            for r in &report.rows {
                let rel = match r.relation {
                    secbill_cli::checks::Relation::AtMost => "<=",
                    secbill_cli::checks::Relation::AtLeast => ">=",
                };
                println!("{} {}: {:e} {rel} {:e}", if r.pass() { "PASS" } else { "FAIL" }, r.label, r.value, r.bound);
            }
            Ok(if report.pass() { Outcome::Pass } else { Outcome::CheckFailure })
        }
        Command::Sweep { scenario, out, jobs } => {
            let scenarios = sweep_file(&scenario)?;
            let results = run_sweep(&scenarios, &out, jobs)?;
            let mut worst = Outcome::Pass;
            for r in &results {
                match &r.error {
                    Some(e) => println!("{}: exit {} ({e})", r.name, r.outcome.code()),
                    None => println!("{}: exit {}", r.name, r.outcome.code()),
                }
                if r.outcome.code() > worst.code() {
                    worst = r.outcome;
                }
            }
            Ok(worst)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(o) => ExitCode::from(o.code() as u8),
        Err(e) => {
            eprintln!("secbill: {e}");
            ExitCode::from(e.outcome().code() as u8)
        }
    }
}
