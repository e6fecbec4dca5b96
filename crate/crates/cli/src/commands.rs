//! `simulate`, `solve-exact` and `compare`.

use crate::config::{InitialState, Method, Resolved, RunConfig};
use crate::output::{table, write_csv, write_json, Columns, Format, FromSuite, RunStatus, Table};
use crate::{classify, CliError, Command, Emission, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFICATION};
use serde::Serialize;
use spintoda::factor::{self, ExactRun, SolverOptions};
use spintoda::models::{
    reduced_eom_rhs, reduced_toda_rhs, spin_cm_eom_rhs_variant, toda_eom_rhs, PhaseState, Trajectory,
};
use spintoda::numint::{integrate, monitor_suite, IntegratorConfig, MonitorContext};
use spintoda::Result as CoreResult;

/// Default tolerance for `compare` and for the RK4 step-halving estimate.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Default RK4 step for `compare`.
pub const COMPARE_RK4_DT: f64 = 1e-4;

type Run<S> = (Trajectory<S>, RunStatus);

fn rk4<S: PhaseState>(
    rhs: &dyn Fn(&S) -> CoreResult<S>,
    st0: &S,
    grid: &[f64],
    rk4_dt: f64,
    tolerance: Option<f64>,
) -> Result<Run<S>, CliError> {
    let t_max = *grid.last().expect("grid is never empty");
    if grid.len() == 1 {
        let mut traj = Trajectory::new();
        traj.push(0.0, st0.clone());
        return Ok((traj, RunStatus::complete()));
    }
    let h = grid[1] - grid[0];
    let m = (h / rk4_dt).round().max(1.0) as usize;
    let mut cfg = IntegratorConfig::new(h / m as f64, t_max).recording_every(m);
    if let Some(tol) = tolerance {
        cfg = cfg.with_error_estimate(tol);
    }
    let out = integrate(rhs, st0, &cfg).map_err(classify)?;
    let mut status = match &out.truncated {
        Some(e) => RunStatus::truncated(out.trajectory.last().map_or(0.0, |(t, _)| t), e.to_string()),
        None => RunStatus::complete(),
    };
    if let Some(est) = out.error_estimate {
        status.warnings.push(format!("step-halving error estimate {est:.3e}"));
    }
    if out.accuracy_warning {
        status.warnings.push(format!("error estimate above tolerance {:.1e}", tolerance.unwrap_or(0.0)));
    }
    Ok((out.trajectory, status))
}

fn exact<S>(run: CoreResult<ExactRun<S>>) -> Result<Run<S>, CliError> {
    let run = run.map_err(classify)?;
    let status = match run.horizon {
        Some(h) => RunStatus::truncated(h.t, h.error.to_string()),
        None => RunStatus::complete(),
    };
    Ok((run.trajectory, status))
}

#[derive(Debug, Serialize)]
struct Component {
    name: String,
    deviation: f64,
}

#[derive(Debug, Serialize)]
struct CompareReport<'a> {
    config: &'a RunConfig,
    tolerance: f64,
    rk4_dt: f64,
    samples_compared: usize,
    common_t_max: f64,
    max_deviation: f64,
    pass: bool,
    components: Vec<Component>,
    exact: RunStatus,
    rk4: RunStatus,
    warnings: Vec<String>,
}

fn state_rows<S: Columns>(traj: &Trajectory<S>) -> Vec<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| {
            let mut row = Vec::new();
            s.values(&mut row);
            row
        })
        .collect()
}

fn compare_report<'a, S: Columns>(res: &'a Resolved, ex: &Run<S>, num: &Run<S>, rk4_dt: f64) -> (CompareReport<'a>, i32) {
    let names = S::names(res.setup.alg());
    let (a, b) = (state_rows(&ex.0), state_rows(&num.0));
    let n = a.len().min(b.len());
    let mut dev = vec![0.0f64; names.len()];
    for (ra, rb) in a.iter().zip(&b).take(n) {
        for (k, d) in dev.iter_mut().enumerate() {
            let v = (ra[k] - rb[k]).abs();
            *d = if v.is_nan() { f64::NAN } else { d.max(v) };
        }
    }
    let max_deviation = dev.iter().copied().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) });
    let tolerance = res.config.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    let mut warnings = Vec::new();
    if !(ex.1.complete && num.1.complete) || a.len() != b.len() {
        warnings.push(format!(
            "truncated comparison: only the common domain t <= {} is compared",
            ex.0.times.get(n.saturating_sub(1)).copied().unwrap_or(0.0)
        ));
    }
    let pass = max_deviation <= tolerance;
    let report = CompareReport {
        config: &res.config,
        tolerance,
        rk4_dt,
        samples_compared: n,
        common_t_max: ex.0.times.get(n.saturating_sub(1)).copied().unwrap_or(0.0),
        max_deviation,
        pass,
        components: names.into_iter().zip(dev).map(|(name, deviation)| Component { name, deviation }).collect(),
        exact: ex.1.clone(),
        rk4: num.1.clone(),
        warnings,
    };
    (report, if pass { EXIT_OK } else { EXIT_VERIFICATION })
}

fn emit_table(cfg: &RunConfig, status: &RunStatus, t: &Table, format: Format) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(&mut buf, cfg, status, t)?,
        Format::Json => write_json(&mut buf, cfg, status, t)?,
    }
    Ok(buf)
}

fn status_notes(label: &str, st: &RunStatus) -> Vec<String> {
    let mut notes: Vec<String> = st.warnings.iter().map(|w| format!("{label}: {w}")).collect();
    if let (Some(t), Some(r)) = (st.failure_time, &st.reason) {
        notes.push(format!("{label}: run truncated, failure at t = {t}: {r}"));
    }
    notes
}

fn execute<S: PhaseState + Columns + FromSuite>(
    cmd: Command<'_>,
    res: &Resolved,
    format: Format,
    st0: &S,
    rhs: &dyn Fn(&S) -> CoreResult<S>,
    solve: &dyn Fn(&[f64]) -> CoreResult<ExactRun<S>>,
) -> Result<Emission, CliError> {
    let ctx = MonitorContext {
        r: res.setup.family.clone(),
        variant: res.variant,
        constants: match &res.initial {
            InitialState::ReducedToda(_, c) => c.clone(),
            _ => vec![],
        },
    };
    let monitors = S::monitors(monitor_suite(&res.system.to_string(), &ctx).map_err(classify)?);
    let alg = res.setup.alg();
    let grid = &res.grid;
    match cmd {
        Command::Simulate => {
            res.require_method(&[Method::Rk4, Method::Both])?;
            let dt = res.rk4_dt.unwrap_or(if grid.len() > 1 { grid[1] - grid[0] } else { 1.0 });
            let tol = res.config.tolerance.unwrap_or(DEFAULT_TOLERANCE);
            let (traj, status) = rk4(rhs, st0, grid, dt, Some(tol))?;
            let body = emit_table(&res.config, &status, &table(alg, &traj, &monitors), format)?;
            let exit = if status.complete { EXIT_OK } else { EXIT_NUMERICAL };
            Ok(Emission { body, exit, notes: status_notes("rk4", &status) })
        }
        Command::SolveExact => {
            res.require_method(&[Method::Exact, Method::Both])?;
            res.require_exact_preconditions()?;
            let (traj, status) = exact(solve(grid))?;
            let body = emit_table(&res.config, &status, &table(alg, &traj, &monitors), format)?;
            let exit = if status.complete { EXIT_OK } else { EXIT_NUMERICAL };
            Ok(Emission { body, exit, notes: status_notes("exact", &status) })
        }
        Command::Compare => {
            res.require_method(&[Method::Both])?;
            res.require_exact_preconditions()?;
            let h = if grid.len() > 1 { grid[1] - grid[0] } else { COMPARE_RK4_DT };
            let dt = res.rk4_dt.unwrap_or(COMPARE_RK4_DT.min(h));
            let ex = exact(solve(grid))?;
            let num = rk4(rhs, st0, grid, dt, None)?;
            let (report, exit) = compare_report(res, &ex, &num, dt);
            let mut notes = status_notes("exact", &ex.1);
            notes.extend(status_notes("rk4", &num.1));
            notes.extend(report.warnings.iter().cloned());
            notes.push(format!(
                "max deviation {:.3e} against tolerance {:.1e}: {}",
                report.max_deviation,
                report.tolerance,
                if report.pass { "pass" } else { "FAIL" }
            ));
            let mut body = serde_json::to_vec_pretty(&report).expect("report serializes");
            body.push(b'\n');
            Ok(Emission { body, exit, notes })
        }
        Command::Verify { .. } => unreachable!("verify is dispatched separately"),
    }
}

pub fn trajectory_command(cmd: Command<'_>, cfg: &RunConfig, format: Format) -> Result<Emission, CliError> {
    let res = crate::config::resolve(cfg)?;
    let r = &res.setup.family;
    let opts = SolverOptions::default();
    match &res.initial {
        InitialState::SpinCm(st) => execute(
            cmd,
            &res,
            format,
            st,
            &|s| spin_cm_eom_rhs_variant(r, s, res.variant),
            &|g| factor::solve_spin_cm(r, st, g, &opts),
        ),
        InitialState::ReducedCm(st) => execute(
            cmd,
            &res,
            format,
            st,
            &|s| reduced_eom_rhs(r, s),
            &|g| factor::solve_reduced_cm(r, st, g, &opts),
        ),
        InitialState::SpinToda(st) => {
            execute(cmd, &res, format, st, &|s| toda_eom_rhs(r, s), &|g| factor::solve_toda(r, st, g))
        }
        InitialState::ReducedToda(st, c) => execute(
            cmd,
            &res,
            format,
            st,
            &|s| reduced_toda_rhs(r, s, c),
            &|g| factor::solve_toda_reduced(r, st, c, g),
        ),
    }
}
