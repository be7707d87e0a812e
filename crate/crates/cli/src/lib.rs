//! Command implementations behind the `ribc` binary.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ribc::bounds::{compute_tn, compute_tn_star, mse_envelope, tau_tail_bound, tn_floor};
use ribc::controller::Controller;
use ribc::experiments::{mse_curve, run_experiment, tau_survival_curve, Frame, InitialState, TrialRecord};
use ribc::init::uniform_unit_ball;
use ribc::interaction::{InteractionModel, SeededStream};
use ribc::io::{
    write_bounds_table, write_curve, write_schedule, write_trajectory, write_trial_summary, BoundsRow, CurvePoint,
    Format,
};
use ribc::state::{ConfidenceProfile, SystemState};
use ribc::verify::{run_all, VerifyConfig};

use config::{Mode, RunConfig, Scale};

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Human-readable lines for standard output.
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    /// Whether every check of the run held.
    pub ok: bool,
}

impl Outcome {
    fn new() -> Self {
        Self { ok: true, ..Default::default() }
    }
}

fn file(dir: &Path, stem: &str, format: Format) -> PathBuf {
    dir.join(format!("{stem}.{}", format.extension()))
}

/// Executes a validated config, writing outputs under its output directory.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let echo = dir.join("config.toml");
    fs::write(&echo, cfg.to_toml()?).with_context(|| format!("writing {}", echo.display()))?;
    let mut out = match cfg.mode {
        Mode::Simulate => simulate(cfg, &dir)?,
        Mode::Cibc => cibc(cfg, &dir)?,
        Mode::Bounds => bounds(cfg, &dir)?,
        Mode::Montecarlo => montecarlo(cfg, &dir)?,
        Mode::Verify => verify(cfg, &dir)?,
    };
    out.files.insert(0, echo);
    Ok(out)
}

fn simulate(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::new();
    let records = run_experiment(&cfg.experiment())?;
    let traj = file(dir, "trajectory", cfg.format);
    write_trajectory(&records, &traj, cfg.format)?;
    let summary = file(dir, "summary", cfg.format);
    write_trial_summary(&records, &summary, cfg.format)?;
    for r in &records {
        match r.tau {
            Some(t) => out.lines.push(format!("trial {}: absorbed at t = {t}, {} cluster(s)", r.trial_id, r.clusters.len())),
            None => {
                out.ok = false;
                out.lines.push(format!("trial {}: step cap {} reached", r.trial_id, cfg.max_steps));
            }
        }
    }
    out.files.extend([traj, summary]);
    Ok(out)
}

fn cibc(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::new();
    let r = cfg.r.clone().expect("validated");
    let n = r.len();
    let profile = ConfidenceProfile::new(r)?;
    let state = match &cfg.init {
        InitialState::Explicit { opinions } => SystemState::new(opinions.clone())?,
        InitialState::UniformBall => uniform_unit_ball(n, cfg.d, &mut SeededStream::new(cfg.seed, 0))?,
        InitialState::Counterexample => bail!("init: the isolated-agent state is not supported in controlled runs"),
    };
    let mut ctl = Controller::new(state.clone(), &profile, 0.0)?;
    let mut frames = vec![Frame { t: 0, coords: state.coords().to_vec() }];
    while ctl.advance()?.is_some() {
        if ctl.time() % cfg.decimate == 0 {
            frames.push(Frame { t: ctl.time(), coords: ctl.state().coords().to_vec() });
        }
    }
    let run = ctl.into_run();
    if frames.last().map(|f| f.t) != Some(run.terminal_time) {
        frames.push(Frame { t: run.terminal_time, coords: run.final_state.coords().to_vec() });
    }
    let bound = compute_tn_star(n, profile.smallest())?;
    let partition = ribc::detect_clusters(&run.final_state, &profile, 0.0)?;
    let record = TrialRecord {
        trial_id: 0,
        master_seed: cfg.seed,
        stream_id: 0,
        tau: Some(run.terminal_time),
        initial: state,
        consensus: partition.is_consensus(),
        clusters: partition.clusters().to_vec(),
        final_state: run.final_state.clone(),
        trajectory: frames,
        decimate: Some(cfg.decimate),
    };
    let sched = file(dir, "schedule", cfg.format);
    write_schedule(&run.schedule, &sched, cfg.format)?;
    let traj = file(dir, "trajectory", cfg.format);
    write_trajectory(std::slice::from_ref(&record), &traj, cfg.format)?;
    let summary = file(dir, "summary", cfg.format);
    write_trial_summary(std::slice::from_ref(&record), &summary, cfg.format)?;
    out.ok = run.terminal_time <= bound;
    out.lines.push(format!(
        "terminal time {} (bound {bound}), {} merge(s), {} final cluster(s)",
        run.terminal_time,
        run.generated.len(),
        record.clusters.len()
    ));
    out.files.extend([sched, traj, summary]);
    Ok(out)
}

fn bounds_row(n: usize, r_n: f64, model: &InteractionModel) -> Result<BoundsRow> {
    Ok(BoundsRow {
        n,
        r_n,
        delta: model.delta_lower_bound(n)?,
        tn_star: compute_tn_star(n, r_n)?,
        tn: compute_tn(n, r_n)?,
        tn_floor: tn_floor(n, r_n)?,
    })
}

fn bounds(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::new();
    let r = cfg.r.as_ref().expect("validated");
    let n = r.len();
    let model = cfg.model.as_ref().expect("validated");
    let mut rows = vec![bounds_row(n, r[n - 1], model)?];
    let ns = if cfg.table_n.is_empty() { vec![n] } else { cfg.table_n.clone() };
    let rs = if cfg.table_r_n.is_empty() { vec![r[n - 1]] } else { cfg.table_r_n.clone() };
    if !cfg.table_n.is_empty() || !cfg.table_r_n.is_empty() {
        for &k in &ns {
            for &v in &rs {
                rows.push(bounds_row(k, v, model)?);
            }
        }
    }
    for row in &rows {
        out.lines.push(format!(
            "n = {}, r_n = {}: delta = {}, T_n* = {}, T_n = {}",
            row.n, row.r_n, row.delta, row.tn_star, row.tn
        ));
    }
    let path = file(dir, "bounds", cfg.format);
    write_bounds_table(&rows, &path, cfg.format)?;
    out.files.push(path);
    Ok(out)
}

fn montecarlo(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::new();
    let exp = cfg.experiment();
    let records = run_experiment(&exp)?;
    let summary = file(dir, "summary", cfg.format);
    write_trial_summary(&records, &summary, cfg.format)?;
    out.files.push(summary);
    let capped = records.iter().filter(|r| r.tau.is_none()).count();
    let consensus = records.iter().filter(|r| r.consensus).count();
    out.lines.push(format!("{} trials, {consensus} in consensus, {capped} reached the step cap", records.len()));
    if capped > 0 {
        out.ok = false;
        out.lines.push("curves skipped: capped trials have no absorption time".into());
        return Ok(out);
    }
    let n = exp.n;
    let r_n = exp.bounds[n - 1];
    // the envelopes are defined only for a smallest bound below 2
    let delta = exp.model.delta_lower_bound(n)?;
    let tstar = if r_n < 2.0 { Some(tn_floor(n, r_n)?) } else { None };
    let tail: Vec<CurvePoint> = tau_survival_curve(&records)?
        .into_iter()
        .map(|(t, p)| {
            let bound = tstar.map_or(Ok(f64::NAN), |ts| tau_tail_bound(t, ts, delta))?;
            Ok(CurvePoint { t, empirical: p, bound })
        })
        .collect::<ribc::Result<_>>()?;
    let mse: Vec<CurvePoint> = mse_curve(&records)?
        .into_iter()
        .map(|(t, v)| {
            let bound = if tstar.is_some() { mse_envelope(t, n, r_n, delta)? } else { f64::NAN };
            Ok(CurvePoint { t, empirical: v, bound })
        })
        .collect::<ribc::Result<_>>()?;
    let dominated = |c: &[CurvePoint]| c.iter().all(|p| p.bound.is_nan() || p.empirical <= p.bound);
    out.lines.push(format!(
        "tail curve under bound: {}, mean-square curve under envelope: {}",
        dominated(&tail),
        dominated(&mse)
    ));
    let tail_path = file(dir, "tau_curve", cfg.format);
    write_curve(&tail, &tail_path, cfg.format)?;
    let mse_path = file(dir, "mse_curve", cfg.format);
    write_curve(&mse, &mse_path, cfg.format)?;
    out.files.extend([tail_path, mse_path]);
    Ok(out)
}

fn verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::new();
    let vc = match cfg.scale {
        Scale::Desk => VerifyConfig::desk(cfg.seed),
        Scale::Full => VerifyConfig::full(cfg.seed),
    };
    let report = run_all(&vc);
    for c in &report.checks {
        out.lines.push(format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    out.ok = report.passed();
    let path = dir.join("verify.json");
    let text = serde_json::to_string_pretty(&report)? + "\n";
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    out.files.push(path);
    Ok(out)
}
