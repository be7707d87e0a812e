//! Monte Carlo harness for the randomly interacting system.
//!
//! Trial `k` of an experiment draws everything (initial opinions, then one edge set per step)
//! from the stream `(master_seed, k)`, so trials are independent, reproducible, and can run in
//! any order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{detect_clusters, is_e1};
use crate::dynamics::step;
use crate::error::{Error, Result};
use crate::init::{random_direction, uniform_in_ball, uniform_unit_ball};
use crate::interaction::{sample_edge_set, InteractionModel, SeededStream};
use crate::state::{euclidean, norm, ConfidenceProfile, SystemState};

pub const DEFAULT_MAX_STEPS: u64 = 100_000;
pub const DEFAULT_EPS_EQ: f64 = 1e-9;
/// Random steps applied after absorption to confirm the state no longer moves.
pub const ABSORPTION_CHECK_STEPS: u64 = 100;

/// How the opinions at time 0 are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    /// The same opinions for every trial.
    Explicit { opinions: Vec<Vec<f64>> },
    /// Independent uniform draws from the unit ball, fresh per trial.
    UniformBall,
    /// Agent 0 isolated from the rest, using the first confidence bound; see
    /// [`counterexample_init`].
    Counterexample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub bounds: Vec<f64>,
    pub init: InitialState,
    pub model: InteractionModel,
    /// Tolerance for treating two opinions as equal; 0 demands bitwise equality.
    pub eps_eq: f64,
    pub trials: u64,
    pub max_steps: u64,
    pub master_seed: u64,
    /// Keep every `k`-th state of each trial; `None` keeps no trajectory.
    pub decimate: Option<u64>,
}

impl ExperimentConfig {
    /// A config with default tolerance, step cap, seed 0, one trial, and no trajectory.
    pub fn new(bounds: Vec<f64>, d: usize, init: InitialState, model: InteractionModel) -> Self {
        Self {
            n: bounds.len(),
            d,
            bounds,
            init,
            model,
            eps_eq: DEFAULT_EPS_EQ,
            trials: 1,
            max_steps: DEFAULT_MAX_STEPS,
            master_seed: 0,
            decimate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Domain(format!("agent count n must be at least 3, got {}", self.n)));
        }
        if self.d == 0 {
            return Err(Error::Domain("opinion dimension d must be at least 1".into()));
        }
        if self.bounds.len() != self.n {
            return Err(Error::AgentCountMismatch { expected: self.n, got: self.bounds.len() });
        }
        ConfidenceProfile::new(self.bounds.clone())?;
        self.model.validate(self.n)?;
        if !(self.eps_eq >= 0.0 && self.eps_eq.is_finite()) {
            return Err(Error::Domain(format!("eps_eq must be finite and nonnegative, got {}", self.eps_eq)));
        }
        if self.trials == 0 {
            return Err(Error::Domain("trials must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Domain("max_steps must be at least 1".into()));
        }
        if self.decimate == Some(0) {
            return Err(Error::Domain("decimate must be at least 1".into()));
        }
        match &self.init {
            InitialState::Explicit { opinions } => {
                let s = SystemState::new(opinions.clone())?;
                if s.len() != self.n {
                    return Err(Error::AgentCountMismatch { expected: self.n, got: s.len() });
                }
                if s.dim() != self.d {
                    return Err(Error::DimensionMismatch { expected: self.d, got: s.dim() });
                }
            }
            InitialState::UniformBall => {}
            InitialState::Counterexample => {
                if self.bounds[0] >= 2.0 {
                    return Err(Error::Domain(format!(
                        "the isolated-agent initial state needs the first bound below 2, got {}",
                        self.bounds[0]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<ConfidenceProfile<f64>> {
        ConfidenceProfile::new(self.bounds.clone())
    }

    fn initial_state(&self, rng: &mut SeededStream) -> Result<SystemState<f64>> {
        match &self.init {
            InitialState::Explicit { opinions } => SystemState::new(opinions.clone()),
            InitialState::UniformBall => uniform_unit_ball(self.n, self.d, rng),
            InitialState::Counterexample => counterexample_init(self.n, self.d, self.bounds[0], rng),
        }
    }
}

/// A stored state of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: u64,
    /// Row-major opinions, `n * d` values.
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub master_seed: u64,
    pub stream_id: u64,
    /// First time the absorbing event holds; `None` if the step cap was reached first.
    pub tau: Option<u64>,
    pub initial: SystemState<f64>,
    /// State at `tau`, or at the step cap.
    pub final_state: SystemState<f64>,
    pub clusters: Vec<Vec<usize>>,
    pub consensus: bool,
    /// Every `decimate`-th state from time 0, plus the final state.
    pub trajectory: Vec<Frame>,
    pub decimate: Option<u64>,
}

impl TrialRecord {
    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn d(&self) -> usize {
        self.initial.dim()
    }
}

fn frame(state: &SystemState<f64>) -> Frame {
    Frame { t: state.time(), coords: state.coords().to_vec() }
}

fn unchanged(a: &SystemState<f64>, b: &SystemState<f64>, eps: f64) -> bool {
    if eps == 0.0 {
        a.coords() == b.coords()
    } else {
        a.opinions().zip(b.opinions()).all(|(x, y)| euclidean(x, y) <= eps)
    }
}

/// Runs one trial until the absorbing event or the step cap, then confirms absorption.
///
/// Reaching the cap is recorded as `tau = None`. An absorbed state that moves by more than
/// `eps_eq` during the confirmation steps is an error.
pub fn run_trial(config: &ExperimentConfig, trial_id: u64) -> Result<TrialRecord> {
    config.validate()?;
    let profile = config.profile()?;
    let mut rng = SeededStream::new(config.master_seed, trial_id);
    let initial = config.initial_state(&mut rng)?;
    let mut state = initial.clone();
    let mut trajectory = Vec::new();
    let keep = |t: u64| config.decimate.is_some_and(|k| t % k == 0);
    let tau = loop {
        let t = state.time();
        if keep(t) {
            trajectory.push(frame(&state));
        }
        if is_e1(&state, &profile, config.eps_eq) {
            break Some(t);
        }
        if t >= config.max_steps {
            break None;
        }
        let edges = sample_edge_set(&config.model, config.n, &mut rng);
        state = step(&state, &profile, &edges)?;
    };
    if config.decimate.is_some() && trajectory.last().map(|f| f.t) != Some(state.time()) {
        trajectory.push(frame(&state));
    }
    if tau.is_some() {
        let mut probe = state.clone();
        for k in 1..=ABSORPTION_CHECK_STEPS {
            let edges = sample_edge_set(&config.model, config.n, &mut rng);
            probe = step(&probe, &profile, &edges)?;
            if !unchanged(&state, &probe, config.eps_eq) {
                return Err(Error::AbsorptionViolated { trial: trial_id, step: k });
            }
        }
    }
    let partition = detect_clusters(&state, &profile, config.eps_eq)?;
    Ok(TrialRecord {
        trial_id,
        master_seed: config.master_seed,
        stream_id: trial_id,
        tau,
        initial,
        consensus: partition.is_consensus(),
        clusters: partition.clusters().to_vec(),
        final_state: state,
        trajectory,
        decimate: config.decimate,
    })
}

/// Runs all trials in parallel; the result is ordered by trial id.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    (0..config.trials).into_par_iter().map(|k| run_trial(config, k)).collect()
}

/// Empirical `P(tau >= t)` for `t = 0, 1, ..., max tau + 1`.
pub fn tau_survival_curve(records: &[TrialRecord]) -> Result<Vec<(u64, f64)>> {
    let taus = completed_taus(records)?;
    let last = taus.iter().copied().max().unwrap_or(0);
    let total = taus.len() as f64;
    Ok((0..=last + 1)
        .map(|t| (t, taus.iter().filter(|&&tau| tau >= t).count() as f64 / total))
        .collect())
}

fn completed_taus(records: &[TrialRecord]) -> Result<Vec<u64>> {
    if records.is_empty() {
        return Err(Error::InvalidRecords("no trial records".into()));
    }
    records
        .iter()
        .map(|r| {
            r.tau.ok_or_else(|| {
                Error::InvalidRecords(format!("trial {} reached the step cap before absorbing", r.trial_id))
            })
        })
        .collect()
}

/// Squared distance to the absorbed state, summed over agents and averaged over trials.
///
/// Each trial's limit is its own state at `tau`. Points lie on the common decimation grid
/// `0, k, 2k, ...` and run until the first grid point at or after the largest `tau`, where the
/// curve is 0.
pub fn mse_curve(records: &[TrialRecord]) -> Result<Vec<(u64, f64)>> {
    let taus = completed_taus(records)?;
    let k = records[0]
        .decimate
        .ok_or_else(|| Error::InvalidRecords("mse curve needs recorded trajectories".into()))?;
    if records.iter().any(|r| r.decimate != Some(k)) {
        return Err(Error::InvalidRecords("trajectories use different decimation".into()));
    }
    let last = taus.iter().copied().max().unwrap_or(0);
    let grid: Vec<u64> = (0..).map(|m| m * k).take_while(|&t| t < last + k).collect();
    let mut sums = vec![0.0; grid.len()];
    for r in records {
        let tau = r.tau.expect("checked above");
        let target = r.final_state.coords();
        for (slot, &t) in sums.iter_mut().zip(&grid) {
            if t >= tau {
                break;
            }
            let f = r
                .trajectory
                .iter()
                .find(|f| f.t == t)
                .ok_or_else(|| Error::InvalidRecords(format!("trial {} has no state at t = {t}", r.trial_id)))?;
            *slot += f.coords.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    let total = records.len() as f64;
    Ok(grid.into_iter().zip(sums).map(|(t, s)| (t, s / total)).collect())
}

/// Per-time deviation samples behind [`mse_curve`], one row per trial, for error estimates.
pub fn mse_samples(records: &[TrialRecord], t: u64) -> Result<Vec<f64>> {
    completed_taus(records)?;
    records
        .iter()
        .map(|r| {
            if t >= r.tau.expect("checked above") {
                return Ok(0.0);
            }
            let f = r
                .trajectory
                .iter()
                .find(|f| f.t == t)
                .ok_or_else(|| Error::InvalidRecords(format!("trial {} has no state at t = {t}", r.trial_id)))?;
            Ok(f.coords.iter().zip(r.final_state.coords()).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReport {
    pub trials: u64,
    pub consensus_count: u64,
    pub all_consensus: bool,
    pub tau_min: u64,
    pub tau_max: u64,
    pub tau_mean: f64,
    pub records: Vec<TrialRecord>,
}

/// Runs an experiment whose first agent reaches the whole unit ball (`bounds[0] >= 2`), so
/// every trial should end in consensus.
pub fn consensus_experiment(config: &ExperimentConfig) -> Result<ConsensusReport> {
    config.validate()?;
    if config.bounds[0] < 2.0 {
        return Err(Error::Domain(format!("the first confidence bound must be at least 2, got {}", config.bounds[0])));
    }
    match &config.init {
        InitialState::Explicit { opinions } => {
            if let Some(i) = opinions.iter().position(|x| norm(x) > 1.0) {
                return Err(Error::Domain(format!("initial opinion of agent {i} lies outside the unit ball")));
            }
        }
        InitialState::UniformBall => {}
        InitialState::Counterexample => unreachable!("rejected by validate for bounds[0] >= 2"),
    }
    let records = run_experiment(config)?;
    let taus = completed_taus(&records)?;
    let consensus_count = records.iter().filter(|r| r.consensus).count() as u64;
    Ok(ConsensusReport {
        trials: config.trials,
        consensus_count,
        all_consensus: consensus_count == config.trials,
        tau_min: taus.iter().copied().min().unwrap_or(0),
        tau_max: taus.iter().copied().max().unwrap_or(0),
        tau_mean: taus.iter().sum::<u64>() as f64 / taus.len() as f64,
        records,
    })
}

/// Initial state in which agent 0 can never interact with anyone.
///
/// A point `z` with `|z| = (4 + r1) / 6` is drawn in a random direction; agent 0 is uniform in
/// the ball of radius `(2 - r1) / 6` around `z` and the others are uniform in the same-sized ball
/// around `-z`. Every cross distance is then at least `(2 + 2 r1) / 3 > r1`, and all opinions
/// lie in the unit ball.
pub fn counterexample_init(n: usize, d: usize, r1: f64, rng: &mut SeededStream) -> Result<SystemState<f64>> {
    if !(r1 > 0.0 && r1 < 2.0) {
        return Err(Error::Domain(format!("isolating bound must lie in (0, 2), got {r1}")));
    }
    if n < 2 || d == 0 {
        return Err(Error::EmptyState);
    }
    let dir = random_direction(d, rng);
    let z: Vec<f64> = dir.iter().map(|v| v * (4.0 + r1) / 6.0).collect();
    let minus_z: Vec<f64> = z.iter().map(|v| -v).collect();
    let radius = (2.0 - r1) / 6.0;
    let mut coords = uniform_in_ball(&z, radius, rng);
    for _ in 1..n {
        coords.extend(uniform_in_ball(&minus_z, radius, rng));
    }
    SystemState::from_flat(n, d, coords)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationReport {
    pub steps: u64,
    /// Smallest distance from agent 0 to any other agent over the whole run.
    pub min_separation: f64,
    /// First step at which agent 0 came within its bound of someone or moved.
    pub violated_at: Option<u64>,
}

impl IsolationReport {
    pub fn holds(&self) -> bool {
        self.violated_at.is_none()
    }
}

/// Simulates `steps` random steps from `state` and checks, at every step, that agent 0 stays
/// out of reach of all others (`|x_0 - x_i| > r_0`) and never moves.
pub fn isolation_check(
    state: &SystemState<f64>,
    profile: &ConfidenceProfile<f64>,
    model: &InteractionModel,
    steps: u64,
    rng: &mut SeededStream,
) -> Result<IsolationReport> {
    model.validate(state.len())?;
    let anchor = state.opinion(0).to_vec();
    let r0 = profile.bound(0);
    let separation = |s: &SystemState<f64>| (1..s.len()).map(|i| s.distance(0, i)).fold(f64::INFINITY, f64::min);
    let mut current = state.clone();
    let mut min_separation = separation(&current);
    let mut violated_at = (min_separation <= r0).then_some(0);
    for t in 1..=steps {
        if violated_at.is_some() {
            break;
        }
        let edges = sample_edge_set(model, current.len(), rng);
        current = step(&current, profile, &edges)?;
        let sep = separation(&current);
        min_separation = min_separation.min(sep);
        if sep <= r0 || current.opinion(0) != anchor.as_slice() {
            violated_at = Some(t);
        }
    }
    Ok(IsolationReport { steps, min_separation, violated_at })
}

/// Volume of the `d`-dimensional ball of radius `a`: `pi^(d/2) / Gamma(d/2 + 1) * a^d`.
pub fn sphere_volume(d: usize, a: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive and finite, got {a}")));
    }
    let half = d as f64 / 2.0;
    Ok(std::f64::consts::PI.powf(half) / libm::tgamma(half + 1.0) * a.powi(d as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn er(p: f64) -> InteractionModel {
        InteractionModel::ErdosRenyi { p }
    }

    fn explicit(xs: &[f64]) -> InitialState {
        InitialState::Explicit { opinions: xs.iter().map(|&x| vec![x]).collect() }
    }

    #[test]
    fn absorbed_start_has_tau_zero() {
        let cfg = ExperimentConfig::new(vec![0.5; 3], 1, explicit(&[0.0, 0.0, 1.0]), er(0.5));
        let rec = run_trial(&cfg, 0).unwrap();
        assert_eq!(rec.tau, Some(0));
        assert_eq!(rec.clusters, vec![vec![0, 1], vec![2]]);
        assert!(!rec.consensus);
    }

    #[test]
    fn close_agents_absorb() {
        let mut cfg = ExperimentConfig::new(vec![0.7; 3], 1, explicit(&[0.0, 0.3, 0.6]), er(0.5));
        cfg.trials = 200;
        cfg.master_seed = 11;
        for rec in run_experiment(&cfg).unwrap() {
            let tau = rec.tau.expect("absorbs before the cap");
            assert_eq!(rec.final_state.time(), tau);
            assert!(is_e1(&rec.final_state, &cfg.profile().unwrap(), cfg.eps_eq));
        }
    }

    #[test]
    fn step_cap_is_recorded() {
        let mut cfg = ExperimentConfig::new(vec![0.7; 3], 1, explicit(&[0.0, 0.3, 0.6]), er(0.01));
        cfg.max_steps = 1;
        cfg.eps_eq = 0.0;
        let recs: Vec<_> = (0..20).map(|k| run_trial(&cfg, k).unwrap()).collect();
        assert!(recs.iter().any(|r| r.tau.is_none()));
        assert!(recs.iter().all(|r| r.final_state.time() <= 1));
        assert!(tau_survival_curve(&recs).is_err());
    }

    #[test]
    fn trials_are_reproducible() {
        let mut cfg = ExperimentConfig::new(vec![1.0, 0.8, 0.6, 0.4], 2, InitialState::UniformBall, er(0.4));
        cfg.trials = 8;
        cfg.master_seed = 99;
        cfg.decimate = Some(1);
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
        let seq: Vec<_> = (0..8).map(|k| run_trial(&cfg, k).unwrap()).collect();
        assert_eq!(run_experiment(&cfg).unwrap(), seq);
    }

    fn record_with_tau(tau: u64) -> TrialRecord {
        let s = SystemState::from_scalars(&[0.0, 0.0, 0.0]).unwrap();
        TrialRecord {
            trial_id: 0,
            master_seed: 0,
            stream_id: 0,
            tau: Some(tau),
            initial: s.clone(),
            final_state: s.with_time(tau),
            clusters: vec![vec![0, 1, 2]],
            consensus: true,
            trajectory: Vec::new(),
            decimate: None,
        }
    }

    #[test]
    fn survival_curve_examples() {
        let curve = tau_survival_curve(&[record_with_tau(0), record_with_tau(0)]).unwrap();
        assert_eq!(curve, vec![(0, 1.0), (1, 0.0)]);
        let curve = tau_survival_curve(&[record_with_tau(5)]).unwrap();
        assert_eq!(curve.len(), 7);
        assert!(curve[..6].iter().all(|&(_, p)| p == 1.0));
        assert_eq!(curve[6], (6, 0.0));
        assert!(tau_survival_curve(&[]).is_err());
    }

    #[test]
    fn mse_curve_ends_at_zero_and_starts_below_4n() {
        let mut cfg = ExperimentConfig::new(vec![0.7; 3], 2, InitialState::UniformBall, er(0.5));
        cfg.trials = 50;
        cfg.decimate = Some(2);
        let recs = run_experiment(&cfg).unwrap();
        let curve = mse_curve(&recs).unwrap();
        assert!(curve[0].1 <= 12.0);
        assert_eq!(curve.last().unwrap().1, 0.0);
        assert!(curve.iter().all(|&(t, _)| t % 2 == 0));
        let mut no_traj = recs.clone();
        for r in &mut no_traj {
            r.decimate = None;
        }
        assert!(mse_curve(&no_traj).is_err());
    }

    #[test]
    fn consensus_with_wide_first_bound() {
        let mut cfg = ExperimentConfig::new(vec![2.0, 0.1, 0.1], 2, InitialState::UniformBall, er(0.5));
        cfg.trials = 100;
        let rep = consensus_experiment(&cfg).unwrap();
        assert!(rep.all_consensus);
        assert!(rep.tau_min <= rep.tau_max);

        let cfg = ExperimentConfig::new(vec![2.0, 0.1, 0.1], 1, explicit(&[0.3, 0.3, 0.3]), er(0.5));
        let rep = consensus_experiment(&cfg).unwrap();
        assert_eq!((rep.tau_max, rep.all_consensus), (0, true));

        let cfg = ExperimentConfig::new(vec![1.9, 0.1, 0.1], 1, InitialState::UniformBall, er(0.5));
        assert!(consensus_experiment(&cfg).is_err());
    }

    #[test]
    fn counterexample_geometry() {
        let mut rng = SeededStream::new(5, 0);
        for _ in 0..100 {
            let s = counterexample_init(4, 1, 1.0, &mut rng).unwrap();
            let x0 = s.opinion(0)[0];
            let side = x0.signum();
            assert!(x0 * side >= 4.0 / 6.0 - 1e-15 && x0 * side <= 1.0 + 1e-15);
            for i in 1..4 {
                let xi = s.opinion(i)[0] * side;
                assert!((-1.0 - 1e-15..=-4.0 / 6.0 + 1e-15).contains(&xi));
                assert!(s.distance(0, i) >= 8.0 / 6.0 - 1e-12);
            }
        }
        assert!(counterexample_init(3, 2, 2.0, &mut rng).is_err());
    }

    #[test]
    fn isolated_agent_never_moves() {
        let mut rng = SeededStream::new(8, 1);
        let s = counterexample_init(4, 2, 1.5, &mut rng).unwrap();
        let p = ConfidenceProfile::new(vec![1.5, 1.0, 1.0, 1.0]).unwrap();
        let rep = isolation_check(&s, &p, &er(0.5), 500, &mut rng).unwrap();
        assert!(rep.holds());
        assert!(rep.min_separation > 1.5);

        let close = SystemState::from_scalars(&[0.0, 0.2, 0.9]).unwrap();
        let p = ConfidenceProfile::uniform(3, 0.5).unwrap();
        let rep = isolation_check(&close, &p, &er(0.5), 10, &mut rng).unwrap();
        assert_eq!(rep.violated_at, Some(0));
    }

    #[test]
    fn sphere_volume_closed_forms() {
        for a in [0.5, 1.0, 2.5] {
            assert!((sphere_volume(1, a).unwrap() - 2.0 * a).abs() <= 1e-12 * 2.0 * a);
        }
        assert!((sphere_volume(2, 1.0).unwrap() - PI).abs() <= 1e-12 * PI);
        assert!((sphere_volume(3, 1.0).unwrap() - 4.0 * PI / 3.0).abs() <= 1e-12 * 4.0);
        assert!(sphere_volume(0, 1.0).is_err());
        assert!(sphere_volume(2, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::new(vec![0.7; 3], 1, InitialState::UniformBall, er(0.5));
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.bounds = vec![0.5, 0.7, 0.3];
        assert!(bad.validate().unwrap_err().to_string().contains("nonincreasing"));
        let mut bad = ok.clone();
        bad.model = er(1.0);
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.trials = 0;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.init = explicit(&[0.0, 1.0]);
        assert!(bad.validate().is_err());
    }
}
