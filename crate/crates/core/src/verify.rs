//! Property and dominance battery behind the `verify` command.
//!
//! Each check runs on seeded random instances and reports a pass flag with a one-line detail.
//! [`VerifyConfig::desk`] sizes the battery to finish in seconds; [`VerifyConfig::full`] uses
//! the full instance counts.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::bounds::{compute_tn, compute_tn_star, mse_envelope, tau_tail_bound, tn_floor};
use crate::cluster::{detect_clusters, is_coarsening, is_e1};
use crate::controller::{algorithm1_run, Controller};
use crate::dynamics::step;
use crate::edges::EdgeSet;
use crate::error::Result;
use crate::experiments::{
    consensus_experiment, counterexample_init, isolation_check, mse_samples, run_experiment, tau_survival_curve,
    ExperimentConfig, InitialState,
};
use crate::init::{random_direction, uniform_in_ball, uniform_unit_ball};
use crate::interaction::{verify_lowbound_exhaustive, InteractionModel, SeededStream};
use crate::merge::{merge_schedule, PhaseKind};
use crate::state::{euclidean, norm, ConfidenceProfile, SystemState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub master_seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Instance counts for each check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub master_seed: u64,
    pub convergence_trials: u64,
    pub dominance_trials: u64,
    pub merge_instances: usize,
    pub controller_instances: usize,
    pub subsystem_runs: usize,
    pub consensus_trials: u64,
    pub isolation_steps: u64,
    pub invariant_instances: usize,
}

impl VerifyConfig {
    pub fn desk(master_seed: u64) -> Self {
        Self {
            master_seed,
            convergence_trials: 100,
            dominance_trials: 2_000,
            merge_instances: 300,
            controller_instances: 60,
            subsystem_runs: 20,
            consensus_trials: 200,
            isolation_steps: 2_000,
            invariant_instances: 200,
        }
    }

    pub fn full(master_seed: u64) -> Self {
        Self {
            master_seed,
            convergence_trials: 500,
            dominance_trials: 10_000,
            merge_instances: 1_000,
            controller_instances: 200,
            subsystem_runs: 50,
            consensus_trials: 1_000,
            isolation_steps: 10_000,
            invariant_instances: 1_000,
        }
    }
}

pub fn run_all(cfg: &VerifyConfig) -> VerifyReport {
    let seed = cfg.master_seed;
    let checks = vec![
        check_formulas(),
        check_tn_dominance(&compute_tn),
        check_delta_exactness(),
        check_convergence(seed, cfg.convergence_trials),
        check_tail_and_mse_dominance(seed, cfg.dominance_trials),
        check_merge_bound(seed, cfg.merge_instances),
        check_controller_bound(seed, cfg.controller_instances),
        check_subsystem_consistency(seed, cfg.subsystem_runs),
        check_consensus(seed, cfg.consensus_trials),
        check_isolation(seed, cfg.isolation_steps),
        check_core_invariants(seed, cfg.invariant_instances),
    ];
    VerifyReport { master_seed: seed, checks }
}

/// The reference values of the terminal-time bounds.
pub fn check_formulas() -> CheckOutcome {
    CheckOutcome::from_result(
        "bound formulas",
        (|| {
            let tn = compute_tn(3, 1.0)?;
            let want = 38.16465346877546;
            let star = compute_tn_star(3, 1.0)?;
            let ok = ((tn - want) / want).abs() <= 1e-9 && star == 15;
            Ok((ok, format!("T_3(1) = {tn}, T_3*(1) = {star}")))
        })(),
    )
}

/// `T_n* < T_n` over `n = 3..=100` and a spread of smallest bounds, with `tn` as the relaxed
/// bound under test.
pub fn check_tn_dominance(tn: &dyn Fn(usize, f64) -> Result<f64>) -> CheckOutcome {
    CheckOutcome::from_result(
        "terminal-time bound dominance",
        (|| {
            let mut worst: Option<(usize, f64, u64, f64)> = None;
            let mut cases = 0;
            for n in 3..=100 {
                for r in [0.1, 0.5, 1.0, 1.5, 1.9] {
                    cases += 1;
                    let star = compute_tn_star(n, r)?;
                    let relaxed = tn(n, r)?;
                    if !((star as f64) < relaxed) && worst.is_none() {
                        worst = Some((n, r, star, relaxed));
                    }
                }
            }
            Ok(match worst {
                None => (true, format!("{cases} cases")),
                Some((n, r, s, t)) => (false, format!("n = {n}, r_n = {r}: T_n* = {s} >= T_n = {t}")),
            })
        })(),
    )
}

/// Exhaustive subset probabilities on three agents match the closed-form lower bound.
pub fn check_delta_exactness() -> CheckOutcome {
    CheckOutcome::from_result(
        "subset probability lower bound",
        (|| {
            let mut detail = Vec::new();
            let mut ok = true;
            for p in [0.3, 0.5, 0.7] {
                let rep = verify_lowbound_exhaustive(&InteractionModel::ErdosRenyi { p }, 3)?;
                ok &= rep.subsets == 64 && rep.holds(1e-12);
                detail.push(format!("p = {p}: min {} vs delta {}", rep.min_probability, rep.delta));
            }
            Ok((ok, detail.join("; ")))
        })(),
    )
}

pub fn check_convergence(seed: u64, trials: u64) -> CheckOutcome {
    CheckOutcome::from_result(
        "random interactions absorb",
        (|| {
            let mut cfg = ExperimentConfig::new(
                vec![1.5, 1.2, 0.9, 0.6, 0.3],
                2,
                InitialState::UniformBall,
                InteractionModel::ErdosRenyi { p: 0.5 },
            );
            cfg.trials = trials;
            cfg.master_seed = seed;
            let profile = cfg.profile()?;
            let recs = run_experiment(&cfg)?;
            let capped = recs.iter().filter(|r| r.tau.is_none()).count();
            let bad = recs.iter().filter(|r| !is_e1(&r.final_state, &profile, cfg.eps_eq)).count();
            let max_tau = recs.iter().filter_map(|r| r.tau).max().unwrap_or(0);
            Ok((capped == 0 && bad == 0, format!("{trials} trials, {capped} capped, {bad} bad final states, max tau {max_tau}")))
        })(),
    )
}

/// Empirical tail and mean-square curves stay under their envelopes plus three standard errors.
pub fn check_tail_and_mse_dominance(seed: u64, trials: u64) -> CheckOutcome {
    CheckOutcome::from_result(
        "tail and mean-square dominance",
        (|| {
            let model = InteractionModel::ErdosRenyi { p: 0.5 };
            let mut cfg = ExperimentConfig::new(vec![0.7; 3], 1, InitialState::UniformBall, model.clone());
            cfg.trials = trials;
            cfg.master_seed = seed;
            cfg.decimate = Some(1);
            let recs = run_experiment(&cfg)?;
            let delta = model.delta_lower_bound(3)?;
            let tstar = tn_floor(3, 0.7)?;
            let n_trials = recs.len() as f64;
            let mut worst_tail = f64::NEG_INFINITY;
            for (t, p) in tau_survival_curve(&recs)? {
                let se = (p * (1.0 - p) / n_trials).sqrt();
                worst_tail = worst_tail.max(p - (tau_tail_bound(t, tstar, delta)? + 3.0 * se));
            }
            let mut worst_mse = f64::NEG_INFINITY;
            let last = recs.iter().filter_map(|r| r.tau).max().unwrap_or(0);
            for t in 0..=last {
                let xs = mse_samples(&recs, t)?;
                let mean = xs.iter().sum::<f64>() / n_trials;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n_trials - 1.0).max(1.0);
                let se = (var / n_trials).sqrt();
                worst_mse = worst_mse.max(mean - (mse_envelope(t, 3, 0.7, delta)? + 3.0 * se));
            }
            Ok((
                worst_tail <= 0.0 && worst_mse <= 0.0,
                format!("{trials} trials, max tau {last}, tail margin {worst_tail:.3e}, mse margin {worst_mse:.3e}"),
            ))
        })(),
    )
}

/// A random pair of co-located, connected clusters.
#[derive(Debug, Clone)]
pub struct MergeInstance {
    pub state: SystemState<f64>,
    pub profile: ConfidenceProfile<f64>,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub d0: f64,
}

/// Cluster sizes in `1..=5`, dimension in `1..=3`, bounds in `[0.05, 1.95]`, and initial
/// distance uniform in `(r_min, r_max]`.
pub fn random_merge_instance<R: Rng>(rng: &mut R) -> MergeInstance {
    let j = rng.gen_range(1..=5);
    let k = rng.gen_range(1..=5);
    let d = rng.gen_range(1..=3);
    let n = j + k;
    let bounds = loop {
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.95)).collect();
        b.sort_by(|x, y| y.total_cmp(x));
        if b[n - 1] < b[0] {
            break b;
        }
    };
    let mut agents: Vec<usize> = (0..n).collect();
    agents.shuffle(rng);
    let first = agents[..j].to_vec();
    let second = agents[j..].to_vec();
    let (r_min, r_max) = (bounds[n - 1], bounds[0]);
    let d0 = r_max - rng.gen::<f64>() * (r_max - r_min);
    let a = uniform_in_ball(&vec![0.0; d], 1.0, rng);
    let dir = random_direction(d, rng);
    let b: Vec<f64> = a.iter().zip(&dir).map(|(x, u)| x + d0 * u).collect();
    let mut coords = vec![0.0; n * d];
    for &i in &second {
        coords[i * d..(i + 1) * d].copy_from_slice(&b);
    }
    for &i in &first {
        coords[i * d..(i + 1) * d].copy_from_slice(&a);
    }
    MergeInstance {
        state: SystemState::from_flat(n, d, coords).expect("finite"),
        profile: ConfidenceProfile::new(bounds).expect("sorted positive"),
        first,
        second,
        d0,
    }
}

/// Relative deviation of the recorded halving path from
/// `(1 - 2^-s) target + 2^-s start`, scaled by the larger of the two endpoint norms and 1.
pub fn halving_deviation(start: &[f64], target: &[f64], path: &[Vec<f64>]) -> f64 {
    let scale = norm(start).max(norm(target)).max(1.0);
    let mut worst = 0.0f64;
    for (s, x) in path.iter().enumerate() {
        let w = 0.5f64.powi(s as i32 + 1);
        let want: Vec<f64> = start.iter().zip(target).map(|(a, b)| (1.0 - w) * b + w * a).collect();
        worst = worst.max(euclidean(x, &want) / scale);
    }
    worst
}

pub fn check_merge_bound(seed: u64, instances: usize) -> CheckOutcome {
    CheckOutcome::from_result(
        "two-cluster merge bound",
        (|| {
            let mut rng = SeededStream::new(seed, 1 << 40);
            let mut over = 0;
            let mut weak = 0;
            let mut worst_halving = 0.0f64;
            let mut max_ratio = 0.0f64;
            for _ in 0..instances {
                let inst = random_merge_instance(&mut rng);
                let out = merge_schedule(&inst.state, &inst.profile, inst.first, inst.second)?;
                if out.steps_used as u64 > out.predicted.total {
                    over += 1;
                }
                max_ratio = max_ratio.max(out.steps_used as f64 / out.predicted.total as f64);
                let (j, k) = (out.alpha.len() as f64, out.beta.len() as f64);
                for ph in &out.phases {
                    let need = match ph.kind {
                        PhaseKind::TowardBeta => out.r_min / (2.0 * (k + 1.0)),
                        PhaseKind::TowardAlpha => out.r_min / (2.0 * j),
                    };
                    if !(ph.distance_before - ph.distance_after > need) {
                        weak += 1;
                    }
                    worst_halving = worst_halving.max(halving_deviation(&ph.shuttle_start, &ph.target, &ph.shuttle_path));
                }
            }
            Ok((
                over == 0 && weak == 0 && worst_halving <= 1e-12,
                format!(
                    "{instances} instances, {over} over bound, {weak} weak phases, max steps/bound {max_ratio:.3}, \
                     halving deviation {worst_halving:.2e}"
                ),
            ))
        })(),
    )
}

/// `n` agents uniform in the unit ball of a random dimension in `1..=3`, bounds sorted from
/// uniform draws in `[0.2, 1.9]`.
pub fn random_controller_instance<R: Rng>(n: usize, rng: &mut R) -> (SystemState<f64>, ConfidenceProfile<f64>) {
    let d = rng.gen_range(1..=3);
    let state = uniform_unit_ball(n, d, rng).expect("n, d >= 1");
    let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..=1.9)).collect();
    b.sort_by(|x, y| y.total_cmp(x));
    (state, ConfidenceProfile::new(b).expect("sorted positive"))
}

pub fn check_controller_bound(seed: u64, instances: usize) -> CheckOutcome {
    CheckOutcome::from_result(
        "controller terminal-time bound",
        (|| {
            let mut rng = SeededStream::new(seed, 2 << 40);
            let mut over = 0;
            let mut split = 0;
            let mut overlap = 0;
            let mut max_ratio = 0.0f64;
            for k in 0..instances {
                let n = 3 + k % 6;
                let (state, profile) = random_controller_instance(n, &mut rng);
                let mut ctl = Controller::new(state, &profile, 0.0)?;
                while let Some(tr) = ctl.advance()? {
                    if !is_coarsening(&tr.partition_after, &tr.partition_before) {
                        split += 1;
                    }
                    for (x, (ax, ex)) in tr.task_edges.iter().enumerate() {
                        if !ex.within(ax) {
                            overlap += 1;
                        }
                        for (ay, ey) in &tr.task_edges[x + 1..] {
                            if ax.iter().any(|a| ay.contains(a)) || !ex.is_disjoint(ey) {
                                overlap += 1;
                            }
                        }
                    }
                }
                let bound = compute_tn_star(n, profile.smallest())?;
                if ctl.time() > bound {
                    over += 1;
                }
                max_ratio = max_ratio.max(ctl.time() as f64 / bound as f64);
                let end = detect_clusters(ctl.state(), &profile, 0.0)?;
                if !is_e1(ctl.state(), &profile, 0.0) || end.clusters().is_empty() {
                    over += 1;
                }
            }
            Ok((
                over == 0 && split == 0 && overlap == 0,
                format!("{instances} instances, {over} over bound, {split} splits, {overlap} overlaps, max time/bound {max_ratio:.3}"),
            ))
        })(),
    )
}

pub fn check_subsystem_consistency(seed: u64, runs: usize) -> CheckOutcome {
    CheckOutcome::from_result(
        "subsystem re-runs end at generation time",
        (|| {
            let mut rng = SeededStream::new(seed, 3 << 40);
            let mut clusters = 0;
            let mut mismatches = Vec::new();
            for k in 0..runs {
                let n = 3 + k % 6;
                let (state, profile) = random_controller_instance(n, &mut rng);
                let run = algorithm1_run(&state, &profile, 0.0)?;
                for g in &run.generated {
                    clusters += 1;
                    let sub = algorithm1_run(&state.restrict(&g.agents)?, &profile.restrict(&g.agents)?, 0.0)?;
                    if sub.terminal_time != g.time {
                        mismatches.push(format!("{:?}: {} vs {}", g.agents, sub.terminal_time, g.time));
                    }
                }
            }
            Ok((
                mismatches.is_empty(),
                format!("{runs} runs, {clusters} generated clusters, {} mismatches {}", mismatches.len(), mismatches.join(", ")),
            ))
        })(),
    )
}

pub fn check_consensus(seed: u64, trials: u64) -> CheckOutcome {
    CheckOutcome::from_result(
        "wide first bound forces consensus",
        (|| {
            let mut cfg = ExperimentConfig::new(
                vec![2.0, 0.4, 0.3],
                2,
                InitialState::UniformBall,
                InteractionModel::ErdosRenyi { p: 0.5 },
            );
            cfg.trials = trials;
            cfg.master_seed = seed;
            let rep = consensus_experiment(&cfg)?;
            Ok((
                rep.all_consensus,
                format!("{}/{} consensus, tau mean {:.2}, max {}", rep.consensus_count, rep.trials, rep.tau_mean, rep.tau_max),
            ))
        })(),
    )
}

pub fn check_isolation(seed: u64, steps: u64) -> CheckOutcome {
    CheckOutcome::from_result(
        "isolated agent stays isolated",
        (|| {
            let model = InteractionModel::ErdosRenyi { p: 0.5 };
            let mut failures = Vec::new();
            let mut min_gap = f64::INFINITY;
            for (k, r1) in [0.5, 1.0, 1.5].into_iter().enumerate() {
                for d in 1..=3 {
                    let mut rng = SeededStream::new(seed, (4 << 40) + (k * 3 + d) as u64);
                    let n = 4;
                    let state = counterexample_init(n, d, r1, &mut rng)?;
                    let profile = ConfidenceProfile::uniform(n, r1)?;
                    let rep = isolation_check(&state, &profile, &model, steps, &mut rng)?;
                    min_gap = min_gap.min(rep.min_separation - r1);
                    if !rep.holds() {
                        failures.push(format!("r1 = {r1}, d = {d} at step {:?}", rep.violated_at));
                    }
                }
            }
            Ok((failures.is_empty(), format!("{steps} steps per case, min margin {min_gap:.3}; {}", failures.join(", "))))
        })(),
    )
}

fn random_rotation<R: Rng>(d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    // Gram-Schmidt on random Gaussian directions
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v = random_direction(d, rng);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let len = norm(&v);
        if len > 1e-6 {
            basis.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    basis
}

fn transform(state: &SystemState<f64>, rot: &[Vec<f64>], shift: &[f64]) -> SystemState<f64> {
    let d = state.dim();
    let coords = state
        .opinions()
        .flat_map(|x| (0..d).map(move |r| rot[r].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + shift[r]))
        .collect();
    SystemState::from_flat(state.len(), d, coords).expect("finite")
}

fn rel_gap(a: &SystemState<f64>, b: &SystemState<f64>) -> f64 {
    let scale = a.max_norm().max(b.max_norm()).max(1.0);
    a.opinions().zip(b.opinions()).map(|(x, y)| euclidean(x, y)).fold(0.0, f64::max) / scale
}

/// Convex hull containment, rotation, translation and permutation equivariance of one step,
/// and bitwise reproducibility of seeded trials.
pub fn check_core_invariants(seed: u64, instances: usize) -> CheckOutcome {
    CheckOutcome::from_result(
        "update invariants",
        (|| {
            let mut rng = SeededStream::new(seed, 5 << 40);
            let model = InteractionModel::ErdosRenyi { p: 0.5 };
            let (mut hull, mut equiv, mut perm) = (0, 0.0f64, 0.0f64);
            for _ in 0..instances {
                let n = rng.gen_range(3..=8);
                let (state, profile) = random_controller_instance(n, &mut rng);
                let d = state.dim();
                let edges = model.sample(n, &mut rng);
                let next = step(&state, &profile, &edges)?;
                for _ in 0..8 {
                    let u = random_direction(d, &mut rng);
                    let support = |s: &SystemState<f64>| {
                        s.opinions().map(|x| x.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
                    };
                    if support(&next) > support(&state) + 1e-15 {
                        hull += 1;
                    }
                }
                let rot = random_rotation(d, &mut rng);
                let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let moved = step(&transform(&state, &rot, &shift), &profile, &edges)?;
                equiv = equiv.max(rel_gap(&moved, &transform(&next, &rot, &shift)));

                // permute agents under a common bound so the profile stays sorted
                let uniform = ConfidenceProfile::uniform(n, profile.bound(0))?;
                let base = step(&state, &uniform, &edges)?;
                let mut sigma: Vec<usize> = (0..n).collect();
                sigma.shuffle(&mut rng);
                let permuted = state.restrict(&sigma)?;
                let mut inverse = vec![0; n];
                for (new, &old) in sigma.iter().enumerate() {
                    inverse[old] = new;
                }
                let pedges = EdgeSet::from_pairs(n, edges.pairs().map(|(i, j)| (inverse[i], inverse[j])))?;
                let pnext = step(&permuted, &uniform, &pedges)?;
                perm = perm.max(rel_gap(&pnext, &base.restrict(&sigma)?));
            }
            let mut cfg = ExperimentConfig::new(vec![1.0, 0.8, 0.6, 0.4], 2, InitialState::UniformBall, model);
            cfg.trials = 16;
            cfg.master_seed = seed;
            cfg.decimate = Some(1);
            let repro = run_experiment(&cfg)? == run_experiment(&cfg)?;
            Ok((
                hull == 0 && equiv <= 1e-12 && perm <= 1e-12 && repro,
                format!(
                    "{instances} instances, {hull} hull escapes, rigid-motion gap {equiv:.2e}, permutation gap {perm:.2e}, \
                     reproducible {repro}"
                ),
            ))
        })(),
    )
}
