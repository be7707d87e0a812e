//! Global cluster-merging controller.
//!
//! Clusters are either idle or part of exactly one merge task. Every step, idle clusters are
//! paired greedily (the idle cluster with the smallest member index among those that have an
//! idle connected partner, matched with its connected idle partner of smallest member index)
//! until no two idle clusters are connected. All tasks then advance together on their disjoint
//! agent sets, and tasks that have finished release their merged cluster back to the idle pool.
//! The loop stops once every pair of agents is co-located or out of each other's reach.

use crate::bounds::compute_tn;
use crate::cluster::{detect_clusters, groups_connected, is_e1};
use crate::dynamics::step;
use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::merge::MergeTask;
use crate::scalar::Scalar;
use crate::state::{ConfidenceProfile, SystemState};

/// A cluster released by a finished merge task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCluster {
    pub agents: Vec<usize>,
    /// Step count at which the merged cluster first exists.
    pub time: u64,
}

/// One controlled step, for auditing.
#[derive(Debug, Clone)]
pub struct StepTrace {
    /// Time before the step.
    pub time: u64,
    /// Agents and edge set of every task advanced in this step.
    pub task_edges: Vec<(Vec<usize>, EdgeSet)>,
    pub partition_before: Vec<Vec<usize>>,
    pub partition_after: Vec<Vec<usize>>,
    pub generated: Vec<GeneratedCluster>,
}

pub struct Controller<'a, S: Scalar> {
    profile: &'a ConfidenceProfile<S>,
    state: SystemState<S>,
    eps_eq: S,
    idle: Vec<Vec<usize>>,
    tasks: Vec<MergeTask<S>>,
    time: u64,
    cap: u64,
    schedule: Vec<EdgeSet>,
    generated: Vec<GeneratedCluster>,
}

/// Safety cap on controller steps: ten times `T_n`, with `n` at least 3 and `r_n` held below 2.
pub fn safety_cap<S: Scalar>(profile: &ConfidenceProfile<S>) -> u64 {
    let n = profile.len().max(3);
    let r = profile.smallest().as_f64().min(1.999);
    (10.0 * compute_tn(n, r).expect("clamped arguments are in range")).ceil() as u64
}

impl<'a, S: Scalar> Controller<'a, S> {
    pub fn new(state: SystemState<S>, profile: &'a ConfidenceProfile<S>, eps_eq: S) -> Result<Self> {
        let idle = detect_clusters(&state, profile, eps_eq)?.clusters().to_vec();
        let state = state.with_time(0);
        Ok(Self {
            cap: safety_cap(profile),
            profile,
            state,
            eps_eq,
            idle,
            tasks: Vec::new(),
            time: 0,
            schedule: Vec::new(),
            generated: Vec::new(),
        })
    }

    pub fn state(&self) -> &SystemState<S> {
        &self.state
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn tasks(&self) -> &[MergeTask<S>] {
        &self.tasks
    }

    /// Idle clusters, ordered by smallest member.
    pub fn idle_clusters(&self) -> &[Vec<usize>] {
        &self.idle
    }

    pub fn generated(&self) -> &[GeneratedCluster] {
        &self.generated
    }

    /// The controller's cluster view: idle clusters plus both clusters of every active task.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut blocks = self.idle.clone();
        for t in &self.tasks {
            blocks.push(t.alpha().to_vec());
            blocks.push(t.beta().to_vec());
        }
        blocks.sort_by_key(|b| b[0]);
        blocks
    }

    pub fn is_done(&self) -> bool {
        self.tasks.is_empty() && is_e1(&self.state, self.profile, self.eps_eq)
    }

    fn activate(&mut self) -> Result<()> {
        loop {
            let connected = |a: &[usize], b: &[usize]| groups_connected(&self.state, self.profile, a, b);
            // idle list is kept sorted by smallest member, so the first hit has minimal index
            let alpha = (0..self.idle.len()).find(|&a| {
                (0..self.idle.len()).any(|b| b != a && connected(&self.idle[a], &self.idle[b]))
            });
            let Some(a) = alpha else { return Ok(()) };
            let b = (0..self.idle.len())
                .find(|&b| b != a && connected(&self.idle[a], &self.idle[b]))
                .expect("alpha has a connected partner");
            let (hi, lo) = (a.max(b), a.min(b));
            let second = self.idle.remove(hi);
            let first = self.idle.remove(lo);
            self.tasks.push(MergeTask::new(&self.state, self.profile, first, second)?);
        }
    }

    /// Runs one controller step. Returns `None` once the absorbing event holds.
    pub fn advance(&mut self) -> Result<Option<StepTrace>> {
        if self.is_done() {
            return Ok(None);
        }
        if self.time >= self.cap {
            return Err(Error::SafetyCapExceeded { cap: self.cap });
        }
        self.activate()?;
        if self.tasks.is_empty() {
            return Err(Error::ConstructionFailed(
                "absorbing event fails but no two idle clusters are connected".into(),
            ));
        }
        let partition_before = self.partition();
        let n = self.state.len();
        let mut joint = EdgeSet::empty(n);
        let mut task_edges = Vec::with_capacity(self.tasks.len());
        for task in &mut self.tasks {
            let e = task.next_edges(&self.state, self.profile)?;
            joint.union_with(&e);
            task_edges.push((task.members().to_vec(), e));
        }
        self.state = step(&self.state, self.profile, &joint)?;
        self.time += 1;
        let mut generated = Vec::new();
        let mut k = 0;
        while k < self.tasks.len() {
            self.tasks[k].observe(&self.state)?;
            if self.tasks[k].is_finished() {
                let task = self.tasks.remove(k);
                let agents = task.members().to_vec();
                let pos = self.idle.partition_point(|c| c[0] < agents[0]);
                self.idle.insert(pos, agents.clone());
                generated.push(GeneratedCluster { agents, time: self.time });
            } else {
                k += 1;
            }
        }
        self.generated.extend(generated.iter().cloned());
        self.schedule.push(joint);
        Ok(Some(StepTrace {
            time: self.time - 1,
            task_edges,
            partition_before,
            partition_after: self.partition(),
            generated,
        }))
    }

    pub fn into_run(self) -> ControlRun<S> {
        ControlRun {
            terminal_time: self.time,
            schedule: self.schedule,
            final_state: self.state,
            generated: self.generated,
        }
    }
}

/// Outcome of a complete controller run.
#[derive(Debug, Clone)]
pub struct ControlRun<S> {
    pub schedule: Vec<EdgeSet>,
    pub terminal_time: u64,
    pub final_state: SystemState<S>,
    pub generated: Vec<GeneratedCluster>,
}

/// Drives the controller from `state` until the absorbing event holds.
pub fn algorithm1_run<S: Scalar>(
    state: &SystemState<S>,
    profile: &ConfidenceProfile<S>,
    eps_eq: S,
) -> Result<ControlRun<S>> {
    let mut ctl = Controller::new(state.clone(), profile, eps_eq)?;
    while ctl.advance()?.is_some() {}
    Ok(ctl.into_run())
}
