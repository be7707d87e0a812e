//! Controlled merger of two connected clusters.
//!
//! The agent with the smallest index in the union (the shuttle) carries the merge. In each
//! phase it halves its distance to the far group through a two-agent edge pair until it is
//! inside that group's smallest bound, then joins it in a star step. Phases alternate between
//! the `beta` cluster and the remainder of `alpha`; once the whole union is within the
//! smallest bound of both clusters a single clique step finishes the merger.

use serde::{Deserialize, Serialize};

use crate::bounds::{compute_s_t, MergeBound};
use crate::cluster::subset_diameter;
use crate::dynamics::step;
use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::{ConfidenceProfile, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    /// Shuttle travels to the `beta` cluster; the star has `K + 1` agents.
    TowardBeta,
    /// Shuttle travels back to the rest of `alpha`; the star has `J` agents.
    TowardAlpha,
}

impl PhaseKind {
    fn flipped(self) -> Self {
        match self {
            Self::TowardBeta => Self::TowardAlpha,
            Self::TowardAlpha => Self::TowardBeta,
        }
    }
}

/// What happened during one approach phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord<S> {
    pub kind: PhaseKind,
    pub halving_steps: usize,
    /// Diameter of the union when the phase started.
    pub distance_before: S,
    /// Diameter of the union after the star step.
    pub distance_after: S,
    pub shuttle_start: Vec<S>,
    /// Opinion of the group the shuttle travels to; it stays fixed during the phase.
    pub target: Vec<S>,
    /// Shuttle opinion after each halving step.
    pub shuttle_path: Vec<Vec<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Idle,
    Halving,
    Star,
    Clique,
}

#[derive(Debug, Clone)]
struct ActivePhase<S> {
    kind: PhaseKind,
    target: Vec<usize>,
    anchor: usize,
    distance_before: S,
    shuttle_start: Vec<S>,
    target_point: Vec<S>,
    path: Vec<Vec<S>>,
}

/// A two-cluster merger in progress, advanced one edge set at a time.
///
/// Call [`MergeTask::next_edges`] with the current state, apply the returned edge set (possibly
/// joined with edge sets of other tasks on disjoint agents), then call [`MergeTask::observe`]
/// with the resulting state.
#[derive(Debug, Clone)]
pub struct MergeTask<S> {
    alpha: Vec<usize>,
    beta: Vec<usize>,
    members: Vec<usize>,
    r_min: S,
    initial_distance: S,
    predicted: MergeBound,
    next_kind: PhaseKind,
    active: Option<ActivePhase<S>>,
    pending: Pending,
    records: Vec<PhaseRecord<S>>,
    steps: usize,
    finished: bool,
    final_clique: bool,
}

fn normalize(mut group: Vec<usize>, n: usize) -> Result<Vec<usize>> {
    group.sort_unstable();
    group.dedup();
    if group.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&bad) = group.iter().find(|&&a| a >= n) {
        return Err(Error::AgentOutOfRange { index: bad, n });
    }
    Ok(group)
}

fn colocated<S: Scalar>(state: &SystemState<S>, agents: &[usize]) -> bool {
    agents.iter().all(|&a| state.same_opinion(a, agents[0]))
}

impl<S: Scalar> MergeTask<S> {
    /// Sets up the merger of two clusters; the one holding the smaller index becomes `alpha`.
    ///
    /// Both groups must be clusters (bitwise co-located), distinct, and connected.
    pub fn new(
        state: &SystemState<S>,
        profile: &ConfidenceProfile<S>,
        first: Vec<usize>,
        second: Vec<usize>,
    ) -> Result<Self> {
        profile.check_matches(state)?;
        let n = state.len();
        let mut alpha = normalize(first, n)?;
        let mut beta = normalize(second, n)?;
        if alpha[0] > beta[0] {
            std::mem::swap(&mut alpha, &mut beta);
        }
        if alpha.iter().any(|a| beta.contains(a)) {
            return Err(Error::Domain("merge clusters must be disjoint".into()));
        }
        for (name, group) in [("alpha", &alpha), ("beta", &beta)] {
            if !colocated(state, group) {
                return Err(Error::Domain(format!("{name} agents {group:?} do not share one opinion")));
            }
        }
        let d0 = state.distance(alpha[0], beta[0]);
        if d0 == S::zero() {
            return Err(Error::Domain("merge clusters already coincide".into()));
        }
        // alpha[0] holds the smallest index of the union, hence the largest bound
        let reach = profile.bound(alpha[0]);
        if d0 > reach {
            return Err(Error::NotConnected { distance: d0.as_f64(), max_bound: reach.as_f64() });
        }
        let r_min = profile.bound(*alpha.last().unwrap()).min(profile.bound(*beta.last().unwrap()));
        let predicted = compute_s_t(alpha.len(), beta.len(), d0.as_f64(), r_min.as_f64())?;
        let mut members: Vec<usize> = alpha.iter().chain(&beta).copied().collect();
        members.sort_unstable();
        Ok(Self {
            alpha,
            beta,
            members,
            r_min,
            initial_distance: d0,
            predicted,
            next_kind: PhaseKind::TowardBeta,
            active: None,
            pending: Pending::Idle,
            records: Vec::new(),
            steps: 0,
            finished: false,
            final_clique: false,
        })
    }

    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    pub fn beta(&self) -> &[usize] {
        &self.beta
    }

    /// Union of both clusters, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn shuttle(&self) -> usize {
        self.alpha[0]
    }

    pub fn r_min(&self) -> S {
        self.r_min
    }

    pub fn initial_distance(&self) -> S {
        self.initial_distance
    }

    pub fn predicted(&self) -> MergeBound {
        self.predicted
    }

    pub fn phases(&self) -> &[PhaseRecord<S>] {
        &self.records
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Whether the merger ended with a clique step over the whole union.
    pub fn ended_with_clique(&self) -> bool {
        self.final_clique
    }

    /// The edge set for the next step. Every interaction the construction relies on is checked
    /// against the neighbor rule first; a failed check is reported as a construction error.
    pub fn next_edges(&mut self, state: &SystemState<S>, profile: &ConfidenceProfile<S>) -> Result<EdgeSet> {
        if self.finished {
            return Err(Error::ConstructionFailed("merge task already finished".into()));
        }
        if self.pending != Pending::Idle {
            return Err(Error::ConstructionFailed("previous step was not observed".into()));
        }
        let n = state.len();
        let shuttle = self.shuttle();
        if self.active.is_none() {
            let diameter = subset_diameter(state, &self.members)?;
            if diameter <= self.r_min {
                self.pending = Pending::Clique;
                self.steps += 1;
                return EdgeSet::clique(n, &self.members);
            }
            let kind = self.next_kind;
            let target = match kind {
                PhaseKind::TowardBeta => self.beta.clone(),
                PhaseKind::TowardAlpha => self.alpha[1..].to_vec(),
            };
            if target.is_empty() || !colocated(state, &target) {
                return Err(Error::ConstructionFailed(format!(
                    "phase target {target:?} is not a co-located group"
                )));
            }
            let anchor = *target.last().unwrap();
            self.active = Some(ActivePhase {
                kind,
                anchor,
                distance_before: diameter,
                shuttle_start: state.opinion(shuttle).to_vec(),
                target_point: state.opinion(anchor).to_vec(),
                target,
                path: Vec::new(),
            });
        }
        let phase = self.active.as_ref().unwrap();
        let gap = state.distance(shuttle, phase.anchor);
        if gap > profile.bound(shuttle) {
            return Err(Error::ConstructionFailed(format!(
                "shuttle {shuttle} cannot see agent {} at distance {gap}",
                phase.anchor
            )));
        }
        self.steps += 1;
        if gap > profile.bound(phase.anchor) {
            // the anchor does not see the shuttle, so only the shuttle moves
            self.pending = Pending::Halving;
            EdgeSet::from_pairs(n, [(shuttle, phase.anchor), (phase.anchor, shuttle)])
        } else {
            if let Some(&blind) = phase.target.iter().find(|&&a| gap > profile.bound(a)) {
                return Err(Error::ConstructionFailed(format!(
                    "agent {blind} cannot see the shuttle at distance {gap}"
                )));
            }
            self.pending = Pending::Star;
            let mut star = phase.target.clone();
            star.push(shuttle);
            EdgeSet::clique(n, &star)
        }
    }

    /// Records the outcome of the step produced by the last [`MergeTask::next_edges`] call.
    pub fn observe(&mut self, state: &SystemState<S>) -> Result<()> {
        let pending = std::mem::replace(&mut self.pending, Pending::Idle);
        match pending {
            Pending::Idle => {
                return Err(Error::ConstructionFailed("observe called without a pending step".into()))
            }
            Pending::Halving => {
                let shuttle = state.opinion(self.shuttle()).to_vec();
                self.active.as_mut().unwrap().path.push(shuttle);
            }
            Pending::Star => {
                let phase = self.active.take().unwrap();
                let distance_after = subset_diameter(state, &self.members)?;
                self.records.push(PhaseRecord {
                    kind: phase.kind,
                    halving_steps: phase.path.len(),
                    distance_before: phase.distance_before,
                    distance_after,
                    shuttle_start: phase.shuttle_start,
                    target: phase.target_point,
                    shuttle_path: phase.path,
                });
                self.next_kind = phase.kind.flipped();
                if colocated(state, &self.members) {
                    self.finished = true;
                }
            }
            Pending::Clique => {
                if !colocated(state, &self.members) {
                    return Err(Error::ConstructionFailed("clique step did not co-locate the union".into()));
                }
                self.finished = true;
                self.final_clique = true;
            }
        }
        Ok(())
    }
}

/// Result of running one merger to completion.
#[derive(Debug, Clone)]
pub struct MergeOutcome<S> {
    pub edges: Vec<EdgeSet>,
    pub state: SystemState<S>,
    pub steps_used: usize,
    pub predicted: MergeBound,
    pub phases: Vec<PhaseRecord<S>>,
    pub ended_with_clique: bool,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub r_min: S,
}

/// Merges the clusters `first` and `second` under controlled interactions.
pub fn merge_schedule<S: Scalar>(
    state: &SystemState<S>,
    profile: &ConfidenceProfile<S>,
    first: Vec<usize>,
    second: Vec<usize>,
) -> Result<MergeOutcome<S>> {
    let mut task = MergeTask::new(state, profile, first, second)?;
    let cap = 4 * task.predicted().total as usize + 64;
    let mut current = state.clone();
    let mut edges = Vec::new();
    while !task.is_finished() {
        if edges.len() > cap {
            return Err(Error::ConstructionFailed(format!("merger did not finish within {cap} steps")));
        }
        let e = task.next_edges(&current, profile)?;
        current = step(&current, profile, &e)?;
        task.observe(&current)?;
        edges.push(e);
    }
    Ok(MergeOutcome {
        steps_used: edges.len(),
        edges,
        state: current,
        predicted: task.predicted(),
        ended_with_clique: task.ended_with_clique(),
        phases: task.records,
        alpha: task.alpha,
        beta: task.beta,
        r_min: task.r_min,
    })
}
