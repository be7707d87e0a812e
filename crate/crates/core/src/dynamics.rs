//! Neighbor rule and synchronous averaging update.

use crate::edges::{pair_index, EdgeSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::{ConfidenceProfile, SystemState};

fn check_inputs<S: Scalar>(
    state: &SystemState<S>,
    profile: &ConfidenceProfile<S>,
    edges: &EdgeSet,
) -> Result<()> {
    profile.check_matches(state)?;
    if edges.agent_count() != state.len() {
        return Err(Error::AgentCountMismatch { expected: state.len(), got: edges.agent_count() });
    }
    Ok(())
}

/// Agents `j` with `(i, j)` in `edges` and `|x_i - x_j| <= r_i`, ascending.
///
/// The bound belongs to the observer `i`; the comparison is non-strict.
pub fn neighbor_set<S: Scalar>(
    state: &SystemState<S>,
    profile: &ConfidenceProfile<S>,
    edges: &EdgeSet,
    i: usize,
) -> Result<Vec<usize>> {
    check_inputs(state, profile, edges)?;
    state.check_agent(i)?;
    Ok(closed_neighborhood(state, profile, edges, i).filter(|&j| j != i).collect())
}

/// `{i} ∪ N_i`, ascending.
fn closed_neighborhood<'a, S: Scalar>(
    state: &'a SystemState<S>,
    profile: &'a ConfidenceProfile<S>,
    edges: &'a EdgeSet,
    i: usize,
) -> impl Iterator<Item = usize> + 'a {
    let n = state.len();
    let r = profile.bound(i);
    (0..n).filter(move |&j| {
        j == i || (edges.contains_index(pair_index(n, i, j)) && state.distance(i, j) <= r)
    })
}

/// One synchronous step: every agent moves to the mean of itself and its neighbors.
///
/// Each mean is summed over the closed neighborhood in ascending agent order, so agents
/// with identical closed neighborhoods receive bitwise-identical opinions. Each coordinate
/// is clamped to the range of the averaged values, which keeps the result inside the
/// convex hull exactly and leaves an agent whose neighbors all share its opinion untouched.
pub fn step<S: Scalar>(
    state: &SystemState<S>,
    profile: &ConfidenceProfile<S>,
    edges: &EdgeSet,
) -> Result<SystemState<S>> {
    check_inputs(state, profile, edges)?;
    let n = state.len();
    let d = state.dim();
    let mut next = Vec::with_capacity(n * d);
    let mut members = Vec::with_capacity(n);
    for i in 0..n {
        members.clear();
        members.extend(closed_neighborhood(state, profile, edges, i));
        if members.len() == 1 {
            next.extend_from_slice(state.opinion(i));
            continue;
        }
        let count = S::from_usize(members.len()).expect("agent count fits scalar");
        for k in 0..d {
            let mut sum = S::zero();
            let mut lo = S::infinity();
            let mut hi = S::neg_infinity();
            for &j in &members {
                let v = state.opinion(j)[k];
                sum = sum + v;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            next.push((sum / count).max(lo).min(hi));
        }
    }
    Ok(SystemState::from_parts(d, next, state.time() + 1))
}
