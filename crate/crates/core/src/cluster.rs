//! Clusters, connections between clusters, and the absorbing event.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::{euclidean, ConfidenceProfile, SystemState};

/// Partition of the agents into co-located groups.
///
/// Clusters are ordered by their smallest member index and members are ascending. The
/// representative opinion of a cluster is the opinion of its smallest member.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition<S> {
    clusters: Vec<Vec<usize>>,
    representatives: Vec<Vec<S>>,
    connections: Vec<(usize, usize)>,
}

impl<S: Scalar> ClusterPartition<S> {
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn representatives(&self) -> &[Vec<S>] {
        &self.representatives
    }

    /// Connected cluster pairs `(a, b)` with `a < b`, as cluster positions.
    pub fn connections(&self) -> &[(usize, usize)] {
        &self.connections
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn is_consensus(&self) -> bool {
        self.clusters.len() == 1
    }

    pub fn cluster_of(&self, agent: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&agent))
    }
}

/// Whether two agent groups are connected: their opinion distance is at most the largest
/// confidence bound among all their members.
pub fn groups_connected<S: Scalar>(
    state: &SystemState<S>,
    profile: &ConfidenceProfile<S>,
    a: &[usize],
    b: &[usize],
) -> bool {
    let reach = a.iter().chain(b).map(|&i| profile.bound(i)).fold(S::zero(), S::max);
    euclidean(state.opinion(a[0]), state.opinion(b[0])) <= reach
}

/// Groups agents whose pairwise distance is at most `eps` (exact equality when `eps == 0`).
///
/// Fails with [`Error::NonTransitiveClusters`] when a chain of near-equal opinions links two
/// agents that are farther apart than `eps`.
pub fn detect_clusters<S: Scalar>(
    state: &SystemState<S>,
    profile: &ConfidenceProfile<S>,
    eps: S,
) -> Result<ClusterPartition<S>> {
    profile.check_matches(state)?;
    if !(eps >= S::zero()) {
        return Err(Error::Domain(format!("equality tolerance must be nonnegative, got {eps}")));
    }
    let n = state.len();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if label[i].is_some() {
            continue;
        }
        // breadth-first closure of the near relation, starting at the smallest free index
        let id = clusters.len();
        let mut members = vec![i];
        label[i] = Some(id);
        let mut head = 0;
        while head < members.len() {
            let a = members[head];
            head += 1;
            for b in 0..n {
                if label[b].is_none() && state.near(a, b, eps) {
                    label[b] = Some(id);
                    members.push(b);
                }
            }
        }
        members.sort_unstable();
        for (x, &a) in members.iter().enumerate() {
            for &c in &members[x + 1..] {
                if !state.near(a, c, eps) {
                    let b = *members.iter().find(|&&b| state.near(a, b, eps) && state.near(b, c, eps)).unwrap_or(&a);
                    return Err(Error::NonTransitiveClusters {
                        a,
                        b,
                        c,
                        eps: eps.as_f64(),
                        distance: state.distance(a, c).as_f64(),
                    });
                }
            }
        }
        clusters.push(members);
    }
    let representatives = clusters.iter().map(|c| state.opinion(c[0]).to_vec()).collect();
    let mut connections = Vec::new();
    for a in 0..clusters.len() {
        for b in a + 1..clusters.len() {
            if groups_connected(state, profile, &clusters[a], &clusters[b]) {
                connections.push((a, b));
            }
        }
    }
    Ok(ClusterPartition { clusters, representatives, connections })
}

/// Every pair of agents is either co-located (within `eps`) or farther apart than both bounds.
pub fn is_e1<S: Scalar>(state: &SystemState<S>, profile: &ConfidenceProfile<S>, eps: S) -> bool {
    let n = state.len();
    (0..n).all(|i| {
        (i + 1..n).all(|j| {
            state.near(i, j, eps)
                || state.distance(i, j) > profile.bound(i).max(profile.bound(j))
        })
    })
}

/// Largest pairwise opinion distance within `agents`; 0 for a singleton.
pub fn subset_diameter<S: Scalar>(state: &SystemState<S>, agents: &[usize]) -> Result<S> {
    if agents.is_empty() {
        return Err(Error::EmptySubset);
    }
    for &a in agents {
        state.check_agent(a)?;
    }
    let mut best = S::zero();
    for (x, &a) in agents.iter().enumerate() {
        for &b in &agents[x + 1..] {
            let dist = state.distance(a, b);
            if dist > best {
                best = dist;
            }
        }
    }
    Ok(best)
}

/// Whether every block of `fine` lies inside some block of `coarse`, and both cover the same agents.
pub fn is_coarsening(coarse: &[Vec<usize>], fine: &[Vec<usize>]) -> bool {
    let covered = |blocks: &[Vec<usize>]| {
        let mut all: Vec<usize> = blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    };
    covered(coarse) == covered(fine)
        && fine.iter().all(|f| coarse.iter().any(|c| f.iter().all(|a| c.contains(a))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, r: f64) -> ConfidenceProfile<f64> {
        ConfidenceProfile::uniform(n, r).unwrap()
    }

    #[test]
    fn clusters_without_connection() {
        let s = SystemState::from_scalars(&[0.0, 0.0, 1.0]).unwrap();
        let part = detect_clusters(&s, &uniform(3, 0.5), 0.0).unwrap();
        assert_eq!(part.clusters(), &[vec![0, 1], vec![2]]);
        assert!(part.connections().is_empty());
    }

    #[test]
    fn clusters_with_connection() {
        let s = SystemState::from_scalars(&[0.0, 0.0, 0.4]).unwrap();
        let part = detect_clusters(&s, &uniform(3, 0.5), 0.0).unwrap();
        assert_eq!(part.clusters(), &[vec![0, 1], vec![2]]);
        assert_eq!(part.connections(), &[(0, 1)]);
    }

    #[test]
    fn connection_uses_largest_bound_of_both_clusters() {
        let s = SystemState::from_scalars(&[0.0, 0.8, 0.8]).unwrap();
        let p = ConfidenceProfile::new(vec![1.0, 0.5, 0.5]).unwrap();
        let part = detect_clusters(&s, &p, 0.0).unwrap();
        assert_eq!(part.connections(), &[(0, 1)]);
    }

    #[test]
    fn all_equal_single_cluster() {
        let s = SystemState::new(vec![vec![0.2, 0.1]; 5]).unwrap();
        let part = detect_clusters(&s, &uniform(5, 0.5), 0.0).unwrap();
        assert!(part.is_consensus());
        assert!(part.connections().is_empty());
        assert_eq!(part.representatives(), &[vec![0.2, 0.1]]);
    }

    #[test]
    fn non_transitive_chain_is_reported() {
        let s = SystemState::from_scalars(&[0.0, 0.6e-9, 1.2e-9]).unwrap();
        let err = detect_clusters(&s, &uniform(3, 0.5), 1e-9).unwrap_err();
        assert!(matches!(err, Error::NonTransitiveClusters { a: 0, b: 1, c: 2, .. }));
    }

    #[test]
    fn tolerance_groups_near_opinions() {
        let s = SystemState::from_scalars(&[0.0, 1e-12, 1.0]).unwrap();
        let part = detect_clusters(&s, &uniform(3, 0.5), 1e-9).unwrap();
        assert_eq!(part.clusters(), &[vec![0, 1], vec![2]]);
        assert_eq!(part.cluster_of(2), Some(1));
    }

    #[test]
    fn e1_examples() {
        let p = uniform(3, 0.5);
        assert!(is_e1(&SystemState::from_scalars(&[0.0, 0.0, 1.0]).unwrap(), &p, 0.0));
        assert!(!is_e1(&SystemState::from_scalars(&[0.0, 0.0, 0.4]).unwrap(), &p, 0.0));
        assert!(is_e1(&SystemState::from_scalars(&[0.3, 0.3, 0.3]).unwrap(), &uniform(3, 1.7), 0.0));
    }

    #[test]
    fn e1_uses_larger_bound_of_pair() {
        // 0.6 > r_1 = 0.5 but <= r_0 = 0.7
        let s = SystemState::from_scalars(&[0.0, 0.6, 2.0]).unwrap();
        let p = ConfidenceProfile::new(vec![0.7, 0.5, 0.5]).unwrap();
        assert!(!is_e1(&s, &p, 0.0));
    }

    #[test]
    fn diameter_examples() {
        let s: SystemState<f64> = SystemState::new(vec![vec![0.0, 0.0], vec![0.3, 0.4], vec![0.1, 0.1]]).unwrap();
        assert_eq!(subset_diameter(&s, &[2]).unwrap(), 0.0);
        assert!((subset_diameter(&s, &[0, 1]).unwrap() - 0.5).abs() < 1e-15);
        assert!(subset_diameter(&s, &[]).is_err());
        let line = SystemState::from_scalars(&[0.0, 1.0]).unwrap();
        assert_eq!(subset_diameter(&line, &[0, 1]).unwrap(), 1.0);
    }

    #[test]
    fn coarsening_check() {
        let fine = vec![vec![0], vec![1], vec![2, 3]];
        let coarse = vec![vec![0, 1], vec![2, 3]];
        assert!(is_coarsening(&coarse, &fine));
        assert!(!is_coarsening(&fine, &coarse));
        assert!(!is_coarsening(&[vec![0, 1]], &fine));
    }
}
