//! Random interaction graphs and their subset-probability lower bound.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edges::{pair_at, pair_count, EdgeSet};
use crate::error::{Error, Result};

/// How the edge set of each step is drawn. Every ordered pair is included independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InteractionModel {
    /// Directed Erdős–Rényi graph: each ordered pair with probability `p`.
    ErdosRenyi { p: f64 },
    /// Pair `(i, j)` with probability `matrix[i][j]`; the diagonal is ignored.
    PairMatrix { matrix: Vec<Vec<f64>> },
    /// Every edge subset equally likely.
    UniformSubset,
}

impl InteractionModel {
    /// Checks the model against `n` agents; every off-diagonal probability must lie in (0, 1).
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::ErdosRenyi { p } => check_probability("edge probability p", *p),
            Self::PairMatrix { matrix } => {
                if matrix.len() != n {
                    return Err(Error::AgentCountMismatch { expected: n, got: matrix.len() });
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::AgentCountMismatch { expected: n, got: row.len() });
                    }
                    for (j, &p) in row.iter().enumerate() {
                        if i != j {
                            check_probability(&format!("pair probability ({i}, {j})"), p)?;
                        }
                    }
                }
                Ok(())
            }
            Self::UniformSubset => Ok(()),
        }
    }

    /// Inclusion probability of the ordered pair `(i, j)`.
    pub fn pair_probability(&self, i: usize, j: usize) -> f64 {
        match self {
            Self::ErdosRenyi { p } => *p,
            Self::PairMatrix { matrix } => matrix[i][j],
            Self::UniformSubset => 0.5,
        }
    }

    /// Draws one edge set for `n` agents.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> EdgeSet {
        let total = pair_count(n);
        let mut edges = EdgeSet::empty(n);
        match self {
            Self::UniformSubset => {
                let mut k = 0;
                while k < total {
                    let word = rng.next_u64();
                    for b in 0..64.min(total - k) {
                        if word >> b & 1 == 1 {
                            edges.insert_index(k + b);
                        }
                    }
                    k += 64;
                }
            }
            Self::ErdosRenyi { p } => {
                for k in 0..total {
                    if rng.gen::<f64>() < *p {
                        edges.insert_index(k);
                    }
                }
            }
            Self::PairMatrix { matrix } => {
                for k in 0..total {
                    let (i, j) = pair_at(n, k);
                    if rng.gen::<f64>() < matrix[i][j] {
                        edges.insert_index(k);
                    }
                }
            }
        }
        edges
    }

    /// Probability of drawing exactly `edges`.
    pub fn subset_probability(&self, edges: &EdgeSet) -> f64 {
        let n = edges.agent_count();
        (0..pair_count(n))
            .map(|k| {
                let (i, j) = pair_at(n, k);
                let p = self.pair_probability(i, j);
                if edges.contains_index(k) {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    /// The largest `delta` with `P(E_t = E) >= delta` for every edge subset `E`.
    pub fn delta_lower_bound(&self, n: usize) -> Result<f64> {
        self.validate(n)?;
        Ok((0..pair_count(n))
            .map(|k| {
                let (i, j) = pair_at(n, k);
                let p = self.pair_probability(i, j);
                p.min(1.0 - p)
            })
            .product())
    }
}

fn check_probability(what: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { what: what.to_string(), value: p })
    }
}

/// Largest pair count accepted by [`verify_lowbound_exhaustive`].
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LowBoundReport {
    pub subsets: u64,
    pub min_probability: f64,
    /// Canonical bit mask of a subset attaining the minimum.
    pub argmin_mask: u64,
    pub total_probability: f64,
    pub delta: f64,
}

impl LowBoundReport {
    pub fn holds(&self, tol: f64) -> bool {
        (self.min_probability - self.delta).abs() <= tol * self.delta.max(f64::MIN_POSITIVE)
            && (self.total_probability - 1.0).abs() <= tol
    }
}

/// Enumerates every edge subset, computing its exact probability from the per-pair product.
pub fn verify_lowbound_exhaustive(model: &InteractionModel, n: usize) -> Result<LowBoundReport> {
    let pairs = pair_count(n);
    if pairs > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { pairs, limit: ENUMERATION_LIMIT });
    }
    let delta = model.delta_lower_bound(n)?;
    let probs: Vec<f64> = (0..pairs)
        .map(|k| {
            let (i, j) = pair_at(n, k);
            model.pair_probability(i, j)
        })
        .collect();
    let mut min_probability = f64::INFINITY;
    let mut argmin_mask = 0;
    let mut total = 0.0;
    let subsets = 1u64 << pairs;
    for mask in 0..subsets {
        let prob: f64 = probs
            .iter()
            .enumerate()
            .map(|(k, &p)| if mask >> k & 1 == 1 { p } else { 1.0 - p })
            .product();
        total += prob;
        if prob < min_probability {
            min_probability = prob;
            argmin_mask = mask;
        }
    }
    Ok(LowBoundReport { subsets, min_probability, argmin_mask, total_probability: total, delta })
}

/// Reproducible random stream for one trial: `(master_seed, stream_id)` selects an independent
/// ChaCha stream, so trials need no shared generator.
#[derive(Debug, Clone)]
pub struct SeededStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self { master_seed, stream_id, rng }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Draws one edge set from `model` using `rng`.
pub fn sample_edge_set(model: &InteractionModel, n: usize, rng: &mut SeededStream) -> EdgeSet {
    model.sample(n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        let er = InteractionModel::ErdosRenyi { p: 0.5 };
        assert_eq!(er.delta_lower_bound(3).unwrap(), 0.015625);
        assert_eq!(InteractionModel::UniformSubset.delta_lower_bound(3).unwrap(), 1.0 / 64.0);
        let pm = InteractionModel::PairMatrix { matrix: vec![vec![0.9; 3]; 3] };
        let delta = pm.delta_lower_bound(3).unwrap();
        assert!((delta - 1e-6).abs() < 1e-18, "{delta}");
    }

    #[test]
    fn exhaustive_examples() {
        let rep = verify_lowbound_exhaustive(&InteractionModel::ErdosRenyi { p: 0.5 }, 3).unwrap();
        assert_eq!(rep.subsets, 64);
        assert_eq!(rep.min_probability, 1.0 / 64.0);
        assert!((rep.total_probability - 1.0).abs() < 1e-12);

        let pm = InteractionModel::PairMatrix { matrix: vec![vec![0.3; 3]; 3] };
        let rep = verify_lowbound_exhaustive(&pm, 3).unwrap();
        assert!((rep.min_probability - 0.3f64.powi(6)).abs() < 1e-15);
        assert!(rep.holds(1e-12));
        // p < 1/2: the minimum is the full set
        assert_eq!(rep.argmin_mask, 63);
    }

    #[test]
    fn argmin_is_empty_set_for_large_p() {
        let rep = verify_lowbound_exhaustive(&InteractionModel::ErdosRenyi { p: 0.7 }, 3).unwrap();
        assert_eq!(rep.argmin_mask, 0);
        assert!(rep.holds(1e-12));
    }

    #[test]
    fn enumeration_guard() {
        // 4 agents have 12 pairs, 6 have 30
        assert!(verify_lowbound_exhaustive(&InteractionModel::UniformSubset, 4).is_ok());
        let err = verify_lowbound_exhaustive(&InteractionModel::UniformSubset, 6).unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { pairs: 30, limit: 20 }));
    }

    #[test]
    fn invalid_probabilities() {
        assert!(InteractionModel::ErdosRenyi { p: 1.0 }.validate(3).is_err());
        assert!(InteractionModel::ErdosRenyi { p: 0.0 }.validate(3).is_err());
        let mut m = vec![vec![0.5; 3]; 3];
        m[1][2] = 1.0;
        m[0][0] = 7.0; // diagonal unused
        let err = InteractionModel::PairMatrix { matrix: m }.validate(3).unwrap_err();
        assert!(err.to_string().contains("(1, 2)"));
    }

    #[test]
    fn stream_reproducible_and_distinct() {
        let model = InteractionModel::ErdosRenyi { p: 0.5 };
        let draw = |seed, id| {
            let mut s = SeededStream::new(seed, id);
            (0..50).map(|_| sample_edge_set(&model, 4, &mut s)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
    }
}
