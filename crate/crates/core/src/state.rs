//! Opinion configurations and confidence profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The opinions of `n` agents in `R^d` at a given step, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState<S> {
    dim: usize,
    coords: Vec<S>,
    time: u64,
}

impl<S: Scalar> SystemState<S> {
    /// Builds a state at time 0 from one coordinate vector per agent.
    pub fn new(opinions: Vec<Vec<S>>) -> Result<Self> {
        let dim = opinions.first().map(Vec::len).ok_or(Error::EmptyState)?;
        let mut coords = Vec::with_capacity(dim * opinions.len());
        for row in &opinions {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(opinions.len(), dim, coords)
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalars(xs: &[S]) -> Result<Self> {
        Self::from_flat(xs.len(), 1, xs.to_vec())
    }

    pub fn from_flat(n: usize, dim: usize, coords: Vec<S>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::EmptyState);
        }
        if coords.len() != n * dim {
            return Err(Error::DimensionMismatch { expected: n * dim, got: coords.len() });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteOpinion { agent: pos / dim });
        }
        Ok(Self { dim, coords, time: 0 })
    }

    pub(crate) fn from_parts(dim: usize, coords: Vec<S>, time: u64) -> Self {
        debug_assert!(dim > 0 && coords.len() % dim == 0);
        Self { dim, coords, time }
    }

    pub fn with_time(mut self, time: u64) -> Self {
        self.time = time;
        self
    }

    /// Number of agents.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    /// Opinion of agent `i`. Panics if `i` is out of range.
    pub fn opinion(&self, i: usize) -> &[S] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn opinions(&self) -> impl Iterator<Item = &[S]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        self.opinions().map(<[S]>::to_vec).collect()
    }

    pub(crate) fn check_agent(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::AgentOutOfRange { index: i, n: self.len() })
        }
    }

    /// Euclidean distance between agents `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> S {
        euclidean(self.opinion(i), self.opinion(j))
    }

    /// Whether agents `i` and `j` hold bitwise-identical opinions.
    pub fn same_opinion(&self, i: usize, j: usize) -> bool {
        self.opinion(i) == self.opinion(j)
    }

    /// Agents `i` and `j` count as co-located at tolerance `eps`; `eps == 0` means exact equality.
    pub fn near(&self, i: usize, j: usize, eps: S) -> bool {
        if eps == S::zero() {
            self.same_opinion(i, j)
        } else {
            self.distance(i, j) <= eps
        }
    }

    /// Largest Euclidean norm over all agents.
    pub fn max_norm(&self) -> S {
        self.opinions().map(norm).fold(S::zero(), S::max)
    }

    /// The sub-configuration of `agents`, relabelled `0..agents.len()` in the given order.
    pub fn restrict(&self, agents: &[usize]) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut coords = Vec::with_capacity(agents.len() * self.dim);
        for &a in agents {
            self.check_agent(a)?;
            coords.extend_from_slice(self.opinion(a));
        }
        Ok(Self { dim: self.dim, coords, time: 0 })
    }
}

pub fn euclidean<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<S>()
        .sqrt()
}

pub fn norm<S: Scalar>(a: &[S]) -> S {
    a.iter().map(|&x| x * x).sum::<S>().sqrt()
}

/// Per-agent confidence bounds, sorted nonincreasing and strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<S>", into = "Vec<S>")]
pub struct ConfidenceProfile<S: Scalar> {
    bounds: Vec<S>,
}

impl<S: Scalar> ConfidenceProfile<S> {
    pub fn new(bounds: Vec<S>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::EmptyState);
        }
        for (index, &value) in bounds.iter().enumerate() {
            if !(value.is_finite() && value > S::zero()) {
                return Err(Error::NonPositiveBound { index, value: value.as_f64() });
            }
            if index > 0 && value > bounds[index - 1] {
                return Err(Error::UnsortedBounds {
                    index,
                    value: value.as_f64(),
                    previous: bounds[index - 1].as_f64(),
                });
            }
        }
        Ok(Self { bounds })
    }

    pub fn uniform(n: usize, r: S) -> Result<Self> {
        Self::new(vec![r; n])
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn bound(&self, i: usize) -> S {
        self.bounds[i]
    }

    pub fn bounds(&self) -> &[S] {
        &self.bounds
    }

    /// Largest bound (agent 0 by the ordering convention).
    pub fn largest(&self) -> S {
        self.bounds[0]
    }

    /// Smallest bound, `r_n`.
    pub fn smallest(&self) -> S {
        self.bounds[self.bounds.len() - 1]
    }

    /// Bounds of `agents`, in the given order. Ascending index lists keep the ordering.
    pub fn restrict(&self, agents: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(agents.len());
        for &a in agents {
            if a >= self.len() {
                return Err(Error::AgentOutOfRange { index: a, n: self.len() });
            }
            out.push(self.bounds[a]);
        }
        Self::new(out)
    }

    pub(crate) fn check_matches(&self, state: &SystemState<S>) -> Result<()> {
        if self.len() == state.len() {
            Ok(())
        } else {
            Err(Error::AgentCountMismatch { expected: state.len(), got: self.len() })
        }
    }
}

impl<S: Scalar> TryFrom<Vec<S>> for ConfidenceProfile<S> {
    type Error = Error;

    fn try_from(bounds: Vec<S>) -> Result<Self> {
        Self::new(bounds)
    }
}

impl<S: Scalar> From<ConfidenceProfile<S>> for Vec<S> {
    fn from(p: ConfidenceProfile<S>) -> Self {
        p.bounds
    }
}
