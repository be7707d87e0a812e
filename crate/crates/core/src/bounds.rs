//! Closed-form step and rate bounds.
//!
//! Integer-valued bounds (`S`, `T`, `t*`, `T_n*`) are evaluated in exact rational arithmetic
//! on the binary value of each input, so ceilings never suffer from rounding near integers.
//! `T_n` contains a natural logarithm and is evaluated in `f64`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input checked by caller")
}

fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `max(ceil(q), 0)` as an integer.
fn ceil_nonneg(q: &BigRational) -> u64 {
    if q.is_negative() {
        return 0;
    }
    q.ceil().to_integer().to_u64().expect("bound fits in u64")
}

/// `max(ceil(log2 q), 0)`: the smallest `T >= 0` with `q <= 2^T`.
fn ceil_log2_nonneg(q: &BigRational) -> u64 {
    let mut t = 0;
    let mut pow = BigRational::one();
    while *q > pow {
        pow = pow * int(2);
        t += 1;
    }
    t
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be positive and finite, got {v}")))
    }
}

fn check_tn_domain(n: usize, r_n: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::Domain(format!("agent count must be at least 3, got {n}")));
    }
    if !(r_n > 0.0 && r_n < 2.0) {
        return Err(Error::Domain(format!("smallest confidence bound must lie in (0, 2), got {r_n}")));
    }
    Ok(())
}

/// Step bounds for merging two connected clusters of sizes `J` and `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeBound {
    /// Bound on the number of approach phases.
    pub phases: u64,
    /// Bound on halving steps within one phase.
    pub halvings: u64,
    /// `phases * (halvings + 1) + 1`.
    pub total: u64,
}

/// Phase, halving and total step bounds for merging clusters of sizes `j` and `k` that start
/// `d0` apart, where `r_min` is the smallest confidence bound over both clusters.
pub fn compute_s_t(j: usize, k: usize, d0: f64, r_min: f64) -> Result<MergeBound> {
    if j == 0 || k == 0 {
        return Err(Error::Domain("cluster sizes must be at least 1".into()));
    }
    check_positive("initial distance", d0)?;
    check_positive("smallest bound", r_min)?;
    let q = exact(d0) / exact(r_min);
    let (j, k) = (j as u64, k as u64);
    let weight = int(4 * j * (k + 1)) / int(j + k + 1);
    let phases = ceil_nonneg(&((q.clone() - BigRational::one()) * weight + int(2)));
    let halvings = ceil_log2_nonneg(&q);
    Ok(MergeBound { phases, halvings, total: phases * (halvings + 1) + 1 })
}

/// Terminal-time bound for the cluster-merging controller on `n` agents.
pub fn compute_tn_star(n: usize, r_n: f64) -> Result<u64> {
    check_tn_domain(n, r_n)?;
    let spread = int(2) / exact(r_n) - BigRational::one();
    let mut phases = 1u64;
    for i in 2..n as u64 {
        let term = spread.clone() * int(8 * i) / int(i + 2) + int(2);
        phases += ceil_nonneg(&term);
    }
    let halvings = ceil_log2_nonneg(&(int(2) / exact(r_n)));
    Ok(phases * (halvings + 1) + n as u64 - 2)
}

/// Closed-form relaxation of [`compute_tn_star`]; the logarithm is natural.
pub fn compute_tn(n: usize, r_n: f64) -> Result<f64> {
    check_tn_domain(n, r_n)?;
    let nf = n as f64;
    let halvings = ceil_log2_nonneg(&(int(2) / exact(r_n))) as f64;
    let bracket = 3.0 * nf - 2.0 + 8.0 * (2.0 / r_n - 1.0) * (nf + 5.0 / 3.0 - 2.0 * (nf + 2.0).ln());
    Ok(bracket * (halvings + 1.0) + nf - 2.0)
}

/// `floor(T_n)`, the exponent used by the rate bounds.
pub fn tn_floor(n: usize, r_n: f64) -> Result<u64> {
    Ok(compute_tn(n, r_n)?.floor() as u64)
}

/// `(1 - base)^exponent` accurate for tiny `base`.
fn one_minus_pow(base: f64, exponent: u64) -> f64 {
    if exponent == 0 {
        1.0
    } else {
        (exponent as f64 * (-base).ln_1p()).exp()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Upper bound on `P(tau >= t)` when the absorbing set is reachable within `tstar` controlled
/// steps from anywhere: `(1 - delta^tstar)^floor(t / (tstar + 1))`.
pub fn tau_tail_bound(t: u64, tstar: u64, delta: f64) -> Result<f64> {
    if tstar == 0 {
        return Err(Error::Domain("tstar must be at least 1".into()));
    }
    check_delta(delta)?;
    let hit = delta.powf(tstar as f64);
    Ok(one_minus_pow(hit, t / (tstar + 1)))
}

/// Mean-square envelope `4n (1 - delta^floor(T_n))^floor(t / (floor(T_n) + 1))`.
pub fn mse_envelope(t: u64, n: usize, r_n: f64, delta: f64) -> Result<f64> {
    let tn = tn_floor(n, r_n)?;
    check_delta(delta)?;
    let hit = delta.powf(tn as f64);
    Ok(4.0 * n as f64 * one_minus_pow(hit, t / (tn + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_bound_examples() {
        let b = compute_s_t(1, 1, 1.0, 0.5).unwrap();
        assert_eq!((b.halvings, b.phases, b.total), (1, 5, 11));
        let b = compute_s_t(2, 1, 1.0, 0.3).unwrap();
        assert_eq!((b.halvings, b.phases, b.total), (2, 12, 37));
    }

    #[test]
    fn merge_bound_within_reach() {
        for (j, k) in [(1, 1), (3, 2), (5, 5)] {
            let b = compute_s_t(j, k, 0.2, 0.3).unwrap();
            assert_eq!(b.halvings, 0);
            assert!(b.phases <= 2);
        }
        // exactly at the bound
        let b = compute_s_t(2, 2, 0.5, 0.5).unwrap();
        assert_eq!((b.halvings, b.phases, b.total), (0, 2, 3));
    }

    #[test]
    fn merge_bound_rejects_bad_input() {
        assert!(compute_s_t(0, 1, 1.0, 0.5).is_err());
        assert!(compute_s_t(1, 1, 0.0, 0.5).is_err());
        assert!(compute_s_t(1, 1, 1.0, -0.5).is_err());
        assert!(compute_s_t(1, 1, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn tn_star_examples() {
        assert_eq!(compute_tn_star(3, 1.0).unwrap(), 15);
        assert_eq!(compute_tn_star(4, 1.0).unwrap(), 30);
    }

    #[test]
    fn tn_star_limit_near_two() {
        // just below 2 every ceiling term is 3 and the halving count is 1
        let r = 2.0 - 1e-12;
        for n in 3..20 {
            assert_eq!(compute_tn_star(n, r).unwrap(), 7 * n as u64 - 12, "n = {n}");
        }
    }

    #[test]
    fn tn_example() {
        let tn = compute_tn(3, 1.0).unwrap();
        let expected = (7.0 + 8.0 * (3.0 + 5.0 / 3.0 - 2.0 * 5f64.ln())) * 2.0 + 1.0;
        assert_eq!(tn, expected);
        assert!((tn - 38.165).abs() < 1e-3);
        assert_eq!(tn_floor(3, 1.0).unwrap(), 38);
    }

    #[test]
    fn tn_near_two_is_continuous() {
        // bracket at r -> 2 is 3n - 2, ceil(log2(2/r)) = 1 for r just below 2
        let near = compute_tn(3, 2.0 - 1e-12).unwrap();
        assert!((near - (7.0 * 2.0 + 1.0)).abs() < 1e-9, "{near}");
    }

    #[test]
    fn tn_domain() {
        assert!(compute_tn(2, 1.0).is_err());
        assert!(compute_tn(3, 2.0).is_err());
        assert!(compute_tn_star(3, 0.0).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        assert_eq!(tau_tail_bound(1, 1, 0.5).unwrap(), 1.0);
        assert_eq!(tau_tail_bound(5, 5, 0.3).unwrap(), 1.0);
        assert!((tau_tail_bound(2, 1, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let near_one = tau_tail_bound(10, 3, 1.0 - 1e-15).unwrap();
        assert!(near_one < 1e-10);
        assert!(tau_tail_bound(2, 1, 1.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(mse_envelope(0, 3, 1.0, 1.0 / 64.0).unwrap(), 12.0);
        let v = mse_envelope(39, 3, 1.0, 1.0 / 64.0).unwrap();
        assert!(v < 12.0 || v == 12.0);
        assert!((v - 12.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for t in 0..200 {
            let v = mse_envelope(t, 3, 1.9, 0.4).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }
}
