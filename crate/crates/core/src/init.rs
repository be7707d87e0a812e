//! Random initial opinions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::state::SystemState;

/// A point drawn uniformly from the closed ball of `radius` around `center`.
///
/// The direction is a normalized standard Gaussian vector; the distance from the center is
/// `radius * U^(1/d)`, which makes the density constant over the ball.
pub fn uniform_in_ball<R: Rng + ?Sized>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    let d = center.len();
    let dir = random_direction(d, rng);
    let u: f64 = rng.gen();
    let rho = radius * u.powf(1.0 / d as f64);
    center.iter().zip(dir).map(|(c, v)| c + rho * v).collect()
}

/// `n` agents drawn independently and uniformly from the unit ball in `R^d`.
pub fn uniform_unit_ball<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<SystemState<f64>> {
    if n == 0 || d == 0 {
        return Err(Error::EmptyState);
    }
    let origin = vec![0.0; d];
    let coords = (0..n).flat_map(|_| uniform_in_ball(&origin, 1.0, rng)).collect();
    SystemState::from_flat(n, d, coords)
}

/// A uniformly random unit vector in `R^d`.
pub fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 0.0 {
            return g.into_iter().map(|v| v / len).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::SeededStream;
    use crate::state::norm;

    #[test]
    fn points_stay_in_ball() {
        let mut rng = SeededStream::new(1, 0);
        for d in 1..5 {
            let s = uniform_unit_ball(200, d, &mut rng).unwrap();
            assert!(s.opinions().all(|x| norm(x) <= 1.0 + 1e-15));
        }
        let c = [3.0, -1.0];
        for _ in 0..200 {
            let p = uniform_in_ball(&c, 0.25, &mut rng);
            let off = [p[0] - c[0], p[1] - c[1]];
            assert!(norm(&off) <= 0.25 + 1e-15);
        }
    }

    #[test]
    fn radial_law_matches_volume_fraction() {
        // P(|x| <= 1/2) = 2^-d for the uniform law on the unit ball
        let mut rng = SeededStream::new(2, 0);
        for d in 1..4 {
            let n = 20_000;
            let s = uniform_unit_ball(n, d, &mut rng).unwrap();
            let inner = s.opinions().filter(|x| norm(x) <= 0.5).count() as f64 / n as f64;
            let want = 0.5f64.powi(d as i32);
            let sigma = (want * (1.0 - want) / n as f64).sqrt();
            assert!((inner - want).abs() < 5.0 * sigma, "d = {d}: {inner} vs {want}");
        }
    }

    #[test]
    fn directions_are_unit() {
        let mut rng = SeededStream::new(3, 0);
        for d in 1..6 {
            let v = random_direction(d, &mut rng);
            assert!((norm(&v) - 1.0).abs() < 1e-14);
        }
    }
}
