//! Deterministic gradient-noise injection.
//!
//! The solver adds `e^k` to the aggregated gradient; only the norm schedule
//! `sigma_k = ||e^k||` matters for the theory, so the direction is a
//! pseudo-random unit vector reproducible from `(seed, k)`.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// `sigma_k = amplitude * zeta^k`, `0 < zeta < 1`.
    Geometric {
        amplitude: f64,
        zeta: f64,
    },
    /// `sigma_k = amplitude * k^{-exponent}` for `k >= 1`, `sigma_0 = amplitude`,
    /// with `exponent > 1` so the squared norms stay summable.
    Power {
        amplitude: f64,
        exponent: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSchedule {
    pub fn none() -> Self {
        NoiseSchedule {
            kind: NoiseKind::None,
            seed: 0,
        }
    }

    pub fn new(kind: NoiseKind, seed: u64) -> Result<Self> {
        match kind {
            NoiseKind::None => {}
            NoiseKind::Geometric { amplitude, zeta } => {
                if amplitude < 0.0 {
                    return Err(Error::invalid("noise amplitude must be >= 0"));
                }
                if !(zeta > 0.0 && zeta < 1.0) {
                    return Err(Error::invalid("geometric noise needs zeta in (0,1)"));
                }
            }
            NoiseKind::Power {
                amplitude,
                exponent,
            } => {
                if amplitude < 0.0 {
                    return Err(Error::invalid("noise amplitude must be >= 0"));
                }
                if !(exponent > 1.0) {
                    return Err(Error::invalid("power noise needs exponent > 1"));
                }
            }
        }
        Ok(NoiseSchedule { kind, seed })
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, NoiseKind::None)
    }

    /// The scheduled norm `sigma_k`.
    pub fn sigma(&self, k: u64) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Geometric { amplitude, zeta } => amplitude * zeta.powi(k as i32),
            NoiseKind::Power {
                amplitude,
                exponent,
            } => {
                if k == 0 {
                    amplitude
                } else {
                    amplitude * (k as f64).powf(-exponent)
                }
            }
        }
    }

    /// Adds `e^k` to `v` in place and returns `sigma_k`. The direction is a
    /// unit vector drawn from a stream keyed by `k`, so two runs with the
    /// same seed produce bit-identical noise.
    pub fn apply(&self, v: &mut [f64], k: u64) -> f64 {
        let sigma = self.sigma(k);
        if sigma == 0.0 {
            return sigma;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k.wrapping_add(1));
        let mut dir = vec![0.0f64; v.len()];
        let mut nrm_sq = 0.0;
        for d in dir.iter_mut() {
            *d = rng.sample::<f64, _>(rand_distr::StandardNormal);
            nrm_sq += *d * *d;
        }
        let nrm = nrm_sq.sqrt();
        if nrm == 0.0 {
            // vanishing draw: fall back to the first axis
            v[0] += sigma;
            return sigma;
        }
        let scale = sigma / nrm;
        for i in 0..v.len() {
            v[i] += scale * dir[i];
        }
        sigma
    }

    /// Tail sum `sum_{i >= k} sigma_i^2` for a single `k`.
    pub fn tail_sq(&self, k: u64) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Geometric { amplitude, zeta } => {
                let z2 = zeta * zeta;
                amplitude * amplitude * z2.powi(k as i32) / (1.0 - z2)
            }
            NoiseKind::Power {
                amplitude,
                exponent,
            } => {
                let p = 2.0 * exponent;
                let c2 = amplitude * amplitude;
                let head = if k == 0 { c2 } else { 0.0 };
                let start = k.max(1);
                head + c2 * power_tail(start, p)
            }
        }
    }

    /// All tail sums for `k = 0 ..= k_max`, built backward so consecutive
    /// entries differ by exactly the computed `sigma_k^2`.
    pub fn tail_sq_sums(&self, k_max: u64) -> Vec<f64> {
        let len = k_max as usize + 1;
        let mut tails = vec![0.0; len + 1];
        tails[len] = self.tail_sq(k_max + 1);
        for k in (0..len).rev() {
            let s = self.sigma(k as u64);
            tails[k] = s * s + tails[k + 1];
        }
        tails
    }
}

/// `sum_{i >= start} i^{-p}` for `start >= 1`, `p > 2`.
///
/// Terms are summed directly until the increment drops below 1e-16 relative
/// to the accumulated value, then an Euler-Maclaurin remainder closes the
/// tail: `sum_{i>=M} i^{-p} ~= M^{1-p}/(p-1) + M^{-p}/2 + p M^{-p-1}/12`.
fn power_tail(start: u64, p: f64) -> f64 {
    // Kahan-compensated so a few hundred thousand terms keep full precision
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    let mut i = start;
    loop {
        let term = (i as f64).powf(-p);
        if term < 1e-16 * acc.max(1.0) || i - start > 50_000_000 {
            let m = i as f64;
            let rem = m.powf(1.0 - p) / (p - 1.0) + 0.5 * m.powf(-p) + p * m.powf(-p - 1.0) / 12.0;
            return acc + (rem - comp);
        }
        let y = term - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_follows_schedule() {
        let none = NoiseSchedule::none();
        assert_eq!(none.sigma(3), 0.0);

        let geo = NoiseSchedule::new(
            NoiseKind::Geometric {
                amplitude: 1.0,
                zeta: 0.5,
            },
            1,
        )
        .unwrap();
        assert_eq!(geo.sigma(3), 0.125);

        let pow = NoiseSchedule::new(
            NoiseKind::Power {
                amplitude: 1.0,
                exponent: 1.5,
            },
            1,
        )
        .unwrap();
        assert_eq!(pow.sigma(0), 1.0);
        assert!((pow.sigma(4) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn applied_norm_matches_sigma() {
        let geo = NoiseSchedule::new(
            NoiseKind::Geometric {
                amplitude: 2.0,
                zeta: 0.7,
            },
            42,
        )
        .unwrap();
        for k in [0u64, 1, 5, 20] {
            let mut v = vec![0.0; 7];
            let sigma = geo.apply(&mut v, k);
            let n = crate::vecmath::norm(&v);
            assert!((n - sigma).abs() <= 1e-12 * sigma.max(1.0));
        }
    }

    #[test]
    fn noise_is_reproducible_and_stream_dependent() {
        let geo = NoiseSchedule::new(
            NoiseKind::Geometric {
                amplitude: 1.0,
                zeta: 0.9,
            },
            7,
        )
        .unwrap();
        let mut a = vec![0.0; 4];
        let mut b = vec![0.0; 4];
        geo.apply(&mut a, 3);
        geo.apply(&mut b, 3);
        assert_eq!(a, b);
        let mut c = vec![0.0; 4];
        geo.apply(&mut c, 4);
        assert_ne!(a, c);
    }

    #[test]
    fn geometric_tail_closed_form() {
        let geo = NoiseSchedule::new(
            NoiseKind::Geometric {
                amplitude: 1.0,
                zeta: 0.5,
            },
            1,
        )
        .unwrap();
        // sum_{i>=0} 0.25^i = 4/3
        assert!((geo.tail_sq(0) - 4.0 / 3.0).abs() < 1e-15);
        let tails = geo.tail_sq_sums(10);
        assert!((tails[0] - 4.0 / 3.0).abs() < 1e-12);
        let s3 = geo.sigma(3);
        assert!((tails[3] - tails[4] - s3 * s3).abs() < 1e-16);
    }

    #[test]
    fn power_tail_matches_reference_zeta3() {
        // sum_{i>=1} i^{-3} = zeta(3) = 1.2020569031595942...
        let pow = NoiseSchedule::new(
            NoiseKind::Power {
                amplitude: 1.0,
                exponent: 1.5,
            },
            1,
        )
        .unwrap();
        let t1 = pow.tail_sq(1);
        assert!((t1 - 1.2020569031595942).abs() < 1e-12);
        // k = 0 adds sigma_0^2 = 1
        assert!((pow.tail_sq(0) - (1.0 + 1.2020569031595942)).abs() < 1e-12);
    }
}
