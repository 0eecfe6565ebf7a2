//! Binomial confidence intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval {
            lower: 0.0,
            upper: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    }
}

pub fn wilson99(successes: u64, trials: u64) -> Interval {
    wilson(successes, trials, Z99)
}

/// Standard error of a Bernoulli frequency estimate.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_successes() {
        let i = wilson99(0, 10_000);
        assert_eq!(i.lower, 0.0);
        // z^2 / (n + z^2)
        let expect = Z99 * Z99 / (10_000.0 + Z99 * Z99);
        assert!((i.upper - expect).abs() < 1e-12);
    }

    #[test]
    fn contains_estimate_and_shrinks() {
        let a = wilson99(30, 100);
        let b = wilson99(300, 1000);
        assert!(a.lower < 0.3 && 0.3 < a.upper);
        assert!(b.upper - b.lower < a.upper - a.lower);
    }

    #[test]
    fn matches_known_value() {
        // 95% Wilson interval for 8/10: (0.4902, 0.9433).
        let i = wilson(8, 10, 1.959_963_984_540_054);
        assert!((i.lower - 0.4902).abs() < 1e-4);
        assert!((i.upper - 0.9433).abs() < 1e-4);
    }
}
