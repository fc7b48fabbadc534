//! Binomial summaries.

use serde::{Deserialize, Serialize};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Proportion with its observed standard error and Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub n: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Proportion {
    /// `None` when `n = 0`.
    pub fn new(successes: u64, n: u64) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let p = successes as f64 / n as f64;
        let (lo, hi) = wilson(successes, n, Z95);
        Some(Proportion { successes, n, estimate: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), lo, hi })
    }

    /// The same proportion divided by `x`.
    pub fn scaled(&self, x: f64) -> Proportion {
        Proportion { estimate: self.estimate / x, std_error: self.std_error / x, lo: self.lo / x, hi: self.hi / x, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (10, 10), (3, 7), (500, 1000), (1, 1_000_000)] {
            let p = Proportion::new(k, n).unwrap();
            assert!(p.lo <= p.estimate && p.estimate <= p.hi, "{k}/{n}");
            assert!(p.lo >= 0.0 && p.hi <= 1.0);
        }
        assert!(Proportion::new(0, 0).is_none());
    }

    #[test]
    fn wilson_reference_value() {
        // 8 of 10 at 95%: (0.4902, 0.9433).
        let (lo, hi) = wilson(8, 10, Z95);
        assert!((lo - 0.490_19).abs() < 1e-4 && (hi - 0.943_32).abs() < 1e-4);
    }
}
