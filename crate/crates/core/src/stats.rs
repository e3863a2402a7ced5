//! Small summary-statistics helpers shared by the Monte-Carlo routines.

use serde::{Deserialize, Serialize};

/// Monte-Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Sample mean and `s / sqrt(n)`; folds in input order so the result
    /// only depends on the sample sequence.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return McEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                samples: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error,
            samples: n,
        }
    }

    /// Whether `target` lies within `z` standard errors of the estimate.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.std_error
    }

    /// Standard error of the difference of two independent estimates.
    pub fn diff_se(&self, other: &McEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population variance (divides by n).
pub fn population_variance(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = McEstimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_error, 0.0);
        assert!(e.within(2.0, 3.0));
    }

    #[test]
    fn standard_error_matches_hand_value() {
        // s^2 = 2.5 for 1..=5, se = sqrt(2.5 / 5)
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(e.mean, 3.0);
        assert!((e.std_error - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn population_variance_examples() {
        assert_eq!(population_variance(&[10.0, 20.0]), Some(25.0));
        assert_eq!(population_variance(&[12.0, 12.0]), Some(0.0));
        assert_eq!(population_variance(&[]), None);
    }
}
