//! Value distributions, seeded random streams and order-statistic Monte Carlo.
//!
//! All sampling goes through the inverse CDF, so a draw is a deterministic
//! function of one `u ~ U[0, 1)` and optional upper truncation is exact.
//! Monte-Carlo trials each get their own stream (`SeededRng::stream(trial)`),
//! which makes results independent of how trials are spread across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::McEstimate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDistribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Unbounded unless `truncate_at` is set.
    Exponential {
        rate: f64,
        truncate_at: Option<f64>,
    },
    /// Pareto type I: density `shape * scale^shape / x^(shape + 1)` on `x >= scale`.
    PowerLaw {
        shape: f64,
        scale: f64,
        truncate_at: Option<f64>,
    },
    Empirical {
        sorted: Vec<f64>,
    },
}

impl ValueDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = ValueDistribution::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let d = ValueDistribution::Exponential {
            rate,
            truncate_at: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn power_law(shape: f64, scale: f64) -> Result<Self> {
        let d = ValueDistribution::PowerLaw {
            shape,
            scale,
            truncate_at: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(mut sample: Vec<f64>) -> Result<Self> {
        sample.sort_by(f64::total_cmp);
        let d = ValueDistribution::Empirical { sorted: sample };
        d.validate()?;
        Ok(d)
    }

    /// Restricts an unbounded family to `[.., upper]`. No-op for bounded ones.
    pub fn truncated(self, upper: f64) -> Result<Self> {
        let d = match self {
            ValueDistribution::Exponential { rate, .. } => ValueDistribution::Exponential {
                rate,
                truncate_at: Some(upper),
            },
            ValueDistribution::PowerLaw { shape, scale, .. } => ValueDistribution::PowerLaw {
                shape,
                scale,
                truncate_at: Some(upper),
            },
            other => other,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        match self {
            ValueDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi) {
                    return Err(Error::param(format!(
                        "uniform needs 0 <= lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            ValueDistribution::Exponential { rate, truncate_at } => {
                if !finite_pos(*rate) {
                    return Err(Error::param(format!(
                        "exponential rate must be > 0, got {rate}"
                    )));
                }
                if let Some(u) = truncate_at {
                    if !finite_pos(*u) {
                        return Err(Error::param(format!(
                            "truncation point must be > 0, got {u}"
                        )));
                    }
                }
            }
            ValueDistribution::PowerLaw {
                shape,
                scale,
                truncate_at,
            } => {
                if !(shape.is_finite() && *shape > 1.0) {
                    return Err(Error::param(format!(
                        "power-law shape must exceed 1 for a finite mean, got {shape}"
                    )));
                }
                if !finite_pos(*scale) {
                    return Err(Error::param(format!(
                        "power-law scale must be > 0, got {scale}"
                    )));
                }
                if let Some(u) = truncate_at {
                    if !(u.is_finite() && u > scale) {
                        return Err(Error::param(format!(
                            "truncation point {u} must exceed the scale {scale}"
                        )));
                    }
                }
            }
            ValueDistribution::Empirical { sorted } => {
                if sorted.is_empty() {
                    return Err(Error::param(
                        "empirical distribution needs at least one point",
                    ));
                }
                if sorted.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::param(
                        "empirical points must be finite and non-negative",
                    ));
                }
                if sorted.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::param("empirical sample must be sorted"));
                }
            }
        }
        Ok(())
    }

    /// Finite upper end of the support, if there is one.
    pub fn support_upper(&self) -> Option<f64> {
        match self {
            ValueDistribution::Uniform { hi, .. } => Some(*hi),
            ValueDistribution::Exponential { truncate_at, .. } => *truncate_at,
            ValueDistribution::PowerLaw { truncate_at, .. } => *truncate_at,
            ValueDistribution::Empirical { sorted } => sorted.last().copied(),
        }
    }

    /// True for the families used untruncated even though the value model
    /// assumes a bounded support.
    pub fn is_unbounded_approximation(&self) -> bool {
        self.support_upper().is_none()
    }

    fn untruncated_cdf(&self, x: f64) -> f64 {
        match self {
            ValueDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            ValueDistribution::Exponential { rate, .. } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            ValueDistribution::PowerLaw { shape, scale, .. } => {
                if x <= *scale {
                    0.0
                } else {
                    1.0 - (scale / x).powf(*shape)
                }
            }
            ValueDistribution::Empirical { sorted } => {
                let below = sorted.partition_point(|v| *v <= x);
                below as f64 / sorted.len() as f64
            }
        }
    }

    fn untruncated_quantile(&self, p: f64) -> f64 {
        match self {
            ValueDistribution::Uniform { lo, hi } => lo + p * (hi - lo),
            ValueDistribution::Exponential { rate, .. } => -(-p).ln_1p() / rate,
            ValueDistribution::PowerLaw { shape, scale, .. } => {
                scale * (1.0 - p).powf(-1.0 / shape)
            }
            ValueDistribution::Empirical { sorted } => {
                let i = ((p * sorted.len() as f64) as usize).min(sorted.len() - 1);
                sorted[i]
            }
        }
    }

    fn truncation_mass(&self) -> f64 {
        match self {
            ValueDistribution::Exponential {
                truncate_at: Some(u),
                ..
            }
            | ValueDistribution::PowerLaw {
                truncate_at: Some(u),
                ..
            } => self.untruncated_cdf(*u),
            _ => 1.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mass = self.truncation_mass();
        (self.untruncated_cdf(x) / mass).min(1.0)
    }

    /// Inverse CDF on `[0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.untruncated_quantile(p * self.truncation_mass())
    }

    pub fn median(&self) -> f64 {
        match self {
            ValueDistribution::Empirical { sorted } => {
                let n = sorted.len();
                if n % 2 == 1 {
                    sorted[n / 2]
                } else {
                    0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
                }
            }
            _ => self.quantile(0.5),
        }
    }

    /// Closed-form mean; `None` for truncated exponential/power-law.
    pub fn mean(&self) -> Option<f64> {
        match self {
            ValueDistribution::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            ValueDistribution::Exponential {
                rate,
                truncate_at: None,
            } => Some(1.0 / rate),
            ValueDistribution::PowerLaw {
                shape,
                scale,
                truncate_at: None,
            } => Some(shape * scale / (shape - 1.0)),
            ValueDistribution::Empirical { sorted } => crate::stats::mean(sorted),
            _ => None,
        }
    }

    /// One draw. The distribution is assumed valid.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Replaces the contents of `buf` with `n` draws.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend((0..n).map(|_| self.draw(rng)));
    }
}

/// A (master seed, stream index) pair naming one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededRng {
    pub master_seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(master_seed: u64) -> Self {
        SeededRng {
            master_seed,
            stream_index: 0,
        }
    }

    /// Same master seed, different ChaCha stream.
    pub fn stream(&self, index: u64) -> Self {
        SeededRng {
            master_seed: self.master_seed,
            stream_index: index,
        }
    }

    /// A new master seed for an independent sub-experiment labelled `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        let mixed = splitmix64(self.master_seed ^ splitmix64(self.stream_index))
            ^ splitmix64(tag.wrapping_add(0xA076_1D64_78BD_642F));
        SeededRng::new(splitmix64(mixed))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// `n` iid draws from `dist` on the given stream.
pub fn sample(dist: &ValueDistribution, n: usize, rng: &SeededRng) -> Result<Vec<f64>> {
    dist.validate()?;
    let mut r = rng.rng();
    let mut out = Vec::with_capacity(n);
    dist.fill(&mut r, n, &mut out);
    Ok(out)
}

/// Mean/median ratio of a Pareto law with shape `a`; strictly decreasing in `a`.
fn pareto_mean_median_ratio(a: f64) -> f64 {
    a / (a - 1.0) * 2f64.powf(-1.0 / a)
}

const FIT_SHAPE_MAX: f64 = 10.0;

/// Pareto law with the given median and mean, shape searched on (1, 10].
pub fn fit_power_law(median: f64, mean: f64) -> Result<ValueDistribution> {
    if !(median.is_finite() && mean.is_finite() && median > 0.0 && mean > median) {
        return Err(Error::Fit(format!(
            "need 0 < median < mean, got median={median}, mean={mean}"
        )));
    }
    let target = mean / median;
    if target <= pareto_mean_median_ratio(FIT_SHAPE_MAX) {
        return Err(Error::Fit(format!(
            "mean/median ratio {target} is unreachable for shape in (1, {FIT_SHAPE_MAX}]"
        )));
    }
    // ratio(lo) > target >= ratio(hi)
    let (mut lo, mut hi) = (1.0f64, FIT_SHAPE_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pareto_mean_median_ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shape = hi;
    let scale = median / 2f64.powf(1.0 / shape);
    ValueDistribution::power_law(shape, scale)
}

/// `V(k-1) - V(k)` where `V(j)` is the j-th highest entry. Reorders `values`.
pub fn kth_gap(values: &mut [f64], k: usize) -> f64 {
    debug_assert!(k >= 2 && k <= values.len());
    values.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    let kth = values[k - 1];
    let above = values[..k - 1]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    above - kth
}

/// Monte-Carlo estimate of `E[V(K-1) - V(K)]` among `a` draws.
pub fn order_stat_gap_mc(
    dist: &ValueDistribution,
    a: usize,
    k: usize,
    trials: usize,
    rng: &SeededRng,
) -> Result<McEstimate> {
    dist.validate()?;
    if k < 2 || a <= k {
        return Err(Error::domain(format!("need A > K >= 2, got A={a}, K={k}")));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let gaps: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(a),
            |buf, t| {
                let mut r = rng.stream(t).rng();
                dist.fill(&mut r, a, buf);
                kth_gap(buf, k)
            },
        )
        .collect();
    Ok(McEstimate::from_samples(&gaps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub name: &'static str,
    pub value: f64,
}

/// Closed-form candidates for the expected adjacent gap.
///
/// Uniform: exact spacing `(hi-lo)/(A+1)` and the looser `(hi-lo)/A` bound.
/// Exponential: the spacings identity `1/(rate (K-1))` and the alternative
/// `1/(rate (A-K+1))` that is sometimes quoted; the Monte-Carlo estimate
/// decides which one holds.
pub fn gap_closed_forms(dist: &ValueDistribution, a: usize, k: usize) -> Vec<ClosedForm> {
    match dist {
        ValueDistribution::Uniform { lo, hi } => vec![
            ClosedForm {
                name: "uniform_spacing",
                value: (hi - lo) / (a as f64 + 1.0),
            },
            ClosedForm {
                name: "uniform_one_over_a",
                value: (hi - lo) / a as f64,
            },
        ],
        ValueDistribution::Exponential {
            rate,
            truncate_at: None,
        } => vec![
            ClosedForm {
                name: "exp_spacings",
                value: 1.0 / (rate * (k as f64 - 1.0)),
            },
            ClosedForm {
                name: "exp_a_minus_k_plus_1",
                value: 1.0 / (rate * (a as f64 - k as f64 + 1.0)),
            },
        ],
        _ => Vec::new(),
    }
}

/// Names of the closed forms lying within `z` standard errors of `est`.
pub fn matching_closed_forms(est: &McEstimate, forms: &[ClosedForm], z: f64) -> Vec<&'static str> {
    forms
        .iter()
        .filter(|f| est.within(f.value, z))
        .map(|f| f.name)
        .collect()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
