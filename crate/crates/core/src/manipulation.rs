//! Fake-bid insertion by a miner.
//!
//! A miner that keeps only the top `j` real bids and pads the block with
//! `K - j` fake bids at the j-th price raises the clearing price to `p_j`.
//! The fakes cost `(K - j) p_j`; of the block revenue it gets back the
//! recovery fraction `phi = 1/B + (B-1)/(M B)` through the windowed reward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{SeededRng, ValueDistribution};
use crate::stats::McEstimate;
use crate::{Error, Result};

/// How the block revenue `F_j` of a manipulated block is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueModel {
    /// `F_j = p_j`.
    Literal,
    /// `F_j = j p_j`: only real users' payments.
    UserRevenue,
    /// `F_j = K p_j`: fake fees are block revenue too.
    #[default]
    FullRevenue,
}

impl RevenueModel {
    fn block_revenue(self, p_j: f64, j: usize, k: usize) -> f64 {
        match self {
            RevenueModel::Literal => p_j,
            RevenueModel::UserRevenue => j as f64 * p_j,
            RevenueModel::FullRevenue => k as f64 * p_j,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationConfig {
    pub k: usize,
    pub miners: usize,
    pub window: usize,
    pub revenue_model: RevenueModel,
    pub trials: usize,
}

impl ManipulationConfig {
    pub fn new(
        k: usize,
        miners: usize,
        window: usize,
        revenue_model: RevenueModel,
        trials: usize,
    ) -> Result<Self> {
        for (name, v) in [("K", k), ("M", miners), ("B", window), ("trials", trials)] {
            if v == 0 {
                return Err(Error::param(format!("{name} must be at least 1")));
            }
        }
        Ok(ManipulationConfig {
            k,
            miners,
            window,
            revenue_model,
            trials,
        })
    }

    pub fn recovery_fraction(&self) -> f64 {
        recovery_fraction(self.miners, self.window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulationResult {
    pub best_j: usize,
    pub best_utility: f64,
    pub honest_utility: f64,
    pub gain: f64,
}

/// Expected share of a block's revenue that returns to the miner who built
/// it: its own `1/B` plus `1/M` of the other `B - 1` window shares.
pub fn recovery_fraction(miners: usize, window: usize) -> f64 {
    // single rounding of an exact ratio keeps phi monotone in M and B
    let (m, b) = (miners.max(1) as f64, window.max(1) as f64);
    (m + b - 1.0) / (m * b)
}

fn check_bids(bids_desc: &[f64], k: usize) -> Result<()> {
    if bids_desc.len() < k {
        return Err(Error::domain(format!(
            "need at least K = {k} bids, got {}",
            bids_desc.len()
        )));
    }
    if bids_desc[..k].windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::domain("bids must be sorted in descending order"));
    }
    Ok(())
}

#[inline]
fn utility_unchecked(bids_desc: &[f64], j: usize, k: usize, phi: f64, model: RevenueModel) -> f64 {
    let p_j = bids_desc[j - 1];
    phi * model.block_revenue(p_j, j, k) - (k - j) as f64 * p_j
}

/// `U(j) = phi F_j - (K - j) p_j` for keeping the top `j` real bids.
pub fn manipulation_utility(bids_desc: &[f64], j: usize, cfg: &ManipulationConfig) -> Result<f64> {
    if j == 0 || j > cfg.k {
        return Err(Error::domain(format!("j = {j} outside 1..={}", cfg.k)));
    }
    check_bids(bids_desc, cfg.k)?;
    Ok(utility_unchecked(
        bids_desc,
        j,
        cfg.k,
        cfg.recovery_fraction(),
        cfg.revenue_model,
    ))
}

/// `U(j) - U(K)`, arranged so the result is monotone in `phi` after rounding.
#[inline]
fn advantage(bids_desc: &[f64], j: usize, k: usize, phi: f64, model: RevenueModel) -> f64 {
    let (p_j, p_k) = (bids_desc[j - 1], bids_desc[k - 1]);
    let revenue_diff = match model {
        RevenueModel::Literal => p_j - p_k,
        RevenueModel::UserRevenue => j as f64 * p_j - k as f64 * p_k,
        RevenueModel::FullRevenue => k as f64 * (p_j - p_k),
    };
    phi * revenue_diff - (k - j) as f64 * p_j
}

fn optimize(bids_desc: &[f64], k: usize, phi: f64, model: RevenueModel) -> ManipulationResult {
    let honest = utility_unchecked(bids_desc, k, k, phi, model);
    let (mut best_j, mut best) = (k, 0.0);
    // downward scan with strict improvement keeps ties at the larger j
    for j in (1..k).rev() {
        let a = advantage(bids_desc, j, k, phi, model);
        if a > best {
            best = a;
            best_j = j;
        }
    }
    ManipulationResult {
        best_j,
        best_utility: honest + best,
        honest_utility: honest,
        gain: best,
    }
}

/// Best number of real bids to keep; ties go to less manipulation.
pub fn optimal_manipulation(
    bids_desc: &[f64],
    cfg: &ManipulationConfig,
) -> Result<ManipulationResult> {
    check_bids(bids_desc, cfg.k)?;
    Ok(optimize(
        bids_desc,
        cfg.k,
        cfg.recovery_fraction(),
        cfg.revenue_model,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub miners: usize,
    pub window: usize,
    pub mean_gain: f64,
    pub std_error: f64,
    /// Mean honest block revenue `K p_K`, for scale.
    pub mean_block_revenue: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Sorts the top `k` of `values` into descending order in place.
fn top_k_desc(values: &mut [f64], k: usize) {
    let by_desc = |a: &f64, b: &f64| b.total_cmp(a);
    if k < values.len() {
        values.select_nth_unstable_by(k - 1, by_desc);
    }
    values[..k].sort_unstable_by(by_desc);
}

/// Mean optimal-manipulation gain over a grid of miner counts and windows.
///
/// Each trial draws one mempool and evaluates every `(M, B)` cell on it, so
/// cells share random numbers and per-instance monotonicity carries over to
/// the means. Rows come out in `miners`-major order.
#[allow(clippy::too_many_arguments)]
pub fn gain_sweep(
    dist: &ValueDistribution,
    n_mempool: usize,
    k: usize,
    miners_grid: &[usize],
    window_grid: &[usize],
    trials: usize,
    revenue_model: RevenueModel,
    rng: &SeededRng,
) -> Result<Vec<SweepRow>> {
    dist.validate()?;
    if k == 0 || n_mempool < k {
        return Err(Error::domain(format!(
            "need mempool >= K >= 1, got N={n_mempool}, K={k}"
        )));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    if miners_grid.is_empty() || window_grid.is_empty() {
        return Err(Error::domain("miner and window grids must be non-empty"));
    }
    if miners_grid.iter().chain(window_grid).any(|&x| x == 0) {
        return Err(Error::param("M and B must be at least 1"));
    }
    let cells: Vec<(usize, usize, f64)> = miners_grid
        .iter()
        .flat_map(|&m| {
            window_grid
                .iter()
                .map(move |&b| (m, b, recovery_fraction(m, b)))
        })
        .collect();

    let per_trial: Vec<(Vec<f64>, f64)> = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n_mempool),
            |buf, t| {
                let mut r = rng.stream(t).rng();
                dist.fill(&mut r, n_mempool, buf);
                top_k_desc(buf, k);
                let top = &buf[..k];
                let gains = cells
                    .iter()
                    .map(|&(_, _, phi)| optimize(top, k, phi, revenue_model).gain)
                    .collect();
                (gains, k as f64 * top[k - 1])
            },
        )
        .collect();

    let revenues: Vec<f64> = per_trial.iter().map(|(_, r)| *r).collect();
    let mean_block_revenue = McEstimate::from_samples(&revenues).mean;
    let mut column = Vec::with_capacity(trials);
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &(miners, window, _))| {
            column.clear();
            column.extend(per_trial.iter().map(|(g, _)| g[c]));
            let est = McEstimate::from_samples(&column);
            SweepRow {
                miners,
                window,
                mean_gain: est.mean,
                std_error: est.std_error,
                mean_block_revenue,
                trials,
                seed: rng.master_seed,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleBlockCheck {
    /// Some `n < K` has `n f_n >= K f_K`.
    pub profitable: bool,
    /// The `n < K` maximising `n f_n`, when restricting pays.
    pub worst_n: Option<usize>,
    /// `n f_n > (n-1) f_(n-1)` for every `n = 2..=K`.
    pub sequential_holds: bool,
}

/// Whether a miner paid its own block's revenue gains by restricting the
/// block to `n < K` transactions at the n-th fee.
pub fn single_block_check(fees_desc: &[f64], k: usize) -> Result<SingleBlockCheck> {
    if k == 0 {
        return Err(Error::domain("K must be positive"));
    }
    check_bids(fees_desc, k)?;
    let rev = |n: usize| n as f64 * fees_desc[n - 1];
    let honest = rev(k);
    let mut worst: Option<(usize, f64)> = None;
    for n in 1..k {
        let r = rev(n);
        if worst.is_none_or(|(_, w)| r > w) {
            worst = Some((n, r));
        }
    }
    let profitable = worst.is_some_and(|(_, r)| r >= honest);
    let sequential_holds = (2..=k).all(|n| rev(n) > rev(n - 1));
    Ok(SingleBlockCheck {
        profitable,
        worst_n: if profitable {
            worst.map(|(n, _)| n)
        } else {
            None
        },
        sequential_holds,
    })
}

/// Probability that restricting the block pays, over `a` iid bids.
pub fn profitable_probability_mc(
    dist: &ValueDistribution,
    a: usize,
    k: usize,
    trials: usize,
    rng: &SeededRng,
) -> Result<McEstimate> {
    dist.validate()?;
    if k == 0 || a < k {
        return Err(Error::domain(format!("need A >= K >= 1, got A={a}, K={k}")));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let hits: Vec<Result<f64>> = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(a),
            |buf, t| {
                let mut r = rng.stream(t).rng();
                dist.fill(&mut r, a, buf);
                top_k_desc(buf, k);
                let check = single_block_check(&buf[..k], k)?;
                Ok(if check.profitable { 1.0 } else { 0.0 })
            },
        )
        .collect();
    let hits = hits.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&hits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(k: usize, m: usize, b: usize) -> ManipulationConfig {
        ManipulationConfig::new(k, m, b, RevenueModel::FullRevenue, 1).unwrap()
    }

    /// Independent enumeration: explicit block contents, fees and refunds.
    fn brute_force(bids_desc: &[f64], k: usize, m: usize, b: usize) -> (usize, f64) {
        let phi = 1.0 / b as f64 + (b as f64 - 1.0) / (m as f64 * b as f64);
        let mut best = (0, f64::NEG_INFINITY);
        for j in 1..=k {
            let price = bids_desc[j - 1];
            let block: Vec<f64> = std::iter::repeat_n(price, k).collect();
            let revenue: f64 = block.iter().sum();
            let fake_cost: f64 = block[j..].iter().sum();
            let u = phi * revenue - fake_cost;
            if u >= best.1 {
                best = (j, u);
            }
        }
        best
    }

    #[test]
    fn recovery_fraction_examples() {
        assert_eq!(recovery_fraction(1, 1), 1.0);
        assert_eq!(recovery_fraction(2, 2), 0.75);
        assert!((recovery_fraction(1_000_000_000, 10) - 0.1).abs() < 1e-8);
        assert_eq!(recovery_fraction(1, 50), 1.0);
    }

    #[test]
    fn utility_example_sole_miner() {
        let bids = [100.0, 2.0, 1.0];
        let c = cfg(3, 1, 1);
        assert_eq!(manipulation_utility(&bids, 1, &c).unwrap(), 100.0);
        assert_eq!(manipulation_utility(&bids, 2, &c).unwrap(), 4.0);
        assert_eq!(manipulation_utility(&bids, 3, &c).unwrap(), 3.0);
        let r = optimal_manipulation(&bids, &c).unwrap();
        assert_eq!(r.best_j, 1);
        assert_eq!(r.gain, 97.0);
        assert_eq!(r.honest_utility, 3.0);
    }

    #[test]
    fn utility_example_many_miners() {
        let bids = [100.0, 2.0, 1.0];
        let c = cfg(3, 10, 10);
        assert!((c.recovery_fraction() - 0.19).abs() < 1e-12);
        assert!((manipulation_utility(&bids, 1, &c).unwrap() + 143.0).abs() < 1e-9);
        assert!((manipulation_utility(&bids, 3, &c).unwrap() - 0.57).abs() < 1e-9);
        let r = optimal_manipulation(&bids, &c).unwrap();
        assert_eq!(r.best_j, 3);
        assert_eq!(r.gain, 0.0);
    }

    #[test]
    fn two_slot_example() {
        // f1 = 10, f2 = 4: one fake at f1 earns 10 > 2 f2 = 8
        let bids = [10.0, 4.0];
        let c = cfg(2, 1, 1);
        assert_eq!(manipulation_utility(&bids, 1, &c).unwrap(), 10.0);
        assert_eq!(manipulation_utility(&bids, 2, &c).unwrap(), 8.0);
        assert_eq!(optimal_manipulation(&bids, &c).unwrap().best_j, 1);
    }

    #[test]
    fn revenue_models() {
        let bids = [100.0, 2.0, 1.0];
        let lit = ManipulationConfig::new(3, 1, 1, RevenueModel::Literal, 1).unwrap();
        let user = ManipulationConfig::new(3, 1, 1, RevenueModel::UserRevenue, 1).unwrap();
        assert_eq!(manipulation_utility(&bids, 1, &lit).unwrap(), 100.0 - 200.0);
        assert_eq!(manipulation_utility(&bids, 2, &user).unwrap(), 4.0 - 2.0);
        assert_eq!(manipulation_utility(&bids, 3, &user).unwrap(), 3.0);
    }

    #[test]
    fn flat_bids_have_no_gain() {
        let r = optimal_manipulation(&[5.0; 6], &cfg(6, 1, 1)).unwrap();
        assert_eq!(r.best_j, 6);
        assert_eq!(r.gain, 0.0);
    }

    #[test]
    fn utility_errors() {
        let c = cfg(3, 1, 1);
        assert!(matches!(
            manipulation_utility(&[3.0, 2.0, 1.0], 0, &c),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            manipulation_utility(&[3.0, 2.0, 1.0], 4, &c),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            optimal_manipulation(&[3.0, 2.0], &c),
            Err(Error::Domain(_))
        ));
        assert!(ManipulationConfig::new(3, 0, 1, RevenueModel::FullRevenue, 1).is_err());
    }

    #[test]
    fn single_block_examples() {
        let c = single_block_check(&[10.0, 1.0, 1.0], 3).unwrap();
        assert!(c.profitable);
        assert_eq!(c.worst_n, Some(1));
        let c = single_block_check(&[3.0, 3.0, 3.0], 3).unwrap();
        assert!(!c.profitable);
        assert!(c.sequential_holds);
        assert!(single_block_check(&[3.0, 3.0], 3).is_err());
    }

    #[test]
    fn profitability_shrinks_with_more_users() {
        let d = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let s = SeededRng::new(5);
        let small = profitable_probability_mc(&d, 30, 25, 2_000, &s.derive(30)).unwrap();
        let large = profitable_probability_mc(&d, 400, 25, 2_000, &s.derive(400)).unwrap();
        assert!(small.mean > large.mean, "{small:?} {large:?}");
    }

    #[test]
    fn sweep_shape_and_corner_maximum() {
        let d = crate::distributions::fit_power_law(2.0, 10.0).unwrap();
        let rows = gain_sweep(
            &d,
            60,
            30,
            &[1, 10],
            &[1, 10],
            200,
            RevenueModel::FullRevenue,
            &SeededRng::new(8),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].miners, rows[0].window), (1, 1));
        assert_eq!((rows[1].miners, rows[1].window), (1, 10));
        let top = rows[0].mean_gain;
        assert!(rows.iter().all(|r| r.mean_gain <= top));
        assert!(rows[0].mean_block_revenue > 0.0 && rows[0].mean_block_revenue.is_finite());
        assert!(gain_sweep(
            &d,
            10,
            30,
            &[1],
            &[1],
            1,
            RevenueModel::FullRevenue,
            &SeededRng::new(8)
        )
        .is_err());
    }

    fn arb_bids() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..100.0, 1..40).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #[test]
        fn optimizer_agrees_with_enumeration(bids in arb_bids(), m in 1usize..50, b in 1usize..50) {
            let k = bids.len();
            let r = optimal_manipulation(&bids, &cfg(k, m, b)).unwrap();
            let (j, u) = brute_force(&bids, k, m, b);
            prop_assert!((r.best_utility - u).abs() <= 1e-9 * (1.0 + u.abs()));
            let u_at = manipulation_utility(&bids, j, &cfg(k, m, b)).unwrap();
            prop_assert!((u_at - r.best_utility).abs() <= 1e-9 * (1.0 + u.abs()));
            prop_assert!(r.gain >= 0.0);
        }

        #[test]
        fn gain_non_increasing_in_miners_and_window(bids in arb_bids(), m in 1usize..100, b in 1usize..100) {
            let k = bids.len();
            let g = |m, b| optimal_manipulation(&bids, &cfg(k, m, b)).unwrap().gain;
            prop_assert!(g(m + 1, b) <= g(m, b));
            prop_assert!(g(m, b + 1) <= g(m, b));
            prop_assert!(g(m, b) <= g(1, 1));
        }

        #[test]
        fn sequential_inequalities_rule_out_profit(bids in arb_bids()) {
            let k = bids.len();
            let c = single_block_check(&bids, k).unwrap();
            if c.sequential_holds {
                prop_assert!(!c.profitable);
            }
        }
    }
}
