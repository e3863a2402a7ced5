//! User bidding strategies and the gain available from non-truthful bids.
//!
//! Under pay-minimum-included pricing a user facing truthful opponents can
//! only gain by shading toward the K-th highest competing bid, and that gain
//! is capped by the gap between the (K-1)-th and K-th competing bids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{order_stat_gap_mc, SeededRng, ValueDistribution};
use crate::mech::{
    allocate_top_k, price_gfp, price_gsp_uniform, price_proposed, PricingRule, ProtocolParams,
    Transaction,
};
use crate::stats::McEstimate;
use crate::{Error, FeeAmount, Result, ValueScale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BidStrategy {
    Truthful,
    /// Symmetric equilibrium of a single-item first-price auction with `n`
    /// uniform bidders: bid `(n-1)/n` of the value.
    FirstPriceSingleItemBne {
        n: usize,
    },
    FixedShade {
        theta: f64,
    },
    /// Best response to known opponent bids; needs an [`AuctionContext`].
    OptimalDeviationOracle,
}

/// What the deviation oracle is allowed to see.
#[derive(Debug, Clone, Copy)]
pub struct AuctionContext<'a> {
    pub others_desc: &'a [f64],
    pub k: usize,
    /// How far above the K-th competing bid the oracle bids.
    pub epsilon: f64,
}

impl BidStrategy {
    pub fn fixed_shade(theta: f64) -> Result<Self> {
        let s = BidStrategy::FixedShade { theta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BidStrategy::FixedShade { theta } if !(0.0..=1.0).contains(&theta) => Err(
                Error::param(format!("shade factor must lie in [0, 1], got {theta}")),
            ),
            BidStrategy::FirstPriceSingleItemBne { n } if n < 2 => Err(Error::param(format!(
                "equilibrium bid needs N >= 2, got {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// True when the bid is a strictly increasing function of value.
    pub fn is_strictly_increasing(&self) -> bool {
        match *self {
            BidStrategy::Truthful | BidStrategy::FirstPriceSingleItemBne { .. } => true,
            BidStrategy::FixedShade { theta } => theta > 0.0,
            BidStrategy::OptimalDeviationOracle => false,
        }
    }

    /// Context-free bid; the oracle strategy has no context-free bid.
    pub fn bid(&self, value: f64) -> Result<f64> {
        apply_strategy(self, value, None)
    }
}

pub fn apply_strategy(
    strategy: &BidStrategy,
    value: f64,
    context: Option<&AuctionContext<'_>>,
) -> Result<f64> {
    strategy.validate()?;
    if value.is_nan() || value < 0.0 {
        return Err(Error::param(format!(
            "value must be non-negative, got {value}"
        )));
    }
    match *strategy {
        BidStrategy::Truthful => Ok(value),
        BidStrategy::FirstPriceSingleItemBne { n } => Ok(value * (n as f64 - 1.0) / n as f64),
        BidStrategy::FixedShade { theta } => Ok(theta * value),
        BidStrategy::OptimalDeviationOracle => {
            let ctx = context
                .ok_or_else(|| Error::domain("the deviation oracle needs the other bids and K"))?;
            let kth = kth_highest(ctx.others_desc, ctx.k)?;
            if value <= kth {
                Ok(value)
            } else {
                Ok((kth + ctx.epsilon).min(value))
            }
        }
    }
}

fn check_desc(xs: &[f64]) -> Result<()> {
    if xs.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::domain("bids must be sorted in descending order"));
    }
    Ok(())
}

fn kth_highest(others_desc: &[f64], k: usize) -> Result<f64> {
    if k == 0 || others_desc.len() < k {
        return Err(Error::domain(format!(
            "need at least K = {k} other bids, got {}",
            others_desc.len()
        )));
    }
    check_desc(others_desc)?;
    Ok(others_desc[k - 1])
}

/// Supremum over bids of the payoff improvement over truthful bidding under
/// pay-minimum-included pricing, with every other user truthful.
///
/// With `V(K-1)`, `V(K)` the (K-1)-th and K-th highest competing bids:
/// zero when `own <= V(K)`, `own - V(K)` up to `V(K-1)`, and the gap
/// `V(K-1) - V(K)` beyond it. For K = 1 there is no `V(K-1)`, so the
/// middle case extends upward.
pub fn sup_strategic_gain(own_value: f64, others_desc: &[f64], k: usize) -> Result<f64> {
    let v_k = kth_highest(others_desc, k)?;
    if own_value <= v_k {
        return Ok(0.0);
    }
    if k >= 2 {
        let v_k1 = others_desc[k - 2];
        if own_value > v_k1 {
            return Ok(v_k1 - v_k);
        }
    }
    Ok(own_value - v_k)
}

/// Payoff of bidding `own_bid` with value `own_value` against fixed
/// competing bids under pay-minimum-included pricing, in value units.
pub fn proposed_payoff(
    own_value: f64,
    own_bid: f64,
    others: &[f64],
    k: usize,
    scale: ValueScale,
) -> Result<f64> {
    let params = ProtocolParams::simple(k, PricingRule::Proposed)?;
    let me = others.len() as u64;
    let mut txs = Vec::with_capacity(others.len() + 1);
    for (i, &b) in others.iter().enumerate() {
        txs.push(Transaction::real(i as u64, scale.to_fee(b)?));
    }
    txs.push(Transaction::real(me, scale.to_fee(own_bid)?));
    let winners = allocate_top_k(&txs, k);
    let filled = winners.len() == k;
    let outcome = price_proposed(&winners, &params, !filled)?;
    Ok(match outcome.payment_of(crate::mech::TxId(me)) {
        Some(paid) => own_value - scale.to_value(paid),
        None => 0.0,
    })
}

/// Bound on the expected strategic gain: `E[V(K-1) - V(K)]` among `a` users.
pub fn expected_gain_bound_mc(
    dist: &ValueDistribution,
    a: usize,
    k: usize,
    trials: usize,
    rng: &SeededRng,
) -> Result<McEstimate> {
    order_stat_gap_mc(dist, a, k, trials, rng)
}

const DOMINANCE_SCALE: f64 = 1e9;

fn gsp_payoff(value: FeeAmount, bids: &[Transaction], me: usize, k: usize) -> Result<i128> {
    let outcome = price_gsp_uniform(bids, k)?;
    Ok(match outcome.payment_of(bids[me].id) {
        Some(paid) => value.units() as i128 - paid.units() as i128,
        None => 0,
    })
}

/// Checks on one instance that no bidder can strictly improve on truthful
/// bidding under uniform pricing at the (K+1)-st bid by moving to any grid
/// bid. Values and grid are quantized to 1e-9 so payoffs compare exactly.
pub fn truthful_dominance_check_gsp(
    values: &[f64],
    k: usize,
    deviation_grid: &[f64],
) -> Result<bool> {
    if k == 0 || values.len() < k + 2 {
        return Err(Error::domain(format!(
            "need at least K + 2 = {} bidders, got {}",
            k + 2,
            values.len()
        )));
    }
    let scale = ValueScale::new(DOMINANCE_SCALE)?;
    let truthful: Vec<Transaction> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| Ok(Transaction::real(i as u64, scale.to_fee(v)?)))
        .collect::<Result<_>>()?;
    let grid: Vec<FeeAmount> = deviation_grid
        .iter()
        .map(|&g| scale.to_fee(g))
        .collect::<Result<_>>()?;

    let mut bids = truthful.clone();
    for me in 0..truthful.len() {
        let value = truthful[me].bid;
        let honest = gsp_payoff(value, &truthful, me, k)?;
        for &dev in &grid {
            bids[me].bid = dev;
            if gsp_payoff(value, &bids, me, k)? > honest {
                return Ok(false);
            }
        }
        bids[me].bid = value;
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueEquivalence {
    pub first_price: McEstimate,
    pub second_price: McEstimate,
}

/// Single-item revenue under first price with equilibrium bids and under
/// second price with truthful bids, `n` uniform(0, 1) bidders.
pub fn revenue_equivalence_mc(
    n: usize,
    trials: usize,
    rng: &SeededRng,
) -> Result<RevenueEquivalence> {
    let bne = BidStrategy::FirstPriceSingleItemBne { n };
    bne.validate()?;
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let scale = ValueScale::new(DOMINANCE_SCALE)?;
    let dist = ValueDistribution::uniform(0.0, 1.0)?;
    let pairs: Vec<Result<(f64, f64)>> = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || {
                (
                    Vec::with_capacity(n),
                    Vec::with_capacity(n),
                    Vec::with_capacity(n),
                )
            },
            |(values, truthful, shaded), t| {
                let mut r = rng.stream(t).rng();
                dist.fill(&mut r, n, values);
                truthful.clear();
                shaded.clear();
                for (i, &v) in values.iter().enumerate() {
                    truthful.push(Transaction::real(i as u64, scale.to_fee(v)?));
                    shaded.push(Transaction::real(i as u64, scale.to_fee(bne.bid(v)?)?));
                }
                let first = price_gfp(&allocate_top_k(shaded, 1))?.miner_revenue;
                let second = price_gsp_uniform(truthful, 1)?.miner_revenue;
                Ok((scale.to_value(first), scale.to_value(second)))
            },
        )
        .collect();
    let mut first = Vec::with_capacity(trials);
    let mut second = Vec::with_capacity(trials);
    for p in pairs {
        let (f, s) = p?;
        first.push(f);
        second.push(s);
    }
    Ok(RevenueEquivalence {
        first_price: McEstimate::from_samples(&first),
        second_price: McEstimate::from_samples(&second),
    })
}
