//! Multi-block simulation of the fee market.
//!
//! Each block draws its active users, turns values into bids, lets the miner
//! build and price the block, and pays the miner the mean revenue of the
//! trailing `B` blocks (fewer during warm-up). Block `h` uses random stream
//! `h`, so the demand process does not depend on the mechanism, the window
//! or the miner policy being compared.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::distributions::{SeededRng, ValueDistribution};
use crate::manipulation::{optimal_manipulation, ManipulationConfig, RevenueModel};
use crate::mech::{
    block_revenue, price_gfp, price_gsp_uniform, price_proposed, sort_by_bid, AuctionOutcome,
    FillStatus, Payment, PricingRule, ProtocolParams, Provenance, Transaction, TxId,
};
use crate::stats::population_variance;
use crate::strategy::BidStrategy;
use crate::{Error, FeeAmount, Result, ValueScale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arrivals {
    /// Each of `users` is active independently with probability `prob`.
    Binomial { users: usize, prob: f64 },
    /// Exactly `active` users every block.
    Fixed { active: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub arrivals: Arrivals,
    pub value_dist: ValueDistribution,
    pub strategy: BidStrategy,
}

impl PopulationConfig {
    pub fn new(
        users: usize,
        arrival_prob: f64,
        value_dist: ValueDistribution,
        strategy: BidStrategy,
    ) -> Result<Self> {
        if users == 0 {
            return Err(Error::param("population needs at least one user"));
        }
        if !(arrival_prob > 0.0 && arrival_prob < 1.0) {
            return Err(Error::param(format!(
                "arrival probability must lie in (0, 1), got {arrival_prob}"
            )));
        }
        Self::checked(
            Arrivals::Binomial {
                users,
                prob: arrival_prob,
            },
            value_dist,
            strategy,
        )
    }

    pub fn fixed(
        active: usize,
        value_dist: ValueDistribution,
        strategy: BidStrategy,
    ) -> Result<Self> {
        Self::checked(Arrivals::Fixed { active }, value_dist, strategy)
    }

    fn checked(
        arrivals: Arrivals,
        value_dist: ValueDistribution,
        strategy: BidStrategy,
    ) -> Result<Self> {
        value_dist.validate()?;
        strategy.validate()?;
        if strategy == BidStrategy::OptimalDeviationOracle {
            return Err(Error::param(
                "the deviation oracle cannot drive a population",
            ));
        }
        Ok(PopulationConfig {
            arrivals,
            value_dist,
            strategy,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinerPolicy {
    #[default]
    Honest,
    /// Pads the block with fake bids whenever that raises its expected
    /// reward (pay-minimum-included pricing only).
    OptimalManipulator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub population: PopulationConfig,
    pub params: ProtocolParams,
    pub policy: MinerPolicy,
    pub miners: usize,
    pub scale: ValueScale,
}

impl ChainConfig {
    pub fn new(
        population: PopulationConfig,
        params: ProtocolParams,
        policy: MinerPolicy,
        miners: usize,
        scale: ValueScale,
    ) -> Result<Self> {
        if miners == 0 {
            return Err(Error::param("need at least one miner"));
        }
        Ok(ChainConfig {
            population,
            params,
            policy,
            miners,
            scale,
        })
    }
}

/// Trailing window of block revenues.
#[derive(Debug, Clone)]
pub struct RewardLedger {
    window: VecDeque<FeeAmount>,
    capacity: usize,
    sum: u128,
}

impl RewardLedger {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::param("reward window must be at least 1"));
        }
        Ok(RewardLedger {
            window: VecDeque::with_capacity(window),
            capacity: window,
            sum: 0,
        })
    }

    /// Records a block's revenue and returns its miner's reward: the mean of
    /// the stored revenues including this one, floored to a base unit.
    pub fn push(&mut self, revenue: FeeAmount) -> Result<FeeAmount> {
        if self.window.len() == self.capacity {
            let old = self.window.pop_front().expect("window is full");
            self.sum -= old.units() as u128;
        }
        self.window.push_back(revenue);
        self.sum += revenue.units() as u128;
        let mean = self.sum / self.window.len() as u128;
        u64::try_from(mean)
            .map(FeeAmount::new)
            .map_err(|_| Error::Overflow)
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window_sum(&self) -> u128 {
        self.sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub outcome: AuctionOutcome,
    pub revenue: FeeAmount,
    pub miner_id: usize,
    pub miner_reward: FeeAmount,
    /// Sum of values of included real users.
    pub realized_surplus: f64,
    /// Sum of the highest active values that fit in the block.
    pub max_surplus: f64,
    pub user_payments: FeeAmount,
    pub fake_payments: FeeAmount,
    /// Pay-own-bid revenue on the top-K true values.
    pub oracle_max_revenue: FeeAmount,
    pub active_users: usize,
}

impl BlockRecord {
    pub fn included_real(&self) -> impl Iterator<Item = TxId> + '_ {
        let n = self.active_users as u64;
        self.outcome
            .included
            .iter()
            .map(|p| p.tx)
            .chain(self.outcome.unpriced_extras.iter().copied())
            .filter(move |id| id.0 < n)
    }
}

fn uniform_price(
    txs: &[Transaction],
    price: FeeAmount,
    status: FillStatus,
) -> Result<AuctionOutcome> {
    let included: Vec<Payment> = txs
        .iter()
        .map(|t| Payment {
            tx: t.id,
            amount: price,
        })
        .collect();
    Ok(AuctionOutcome {
        clearing_price: price,
        miner_revenue: price.checked_mul(included.len() as u64)?,
        included,
        fill_penalty: FeeAmount::ZERO,
        fill_status: status,
        unpriced_extras: Vec::new(),
    })
}

/// Builds, prices and books one block for a given set of active values.
pub fn build_block(
    cfg: &ChainConfig,
    ledger: &mut RewardLedger,
    height: u64,
    miner_id: usize,
    values: &[f64],
) -> Result<BlockRecord> {
    let params = &cfg.params;
    let k = params.k();
    let n = values.len();

    let mut mempool = Vec::with_capacity(n);
    for (i, &v) in values.iter().enumerate() {
        let bid = cfg.scale.to_fee(cfg.population.strategy.bid(v)?)?;
        if bid >= params.min_fee() {
            mempool.push(Transaction::real(i as u64, bid));
        }
    }
    sort_by_bid(&mut mempool);

    let mut slots = k;
    let outcome = match params.pricing() {
        PricingRule::Gfp => price_gfp(&mempool[..k.min(mempool.len())])?,
        PricingRule::GspKPlus1 => {
            if mempool.len() > k {
                price_gsp_uniform(&mempool, k)?
            } else {
                // no losing bid to price at: the minimum fee acts as reserve
                let status = if mempool.len() == k {
                    FillStatus::Full
                } else {
                    FillStatus::DeclaredUnderfull
                };
                uniform_price(&mempool, params.min_fee(), status)?
            }
        }
        PricingRule::Proposed => {
            slots = params.capacity();
            let extra_slots = params.capacity() - k;
            if mempool.len() < k {
                price_proposed(&mempool, params, true)?
            } else {
                let keep = match cfg.policy {
                    MinerPolicy::Honest => k,
                    MinerPolicy::OptimalManipulator => {
                        let bids: Vec<f64> = mempool[..k].iter().map(|t| t.bid.as_f64()).collect();
                        let mcfg = ManipulationConfig::new(
                            k,
                            cfg.miners,
                            params.reward_window(),
                            RevenueModel::FullRevenue,
                            1,
                        )?;
                        optimal_manipulation(&bids, &mcfg)?.best_j
                    }
                };
                let mut priced: Vec<Transaction> = mempool[..keep].to_vec();
                let fake_bid = mempool[keep - 1].bid;
                for f in 0..(k - keep) {
                    priced.push(Transaction::new(
                        (n + f) as u64,
                        u64::MAX - miner_id as u64,
                        fake_bid,
                        1,
                        Provenance::Fake,
                    )?);
                }
                let extras = mempool[keep..].iter().take(extra_slots).map(|t| t.id);
                price_proposed(&priced, params, false)?.with_unpriced_extras(extras)
            }
        }
    };

    let revenue = block_revenue(&outcome)?;
    let mut user_payments = FeeAmount::ZERO;
    let mut fake_payments = FeeAmount::ZERO;
    for p in &outcome.included {
        if (p.tx.0 as usize) < n {
            user_payments = user_payments.checked_add(p.amount)?;
        } else {
            fake_payments = fake_payments.checked_add(p.amount)?;
        }
    }
    let miner_reward = ledger.push(revenue)?;

    // both sums run in descending value order, so the same set gives
    // bit-identical totals
    let mut served: Vec<f64> = outcome
        .included
        .iter()
        .map(|p| p.tx)
        .chain(outcome.unpriced_extras.iter().copied())
        .filter(|id| (id.0 as usize) < n)
        .map(|id| values[id.0 as usize])
        .collect();
    served.sort_unstable_by(|a, b| b.total_cmp(a));
    let realized_surplus: f64 = served.iter().sum();
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let max_surplus: f64 = sorted.iter().take(slots).sum();
    let oracle_max_revenue = FeeAmount::checked_sum(
        sorted
            .iter()
            .take(k)
            .map(|&v| cfg.scale.to_fee(v))
            .collect::<Result<Vec<_>>>()?,
    )?;

    Ok(BlockRecord {
        height,
        outcome,
        revenue,
        miner_id,
        miner_reward,
        realized_surplus,
        max_surplus,
        user_payments,
        fake_payments,
        oracle_max_revenue,
        active_users: n,
    })
}

/// Draws block `height`'s demand and miner from stream `height` and builds it.
pub fn step_block(
    cfg: &ChainConfig,
    ledger: &mut RewardLedger,
    height: u64,
    rng: &SeededRng,
) -> Result<BlockRecord> {
    let mut r = rng.stream(height).rng();
    let active = match cfg.population.arrivals {
        Arrivals::Binomial { users, prob } => {
            let binom =
                Binomial::new(users as u64, prob).map_err(|e| Error::param(e.to_string()))?;
            binom.sample(&mut r) as usize
        }
        Arrivals::Fixed { active } => active,
    };
    let mut values = Vec::with_capacity(active);
    cfg.population.value_dist.fill(&mut r, active, &mut values);
    let miner_id = r.random_range(0..cfg.miners);
    build_block(cfg, ledger, height, miner_id, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub blocks: usize,
    pub reward_window: usize,
    pub per_miner_reward: Vec<u64>,
    pub total_revenue: u64,
    pub total_user_payments: u64,
    pub total_fake_payments: u64,
    pub total_fill_penalty: u64,
    pub total_rewards_paid: u64,
    pub reward_mean: f64,
    pub reward_variance: f64,
    /// Reward variance over blocks whose window is full.
    pub steady_reward_variance: Option<f64>,
    pub revenue_variance: f64,
    pub efficiency_ratio: Option<f64>,
    pub revenue_ratio: Option<f64>,
    /// User payments + fake payments + fill penalties equal the revenue
    /// pushed into the ledger.
    pub conservation_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    pub records: Vec<BlockRecord>,
    pub summary: ChainSummary,
}

pub fn run_chain(cfg: &ChainConfig, blocks: usize, rng: &SeededRng) -> Result<ChainRun> {
    if blocks == 0 {
        return Err(Error::domain("need at least one block"));
    }
    let mut ledger = RewardLedger::new(cfg.params.reward_window())?;
    let records = (0..blocks as u64)
        .map(|h| step_block(cfg, &mut ledger, h, rng))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, &records)?;
    Ok(ChainRun { records, summary })
}

pub fn summarize(cfg: &ChainConfig, records: &[BlockRecord]) -> Result<ChainSummary> {
    let window = cfg.params.reward_window();
    let mut per_miner = vec![0u64; cfg.miners];
    let (mut revenue, mut users, mut fakes, mut penalty, mut paid) = (
        FeeAmount::ZERO,
        FeeAmount::ZERO,
        FeeAmount::ZERO,
        FeeAmount::ZERO,
        FeeAmount::ZERO,
    );
    let mut conservation_ok = true;
    for r in records {
        revenue = revenue.checked_add(r.revenue)?;
        users = users.checked_add(r.user_payments)?;
        fakes = fakes.checked_add(r.fake_payments)?;
        penalty = penalty.checked_add(r.outcome.fill_penalty)?;
        paid = paid.checked_add(r.miner_reward)?;
        let slot = per_miner
            .get_mut(r.miner_id)
            .ok_or_else(|| Error::domain(format!("miner id {} out of range", r.miner_id)))?;
        *slot = slot
            .checked_add(r.miner_reward.units())
            .ok_or(Error::Overflow)?;
        let inflow = r
            .user_payments
            .checked_add(r.fake_payments)?
            .checked_add(r.outcome.fill_penalty)?;
        conservation_ok &= inflow == r.revenue && block_revenue(&r.outcome)? == r.revenue;
    }
    let rewards: Vec<f64> = records.iter().map(|r| r.miner_reward.as_f64()).collect();
    let revenues: Vec<f64> = records.iter().map(|r| r.revenue.as_f64()).collect();
    let steady = rewards.get(window - 1..).filter(|s| !s.is_empty());
    Ok(ChainSummary {
        blocks: records.len(),
        reward_window: window,
        per_miner_reward: per_miner,
        total_revenue: revenue.units(),
        total_user_payments: users.units(),
        total_fake_payments: fakes.units(),
        total_fill_penalty: penalty.units(),
        total_rewards_paid: paid.units(),
        reward_mean: crate::stats::mean(&rewards).unwrap_or(0.0),
        reward_variance: population_variance(&rewards).unwrap_or(0.0),
        steady_reward_variance: steady.and_then(population_variance),
        revenue_variance: population_variance(&revenues).unwrap_or(0.0),
        efficiency_ratio: efficiency_ratio(records).ok(),
        revenue_ratio: revenue_ratio(records).ok(),
        conservation_ok,
    })
}

/// Realized over maximal social surplus, summed over blocks.
pub fn efficiency_ratio(records: &[BlockRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::domain("no blocks"));
    }
    let realized: f64 = records.iter().map(|r| r.realized_surplus).sum();
    let max: f64 = records.iter().map(|r| r.max_surplus).sum();
    if max <= 0.0 {
        return Err(Error::domain("no surplus available"));
    }
    Ok(realized / max)
}

/// Block revenue over pay-own-bid revenue on the top-K true values.
pub fn revenue_ratio(records: &[BlockRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::domain("no blocks"));
    }
    let revenue: f64 = records.iter().map(|r| r.revenue.as_f64()).sum();
    let oracle: f64 = records.iter().map(|r| r.oracle_max_revenue.as_f64()).sum();
    if oracle <= 0.0 {
        return Err(Error::domain("no extractable revenue"));
    }
    Ok(revenue / oracle)
}

/// `height,revenue,reward,fill_status,surplus,max_surplus`
pub fn write_records_csv<W: Write>(records: &[BlockRecord], mut out: W) -> Result<()> {
    writeln!(out, "height,revenue,reward,fill_status,surplus,max_surplus")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.height,
            r.revenue,
            r.miner_reward,
            r.outcome.fill_status.as_str(),
            r.realized_surplus,
            r.max_surplus
        )?;
    }
    Ok(())
}
