//! Transactions, protocol parameters and block pricing.
//!
//! Allocation is shared by every pricing rule: the `k` highest bids win,
//! ties broken in favour of the higher transaction id. The rules differ only
//! in what winners pay:
//!
//! | rule                      | payment per winner                      |
//! |---------------------------|-----------------------------------------|
//! | [`PricingRule::Gfp`]      | own bid                                 |
//! | [`PricingRule::GspKPlus1`]| the (k+1)-st highest bid                |
//! | [`PricingRule::Proposed`] | the minimum included bid                |
//!
//! Under `Proposed` a block with fewer than K priced transactions either pays
//! a fill penalty or is declared underfull, in which case everyone pays the
//! protocol minimum fee.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{Error, FeeAmount, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    /// Inserted by the miner; its fee flows back into the miner's reward pool.
    Fake,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub owner: u64,
    pub bid: FeeAmount,
    size_bytes: u32,
    pub provenance: Provenance,
}

impl Transaction {
    pub fn new(
        id: u64,
        owner: u64,
        bid: FeeAmount,
        size_bytes: u32,
        provenance: Provenance,
    ) -> Result<Self> {
        if size_bytes == 0 {
            return Err(Error::param("transaction size must be at least one byte"));
        }
        Ok(Transaction {
            id: TxId(id),
            owner,
            bid,
            size_bytes,
            provenance,
        })
    }

    /// Unit-size real transaction owned by `id`.
    pub fn real(id: u64, bid: FeeAmount) -> Self {
        Transaction {
            id: TxId(id),
            owner: id,
            bid,
            size_bytes: 1,
            provenance: Provenance::Real,
        }
    }

    pub fn size_bytes(&self) -> u32 {
        self.size_bytes
    }

    pub fn is_fake(&self) -> bool {
        self.provenance == Provenance::Fake
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingRule {
    Gfp,
    GspKPlus1,
    Proposed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    k_priced_slots: usize,
    capacity: usize,
    reward_window: usize,
    min_fee: FeeAmount,
    pricing: PricingRule,
}

impl ProtocolParams {
    pub fn new(
        k_priced_slots: usize,
        capacity: usize,
        reward_window: usize,
        min_fee: FeeAmount,
        pricing: PricingRule,
    ) -> Result<Self> {
        if k_priced_slots == 0 {
            return Err(Error::param("K must be positive"));
        }
        if capacity < k_priced_slots {
            return Err(Error::param(format!(
                "capacity {capacity} is below K = {k_priced_slots}"
            )));
        }
        if reward_window == 0 {
            return Err(Error::param("reward window B must be at least 1"));
        }
        Ok(ProtocolParams {
            k_priced_slots,
            capacity,
            reward_window,
            min_fee,
            pricing,
        })
    }

    /// K priced slots, no extra capacity, B = 1, zero minimum fee.
    pub fn simple(k: usize, pricing: PricingRule) -> Result<Self> {
        Self::new(k, k, 1, FeeAmount::ZERO, pricing)
    }

    pub fn k(&self) -> usize {
        self.k_priced_slots
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reward_window(&self) -> usize {
        self.reward_window
    }

    pub fn min_fee(&self) -> FeeAmount {
        self.min_fee
    }

    pub fn pricing(&self) -> PricingRule {
        self.pricing
    }

    pub fn with_pricing(mut self, pricing: PricingRule) -> Self {
        self.pricing = pricing;
        self
    }

    pub fn with_reward_window(mut self, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::param("reward window B must be at least 1"));
        }
        self.reward_window = window;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillStatus {
    Full,
    Penalized,
    DeclaredUnderfull,
}

impl FillStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FillStatus::Full => "full",
            FillStatus::Penalized => "penalized",
            FillStatus::DeclaredUnderfull => "declared_underfull",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payment {
    pub tx: TxId,
    pub amount: FeeAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub included: Vec<Payment>,
    pub clearing_price: FeeAmount,
    /// Block revenue: included payments plus any fill penalty.
    pub miner_revenue: FeeAmount,
    pub fill_penalty: FeeAmount,
    pub fill_status: FillStatus,
    /// Capacity beyond K, included at zero payment.
    pub unpriced_extras: Vec<TxId>,
}

impl AuctionOutcome {
    fn empty() -> Self {
        AuctionOutcome {
            included: Vec::new(),
            clearing_price: FeeAmount::ZERO,
            miner_revenue: FeeAmount::ZERO,
            fill_penalty: FeeAmount::ZERO,
            fill_status: FillStatus::Full,
            unpriced_extras: Vec::new(),
        }
    }

    pub fn with_unpriced_extras(mut self, extras: impl IntoIterator<Item = TxId>) -> Self {
        self.unpriced_extras.extend(extras);
        self
    }

    pub fn payment_of(&self, tx: TxId) -> Option<FeeAmount> {
        self.included
            .iter()
            .find(|p| p.tx == tx)
            .map(|p| p.amount)
            .or_else(|| {
                self.unpriced_extras
                    .contains(&tx)
                    .then_some(FeeAmount::ZERO)
            })
    }

    pub fn is_included(&self, tx: TxId) -> bool {
        self.included.iter().any(|p| p.tx == tx) || self.unpriced_extras.contains(&tx)
    }
}

/// Descending by bid, then by id.
pub fn bid_order(a: &Transaction, b: &Transaction) -> Ordering {
    b.bid.cmp(&a.bid).then_with(|| b.id.cmp(&a.id))
}

/// Sorts a candidate list into allocation order.
pub fn sort_by_bid(txs: &mut [Transaction]) {
    txs.sort_unstable_by(bid_order);
}

/// Returns the `min(k, bids.len())` highest bids in allocation order.
pub fn allocate_top_k(bids: &[Transaction], k: usize) -> Vec<Transaction> {
    let mut all = bids.to_vec();
    let take = k.min(all.len());
    if take == 0 {
        return Vec::new();
    }
    if take < all.len() {
        all.select_nth_unstable_by(take - 1, bid_order);
        all.truncate(take);
    }
    sort_by_bid(&mut all);
    all
}

/// Every winner pays its own bid.
pub fn price_gfp(winners: &[Transaction]) -> Result<AuctionOutcome> {
    if winners.is_empty() {
        return Ok(AuctionOutcome::empty());
    }
    let included: Vec<Payment> = winners
        .iter()
        .map(|t| Payment {
            tx: t.id,
            amount: t.bid,
        })
        .collect();
    let revenue = FeeAmount::checked_sum(included.iter().map(|p| p.amount))?;
    let clearing_price = winners.iter().map(|t| t.bid).min().unwrap_or_default();
    Ok(AuctionOutcome {
        included,
        clearing_price,
        miner_revenue: revenue,
        fill_penalty: FeeAmount::ZERO,
        fill_status: FillStatus::Full,
        unpriced_extras: Vec::new(),
    })
}

/// Top `k` win and each pays the (k+1)-st highest bid.
///
/// Needs the losing bid to exist, so fewer than `k + 1` bids is an error.
pub fn price_gsp_uniform(all_bids: &[Transaction], k: usize) -> Result<AuctionOutcome> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if all_bids.len() <= k {
        return Err(Error::InsufficientBids {
            needed: k + 1,
            got: all_bids.len(),
        });
    }
    let ranked = allocate_top_k(all_bids, k + 1);
    let price = ranked[k].bid;
    let included: Vec<Payment> = ranked[..k]
        .iter()
        .map(|t| Payment {
            tx: t.id,
            amount: price,
        })
        .collect();
    Ok(AuctionOutcome {
        included,
        clearing_price: price,
        miner_revenue: price.checked_mul(k as u64)?,
        fill_penalty: FeeAmount::ZERO,
        fill_status: FillStatus::Full,
        unpriced_extras: Vec::new(),
    })
}

/// Pay-minimum-included pricing for an already selected set of priced
/// transactions.
pub fn price_proposed(
    included: &[Transaction],
    params: &ProtocolParams,
    mempool_exhausted: bool,
) -> Result<AuctionOutcome> {
    let k = params.k();
    if included.len() > k {
        return Err(Error::domain(format!(
            "{} priced transactions exceed K = {k}",
            included.len()
        )));
    }
    if let Some(low) = included.iter().find(|t| t.bid < params.min_fee()) {
        return Err(Error::BidBelowMinimum {
            bid: low.bid.units(),
            min_fee: params.min_fee().units(),
        });
    }

    let filled = included.len() == k;
    let (price, penalty, status) = if filled {
        let p = included.iter().map(|t| t.bid).min().unwrap_or_default();
        (p, FeeAmount::ZERO, FillStatus::Full)
    } else if mempool_exhausted {
        (
            params.min_fee(),
            FeeAmount::ZERO,
            FillStatus::DeclaredUnderfull,
        )
    } else {
        // An empty undeclared block has no included fee; the penalty falls
        // back to the minimum fee per missing slot.
        let p = included
            .iter()
            .map(|t| t.bid)
            .min()
            .unwrap_or(params.min_fee());
        let missing = (k - included.len()) as u64;
        (p, p.checked_mul(missing)?, FillStatus::Penalized)
    };

    let payments: Vec<Payment> = included
        .iter()
        .map(|t| Payment {
            tx: t.id,
            amount: price,
        })
        .collect();
    let paid = price.checked_mul(payments.len() as u64)?;
    Ok(AuctionOutcome {
        included: payments,
        clearing_price: price,
        miner_revenue: paid.checked_add(penalty)?,
        fill_penalty: penalty,
        fill_status: status,
        unpriced_extras: Vec::new(),
    })
}

/// Sum of included payments plus the fill penalty.
pub fn block_revenue(outcome: &AuctionOutcome) -> Result<FeeAmount> {
    let paid = FeeAmount::checked_sum(outcome.included.iter().map(|p| p.amount))?;
    paid.checked_add(outcome.fill_penalty)
}
