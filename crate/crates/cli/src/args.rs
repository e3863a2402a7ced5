//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use feemarket_core::chain::MinerPolicy;
use feemarket_core::distributions::{fit_power_law, ValueDistribution};
use feemarket_core::manipulation::RevenueModel;
use feemarket_core::mech::PricingRule;
use feemarket_core::strategy::BidStrategy;

#[derive(Debug, Parser)]
#[command(
    name = "feemarket",
    version,
    about = "Transaction fee market simulator and replay"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "FEEMARKET_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Miner gain from fake-transaction manipulation over grids of miners and window lengths.
    GainSweep(GainSweepArgs),
    /// Expected gap between the (K-1)-th and K-th highest values as the user count grows.
    StrategicGain(StrategicGainArgs),
    /// Multi-block chain simulation with the reward ledger.
    Chain(ChainArgs),
    /// Replay historical blocks under the pay-minimum-included rule.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistKind {
    Uniform,
    Exponential,
    PowerLaw,
}

/// Parameters of the value distribution; only those of the chosen kind apply.
#[derive(Debug, Clone, Args)]
pub struct DistParams {
    /// Uniform lower bound.
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    /// Uniform upper bound.
    #[arg(long, default_value_t = 1.0)]
    pub hi: f64,
    /// Exponential rate.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Power-law median (fitted together with --mean).
    #[arg(long, default_value_t = 2.0)]
    pub median: f64,
    /// Power-law mean.
    #[arg(long, default_value_t = 10.0)]
    pub mean: f64,
    /// Optional upper truncation.
    #[arg(long)]
    pub truncate_at: Option<f64>,
}

impl DistParams {
    pub fn build(&self, kind: DistKind) -> feemarket_core::Result<ValueDistribution> {
        let d = match kind {
            DistKind::Uniform => ValueDistribution::uniform(self.lo, self.hi)?,
            DistKind::Exponential => ValueDistribution::exponential(self.rate)?,
            DistKind::PowerLaw => fit_power_law(self.median, self.mean)?,
        };
        match self.truncate_at {
            Some(t) => d.truncated(t),
            None => Ok(d),
        }
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// `truthful`, `shade:<theta>` or `bne:<n>`.
fn parse_strategy(s: &str) -> Result<BidStrategy, String> {
    let strategy = match s.split_once(':') {
        None if s == "truthful" => BidStrategy::Truthful,
        Some(("shade", t)) => BidStrategy::FixedShade {
            theta: t.parse().map_err(|e| format!("shade: {e}"))?,
        },
        Some(("bne", n)) => BidStrategy::FirstPriceSingleItemBne {
            n: n.parse().map_err(|e| format!("bne: {e}"))?,
        },
        _ => {
            return Err(format!(
                "unknown strategy {s:?}; use truthful, shade:<theta> or bne:<n>"
            ))
        }
    };
    strategy.validate().map_err(|e| e.to_string())?;
    Ok(strategy)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RevenueModelArg {
    Literal,
    UserRevenue,
    FullRevenue,
}

impl From<RevenueModelArg> for RevenueModel {
    fn from(m: RevenueModelArg) -> Self {
        match m {
            RevenueModelArg::Literal => RevenueModel::Literal,
            RevenueModelArg::UserRevenue => RevenueModel::UserRevenue,
            RevenueModelArg::FullRevenue => RevenueModel::FullRevenue,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PricingArg {
    Gfp,
    Gsp,
    Proposed,
}

impl From<PricingArg> for PricingRule {
    fn from(p: PricingArg) -> Self {
        match p {
            PricingArg::Gfp => PricingRule::Gfp,
            PricingArg::Gsp => PricingRule::GspKPlus1,
            PricingArg::Proposed => PricingRule::Proposed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Honest,
    Manipulator,
}

impl From<PolicyArg> for MinerPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Honest => MinerPolicy::Honest,
            PolicyArg::Manipulator => MinerPolicy::OptimalManipulator,
        }
    }
}

#[derive(Debug, Args)]
pub struct GainSweepArgs {
    /// Priced slots per block.
    #[arg(long, default_value_t = 200, value_parser = parse_positive)]
    pub k: usize,
    /// Pending transactions per trial.
    #[arg(long, default_value_t = 400)]
    pub mempool: usize,
    #[arg(long, default_value_t = 1000, value_parser = parse_positive)]
    pub trials: usize,
    /// Comma-separated miner counts.
    #[arg(long, default_value = "1,10,100,1000", value_delimiter = ',')]
    pub miners: Vec<usize>,
    /// Comma-separated reward window lengths.
    #[arg(long, default_value = "1,10,50,100", value_delimiter = ',')]
    pub window: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DistKind::PowerLaw)]
    pub dist: DistKind,
    #[command(flatten)]
    pub params: DistParams,
    #[arg(long, value_enum, default_value_t = RevenueModelArg::FullRevenue)]
    pub revenue_model: RevenueModelArg,
}

#[derive(Debug, Args)]
pub struct StrategicGainArgs {
    #[arg(long, value_enum, default_value_t = DistKind::Uniform)]
    pub dist: DistKind,
    #[command(flatten)]
    pub params: DistParams,
    /// Comma-separated user counts A; each must exceed K.
    #[arg(long = "a", default_value = "50,100,200,400", value_delimiter = ',')]
    pub a: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 100_000, value_parser = parse_positive)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Potential users; each is active in a block with probability --arrival-prob.
    #[arg(long, default_value_t = 400)]
    pub users: usize,
    #[arg(long, default_value_t = 0.5)]
    pub arrival_prob: f64,
    /// Exactly this many active users per block instead of binomial arrivals.
    #[arg(long)]
    pub active: Option<usize>,
    #[arg(long, value_enum, default_value_t = DistKind::PowerLaw)]
    pub dist: DistKind,
    #[command(flatten)]
    pub params: DistParams,
    /// truthful, shade:<theta> or bne:<n>.
    #[arg(long, default_value = "truthful", value_parser = parse_strategy)]
    pub strategy: BidStrategy,
    #[arg(long, default_value_t = 25, value_parser = parse_positive)]
    pub k: usize,
    /// Block capacity; defaults to K.
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Comma-separated reward windows B; one run per value, same seed.
    #[arg(long, default_value = "1,50", value_delimiter = ',')]
    pub window: Vec<usize>,
    /// Minimum fee in base units.
    #[arg(long, default_value_t = 0)]
    pub min_fee: u64,
    #[arg(long, value_enum, default_value_t = PricingArg::Proposed)]
    pub pricing: PricingArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Honest)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 10, value_parser = parse_positive)]
    pub miners: usize,
    #[arg(long, default_value_t = 1000, value_parser = parse_positive)]
    pub blocks: usize,
    /// Base units per unit of value.
    #[arg(long, default_value_t = 1e4)]
    pub scale: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Transactions CSV: height,day,tx_id,size_bytes,fee.
    pub input: PathBuf,
    /// Optional day,usd_per_coin CSV.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Base units per coin for the USD columns.
    #[arg(long, default_value_t = 1e8)]
    pub units_per_coin: f64,
}
