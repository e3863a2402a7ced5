use feemarket_core::chain::{run_chain, ChainConfig, ChainSummary, MinerPolicy, PopulationConfig};
use feemarket_core::distributions::{fit_power_law, SeededRng, ValueDistribution};
use feemarket_core::mech::{PricingRule, ProtocolParams};
use feemarket_core::strategy::BidStrategy;
use feemarket_core::{FeeAmount, ValueScale};

#[test]
fn distributions_round_trip_through_json() {
    for d in [
        ValueDistribution::uniform(0.0, 2.0).unwrap(),
        ValueDistribution::exponential(0.5).unwrap(),
        fit_power_law(2.0, 10.0).unwrap().truncated(1e4).unwrap(),
    ] {
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<ValueDistribution>(&json).unwrap(), d);
    }
}

#[test]
fn chain_config_and_summary_round_trip_through_json() {
    let pop = PopulationConfig::new(
        100,
        0.3,
        ValueDistribution::uniform(0.0, 1.0).unwrap(),
        BidStrategy::Truthful,
    )
    .unwrap();
    let params = ProtocolParams::new(10, 12, 5, FeeAmount::new(3), PricingRule::Proposed).unwrap();
    let cfg = ChainConfig::new(
        pop,
        params,
        MinerPolicy::OptimalManipulator,
        4,
        ValueScale::default(),
    )
    .unwrap();
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<ChainConfig>(&json).unwrap(), cfg);

    let run = run_chain(&cfg, 50, &SeededRng::new(3)).unwrap();
    let json = serde_json::to_string(&run.summary).unwrap();
    assert_eq!(
        serde_json::from_str::<ChainSummary>(&json).unwrap(),
        run.summary
    );
}
