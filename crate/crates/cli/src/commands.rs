//! Subcommand implementations.

use std::fs::File;
use std::path::Path;

use feemarket_core::chain::MinerPolicy;
use feemarket_core::chain::{
    run_chain, write_records_csv, ChainConfig, ChainSummary, PopulationConfig,
};
use feemarket_core::distributions::{
    gap_closed_forms, matching_closed_forms, order_stat_gap_mc, SeededRng, ValueDistribution,
};
use feemarket_core::manipulation::{gain_sweep, RevenueModel, SweepRow};
use feemarket_core::mech::{PricingRule, ProtocolParams};
use feemarket_core::replay::{
    write_daily_csv, DailyAggregate, DailyStream, TxReader, UsdConversion,
};
use feemarket_core::strategy::BidStrategy;
use feemarket_core::{FeeAmount, ValueScale};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{ChainArgs, Command, GainSweepArgs, ReplayArgs, StrategicGainArgs};
use crate::output::{header, Failure, OutDir};
use crate::svg::{line_chart, Chart, Series};

pub fn dispatch(command: Command, out: &Path) -> Result<(), Failure> {
    match command {
        Command::GainSweep(a) => cmd_gain_sweep(&a, out),
        Command::StrategicGain(a) => cmd_strategic_gain(&a, out),
        Command::Chain(a) => cmd_chain(&a, out),
        Command::Replay(a) => cmd_replay(&a, out),
    }
}

#[derive(Serialize)]
struct GainSweepConfig<'a> {
    command: &'static str,
    k: usize,
    mempool: usize,
    trials: usize,
    miners: &'a [usize],
    window: &'a [usize],
    distribution: &'a ValueDistribution,
    revenue_model: RevenueModel,
}

fn cmd_gain_sweep(a: &GainSweepArgs, out: &Path) -> Result<(), Failure> {
    if a.miners.is_empty() || a.window.is_empty() {
        return Err(Failure::Usage(
            "--miners and --window need at least one value".into(),
        ));
    }
    if a.miners.contains(&0) || a.window.contains(&0) {
        return Err(Failure::Usage(
            "miner counts and windows must be at least 1".into(),
        ));
    }
    let dist = a.params.build(a.dist).map_err(Failure::from_sim)?;
    let cfg = GainSweepConfig {
        command: "gain-sweep",
        k: a.k,
        mempool: a.mempool,
        trials: a.trials,
        miners: &a.miners,
        window: &a.window,
        distribution: &dist,
        revenue_model: a.revenue_model.into(),
    };
    let head = header(Some(a.seed), &cfg)?;
    let rows = gain_sweep(
        &dist,
        a.mempool,
        a.k,
        &a.miners,
        &a.window,
        a.trials,
        cfg.revenue_model,
        &SeededRng::new(a.seed),
    )
    .map_err(Failure::from_sim)?;

    let dir = OutDir::create(out)?;
    dir.write("gain_sweep.csv", gain_sweep_csv(&head, &rows).as_bytes())?;
    let by_window: Vec<Series> = a
        .window
        .iter()
        .map(|&b| Series {
            name: format!("B={b}"),
            points: rows
                .iter()
                .filter(|r| r.window == b)
                .map(|r| (r.miners as f64, r.mean_gain))
                .collect(),
        })
        .collect();
    let by_miners: Vec<Series> = a
        .miners
        .iter()
        .map(|&m| Series {
            name: format!("M={m}"),
            points: rows
                .iter()
                .filter(|r| r.miners == m)
                .map(|r| (r.window as f64, r.mean_gain))
                .collect(),
        })
        .collect();
    let chart = Chart {
        title: "Manipulation gain vs number of miners",
        x_label: "miners M (log scale)",
        y_label: "mean gain",
        log_x: true,
        header: &head,
    };
    dir.write(
        "gain_vs_miners.svg",
        line_chart(&chart, &by_window).as_bytes(),
    )?;
    let chart = Chart {
        title: "Manipulation gain vs reward window",
        x_label: "window B",
        y_label: "mean gain",
        log_x: false,
        header: &head,
    };
    dir.write(
        "gain_vs_window.svg",
        line_chart(&chart, &by_miners).as_bytes(),
    )?;
    for r in &rows {
        println!(
            "M={} B={} mean_gain={} se={}",
            r.miners, r.window, r.mean_gain, r.std_error
        );
    }
    Ok(())
}

fn gain_sweep_csv(head: &str, rows: &[SweepRow]) -> String {
    let mut s =
        format!("{head}\nminers,window,mean_gain,std_error,mean_block_revenue,trials,seed\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.miners, r.window, r.mean_gain, r.std_error, r.mean_block_revenue, r.trials, r.seed
        ));
    }
    s
}

#[derive(Serialize)]
struct StrategicGainConfig<'a> {
    command: &'static str,
    distribution: &'a ValueDistribution,
    a: &'a [usize],
    k: usize,
    trials: usize,
}

const CLOSED_FORM_COLUMNS: [&str; 4] = [
    "uniform_spacing",
    "uniform_one_over_a",
    "exp_spacings",
    "exp_a_minus_k_plus_1",
];

fn cmd_strategic_gain(a: &StrategicGainArgs, out: &Path) -> Result<(), Failure> {
    if a.a.is_empty() {
        return Err(Failure::Usage("--a needs at least one user count".into()));
    }
    if a.k < 2 {
        return Err(Failure::Usage("--k must be at least 2".into()));
    }
    let bad: Vec<String> =
        a.a.iter()
            .filter(|&&n| n <= a.k)
            .map(|n| n.to_string())
            .collect();
    if !bad.is_empty() {
        return Err(Failure::Usage(format!(
            "every A must exceed K={}; rejected: {}",
            a.k,
            bad.join(",")
        )));
    }
    let dist = a.params.build(a.dist).map_err(Failure::from_sim)?;
    let cfg = StrategicGainConfig {
        command: "strategic-gain",
        distribution: &dist,
        a: &a.a,
        k: a.k,
        trials: a.trials,
    };
    let head = header(Some(a.seed), &cfg)?;
    let root = SeededRng::new(a.seed);

    let mut csv = format!(
        "{head}\na,k,trials,mean_gap,std_error,{},matches\n",
        CLOSED_FORM_COLUMNS.join(",")
    );
    let mut mc_points = Vec::new();
    let mut overlays: Vec<Series> = Vec::new();
    for &n in &a.a {
        let est = order_stat_gap_mc(&dist, n, a.k, a.trials, &root.derive(n as u64))
            .map_err(Failure::from_sim)?;
        let forms = gap_closed_forms(&dist, n, a.k);
        let cols: Vec<String> = CLOSED_FORM_COLUMNS
            .iter()
            .map(|c| {
                forms
                    .iter()
                    .find(|f| f.name == *c)
                    .map(|f| f.value.to_string())
                    .unwrap_or_default()
            })
            .collect();
        let matches = matching_closed_forms(&est, &forms, 3.0).join(";");
        csv.push_str(&format!(
            "{n},{},{},{},{},{},{matches}\n",
            a.k,
            a.trials,
            est.mean,
            est.std_error,
            cols.join(",")
        ));
        println!(
            "A={n} mean_gap={} se={} matches=[{matches}]",
            est.mean, est.std_error
        );
        for f in &forms {
            println!("  {} = {}", f.name, f.value);
            match overlays.iter_mut().find(|s| s.name == f.name) {
                Some(s) => s.points.push((n as f64, f.value)),
                None => overlays.push(Series {
                    name: f.name.to_string(),
                    points: vec![(n as f64, f.value)],
                }),
            }
        }
        mc_points.push((n as f64, est.mean));
    }
    let mut series = vec![Series {
        name: "monte_carlo".into(),
        points: mc_points,
    }];
    series.extend(overlays);

    let dir = OutDir::create(out)?;
    dir.write("strategic_gain.csv", csv.as_bytes())?;
    let chart = Chart {
        title: "Expected gap V(K-1) - V(K) vs users",
        x_label: "users A (log scale)",
        y_label: "expected gap",
        log_x: true,
        header: &head,
    };
    dir.write("strategic_gain.svg", line_chart(&chart, &series).as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct ChainCliConfig<'a> {
    command: &'static str,
    population: &'a PopulationConfig,
    k: usize,
    capacity: usize,
    window: &'a [usize],
    min_fee: u64,
    pricing: PricingRule,
    policy: MinerPolicy,
    miners: usize,
    blocks: usize,
    scale: f64,
}

#[derive(Serialize)]
struct ChainRunSummary<'a> {
    window: usize,
    summary: &'a ChainSummary,
}

#[derive(Serialize)]
struct VarianceRow {
    window: usize,
    reward_variance: f64,
    steady_reward_variance: Option<f64>,
    revenue_variance: f64,
}

#[derive(Serialize)]
struct ChainReport<'a> {
    header: &'a str,
    all_conservation_ok: bool,
    runs: Vec<ChainRunSummary<'a>>,
    reward_variance_by_window: Vec<VarianceRow>,
}

fn ratio_text(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"))
}

fn cmd_chain(a: &ChainArgs, out: &Path) -> Result<(), Failure> {
    if a.window.is_empty() || a.window.contains(&0) {
        return Err(Failure::Usage(
            "--window needs one or more values >= 1".into(),
        ));
    }
    let dist = a.params.build(a.dist).map_err(Failure::from_sim)?;
    let strategy: BidStrategy = a.strategy;
    let population = match a.active {
        Some(n) => PopulationConfig::fixed(n, dist, strategy),
        None => PopulationConfig::new(a.users, a.arrival_prob, dist, strategy),
    }
    .map_err(Failure::from_sim)?;
    let capacity = a.capacity.unwrap_or(a.k);
    let scale = ValueScale::new(a.scale).map_err(Failure::from_sim)?;
    let cli_cfg = ChainCliConfig {
        command: "chain",
        population: &population,
        k: a.k,
        capacity,
        window: &a.window,
        min_fee: a.min_fee,
        pricing: a.pricing.into(),
        policy: a.policy.into(),
        miners: a.miners,
        blocks: a.blocks,
        scale: a.scale,
    };
    let head = header(Some(a.seed), &cli_cfg)?;

    let configs = a
        .window
        .iter()
        .map(|&b| {
            let params =
                ProtocolParams::new(a.k, capacity, b, FeeAmount::new(a.min_fee), cli_cfg.pricing)?;
            ChainConfig::new(population.clone(), params, cli_cfg.policy, a.miners, scale)
        })
        .collect::<feemarket_core::Result<Vec<_>>>()
        .map_err(Failure::from_sim)?;
    let rng = SeededRng::new(a.seed);
    let runs = configs
        .par_iter()
        .map(|cfg| run_chain(cfg, a.blocks, &rng))
        .collect::<feemarket_core::Result<Vec<_>>>()
        .map_err(Failure::from_sim)?;

    let dir = OutDir::create(out)?;
    for (b, run) in a.window.iter().zip(&runs) {
        let mut buf = format!("{head}\n").into_bytes();
        write_records_csv(&run.records, &mut buf).map_err(|e| Failure::Internal(e.to_string()))?;
        dir.write(&format!("chain_blocks_B{b}.csv"), &buf)?;
        let s = &run.summary;
        println!(
            "B={b} efficiency_ratio={} revenue_ratio={} reward_variance={} conservation={}",
            ratio_text(s.efficiency_ratio),
            ratio_text(s.revenue_ratio),
            s.reward_variance,
            if s.conservation_ok { "pass" } else { "FAIL" }
        );
    }
    let report = ChainReport {
        header: &head,
        all_conservation_ok: runs.iter().all(|r| r.summary.conservation_ok),
        runs: a
            .window
            .iter()
            .zip(&runs)
            .map(|(&window, r)| ChainRunSummary {
                window,
                summary: &r.summary,
            })
            .collect(),
        reward_variance_by_window: a
            .window
            .iter()
            .zip(&runs)
            .map(|(&window, r)| VarianceRow {
                window,
                reward_variance: r.summary.reward_variance,
                steady_reward_variance: r.summary.steady_reward_variance,
                revenue_variance: r.summary.revenue_variance,
            })
            .collect(),
    };
    let mut json =
        serde_json::to_string_pretty(&report).map_err(|e| Failure::Internal(e.to_string()))?;
    json.push('\n');
    dir.write("chain_summary.json", json.as_bytes())?;
    if !report.all_conservation_ok {
        return Err(Failure::Internal("fee conservation check failed".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct ReplayConfig {
    command: &'static str,
    input: String,
    prices: Option<String>,
    units_per_coin: f64,
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(
        || p.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn cmd_replay(a: &ReplayArgs, out: &Path) -> Result<(), Failure> {
    if !(a.units_per_coin.is_finite() && a.units_per_coin > 0.0) {
        return Err(Failure::Usage("--units-per-coin must be positive".into()));
    }
    let cfg = ReplayConfig {
        command: "replay",
        input: file_name(&a.input),
        prices: a.prices.as_deref().map(file_name),
        units_per_coin: a.units_per_coin,
    };
    let head = header(None, &cfg)?;
    let open = |p: &Path| File::open(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())));

    let usd = match &a.prices {
        Some(p) => Some(
            UsdConversion::from_reader(open(p)?, a.units_per_coin).map_err(Failure::from_data)?,
        ),
        None => None,
    };
    let days = DailyStream::new(TxReader::new(open(&a.input)?))
        .collect::<feemarket_core::Result<Vec<DailyAggregate>>>()
        .map_err(Failure::from_data)?;
    if days.is_empty() {
        return Err(Failure::Data(format!(
            "{}: no transactions",
            a.input.display()
        )));
    }

    let mut csv = format!("{head}\n").into_bytes();
    write_daily_csv(&days, usd.as_ref(), &mut csv).map_err(|e| Failure::Internal(e.to_string()))?;
    let dir = OutDir::create(out)?;
    dir.write("replay_daily.csv", &csv)?;

    let idx = |i: usize| i as f64;
    let savings = vec![
        Series {
            name: "actual".into(),
            points: days
                .iter()
                .enumerate()
                .map(|(i, d)| (idx(i), d.actual_fees.as_f64()))
                .collect(),
        },
        Series {
            name: "counterfactual".into(),
            points: days
                .iter()
                .enumerate()
                .map(|(i, d)| (idx(i), d.counterfactual_fees.as_f64()))
                .collect(),
        },
        Series {
            name: "savings".into(),
            points: days
                .iter()
                .enumerate()
                .map(|(i, d)| (idx(i), d.savings.as_f64()))
                .collect(),
        },
    ];
    let title = format!(
        "Daily fees, {} to {}",
        days[0].day,
        days[days.len() - 1].day
    );
    let chart = Chart {
        title: &title,
        x_label: "day index",
        y_label: "fees (base units)",
        log_x: false,
        header: &head,
    };
    dir.write(
        "replay_savings.svg",
        line_chart(&chart, &savings).as_bytes(),
    )?;
    let variance = vec![
        Series {
            name: "first price".into(),
            points: days
                .iter()
                .enumerate()
                .filter_map(|(i, d)| d.var_first.map(|v| (idx(i), v)))
                .collect(),
        },
        Series {
            name: "pay minimum".into(),
            points: days
                .iter()
                .enumerate()
                .filter_map(|(i, d)| d.var_second.map(|v| (idx(i), v)))
                .collect(),
        },
    ];
    let title = format!(
        "Variance of block fee totals, {} to {}",
        days[0].day,
        days[days.len() - 1].day
    );
    let chart = Chart {
        title: &title,
        x_label: "day index",
        y_label: "variance (squared base units)",
        log_x: false,
        header: &head,
    };
    dir.write(
        "replay_variance.svg",
        line_chart(&chart, &variance).as_bytes(),
    )?;

    let total_actual =
        FeeAmount::checked_sum(days.iter().map(|d| d.actual_fees)).map_err(Failure::from_data)?;
    let total_savings =
        FeeAmount::checked_sum(days.iter().map(|d| d.savings)).map_err(Failure::from_data)?;
    let ratios: Vec<f64> = days
        .iter()
        .filter_map(|d| d.variance_ratio.value())
        .filter(|r| r.is_finite())
        .collect();
    println!(
        "days={} actual={total_actual} savings={total_savings}",
        days.len()
    );
    if let Some(m) = feemarket_core::stats::mean(&ratios) {
        println!("mean_variance_ratio={m} over {} days", ratios.len());
    }
    if let Some(u) = &usd {
        let total: Option<f64> = days.iter().map(|d| u.to_usd(d.day, d.savings)).sum();
        match total {
            Some(t) => println!("savings_usd={t:.2}"),
            None => println!("savings_usd=n/a (missing prices for some days)"),
        }
    }
    Ok(())
}
