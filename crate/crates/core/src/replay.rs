//! Counterfactual settlement of historical fee data.
//!
//! Every transaction in a mined block is re-priced at the smallest fee rate
//! (fee per byte) seen in that block, times its own size. Per day we report
//! what users actually paid, what they would have paid, and the variance
//! across that day's blocks of per-block fee totals under both rules.
//!
//! Input rows are `height,day,tx_id,size_bytes,fee` with fees in base units.
//! The streaming path ([`DailyStream`]) only holds one day of blocks and
//! requires rows to be grouped by day.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, FeeAmount, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub block_height: u64,
    pub day: NaiveDate,
    pub tx_id: String,
    pub size_bytes: u32,
    pub fee_paid: FeeAmount,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Row-by-row reader over the transaction CSV. A leading header row and
/// `#` comment lines are skipped.
pub struct TxReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    first: bool,
}

impl<R: Read> TxReader<R> {
    pub fn new(reader: R) -> Self {
        let rows = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader)
            .into_records();
        TxReader { rows, first: true }
    }
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<TxRecord> {
    if row.len() != 5 {
        return Err(parse_err(
            line,
            format!("expected 5 fields, found {}", row.len()),
        ));
    }
    let block_height = row[0]
        .parse::<u64>()
        .map_err(|e| parse_err(line, format!("height {:?}: {e}", &row[0])))?;
    let day = NaiveDate::parse_from_str(&row[1], "%Y-%m-%d")
        .map_err(|e| parse_err(line, format!("day {:?}: {e}", &row[1])))?;
    let tx_id = row[2].to_string();
    if tx_id.is_empty() {
        return Err(parse_err(line, "empty tx_id"));
    }
    let size_bytes = row[3]
        .parse::<u32>()
        .map_err(|e| parse_err(line, format!("size_bytes {:?}: {e}", &row[3])))?;
    if size_bytes == 0 {
        return Err(parse_err(line, "size_bytes must be at least 1"));
    }
    let fee = row[4]
        .parse::<u64>()
        .map_err(|e| parse_err(line, format!("fee {:?}: {e}", &row[4])))?;
    Ok(TxRecord {
        block_height,
        day,
        tx_id,
        size_bytes,
        fee_paid: FeeAmount::new(fee),
    })
}

impl<R: Read> Iterator for TxReader<R> {
    type Item = Result<TxRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let row = match self.rows.next()? {
                Ok(row) => row,
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Some(Err(parse_err(line, e.to_string())));
                }
            };
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let header = self.first && row.get(0) == Some("height");
            self.first = false;
            if header || (row.len() == 1 && row[0].is_empty()) {
                continue;
            }
            return Some(parse_row(&row, line));
        }
    }
}

/// Reads every record, rejecting duplicate ids within a block and heights
/// that appear under two different days.
pub fn ingest<R: Read>(reader: R) -> Result<Vec<TxRecord>> {
    let mut seen: HashSet<(u64, String)> = HashSet::new();
    let mut block_day: BTreeMap<u64, NaiveDate> = BTreeMap::new();
    let mut out = Vec::new();
    for rec in TxReader::new(reader) {
        let rec = rec?;
        check_block_day(&mut block_day, &rec)?;
        if !seen.insert((rec.block_height, rec.tx_id.clone())) {
            return Err(Error::DuplicateTx {
                height: rec.block_height,
                tx_id: rec.tx_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn ingest_path(path: impl AsRef<Path>) -> Result<Vec<TxRecord>> {
    ingest(File::open(path)?)
}

fn check_block_day(block_day: &mut BTreeMap<u64, NaiveDate>, rec: &TxRecord) -> Result<()> {
    let day = *block_day.entry(rec.block_height).or_insert(rec.day);
    if day != rec.day {
        return Err(Error::domain(format!(
            "block {} appears on both {day} and {}",
            rec.block_height, rec.day
        )));
    }
    Ok(())
}

/// `round(num / den)` with ties to even.
fn div_round_half_even(num: u128, den: u128) -> u128 {
    let (q, r) = (num / den, num % den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Index of the transaction with the lowest fee per byte, compared exactly
/// by cross-multiplication.
fn min_rate_index(block: &[TxRecord]) -> Option<usize> {
    let rate_lt = |a: &TxRecord, b: &TxRecord| {
        (a.fee_paid.units() as u128) * (b.size_bytes as u128)
            < (b.fee_paid.units() as u128) * (a.size_bytes as u128)
    };
    let mut best = 0;
    for i in 1..block.len() {
        if rate_lt(&block[i], &block[best]) {
            best = i;
        }
    }
    (!block.is_empty()).then_some(best)
}

/// Each transaction pays the block's minimum fee rate times its own size.
pub fn counterfactual_payment(block: &[TxRecord]) -> Result<Vec<(String, FeeAmount)>> {
    let low = min_rate_index(block).ok_or_else(|| Error::domain("empty block"))?;
    let (fee_min, size_min) = (
        block[low].fee_paid.units() as u128,
        block[low].size_bytes as u128,
    );
    block
        .iter()
        .map(|t| {
            let pay = div_round_half_even(fee_min * t.size_bytes as u128, size_min);
            let pay = u64::try_from(pay).map_err(|_| Error::Overflow)?;
            Ok((t.tx_id.clone(), FeeAmount::new(pay)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSettlement {
    pub height: u64,
    pub day: NaiveDate,
    pub actual: FeeAmount,
    pub counterfactual: FeeAmount,
}

pub fn settle_block(block: &[TxRecord]) -> Result<BlockSettlement> {
    let first = block.first().ok_or_else(|| Error::domain("empty block"))?;
    let actual = FeeAmount::checked_sum(block.iter().map(|t| t.fee_paid))?;
    let counterfactual =
        FeeAmount::checked_sum(counterfactual_payment(block)?.into_iter().map(|(_, p)| p))?;
    Ok(BlockSettlement {
        height: first.block_height,
        day: first.day,
        actual,
        counterfactual,
    })
}

/// Groups records by block height and settles each block, in height order.
pub fn settle_blocks(records: &[TxRecord]) -> Result<Vec<BlockSettlement>> {
    let mut blocks: BTreeMap<u64, Vec<TxRecord>> = BTreeMap::new();
    for r in records {
        blocks.entry(r.block_height).or_default().push(r.clone());
    }
    blocks.values().map(|b| settle_block(b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum VarianceRatio {
    Finite(f64),
    /// Second-price variance is zero but first-price variance is not.
    Infinite,
    /// Both variances are zero, or the day has fewer than two blocks.
    Undefined,
}

impl VarianceRatio {
    pub fn value(self) -> Option<f64> {
        match self {
            VarianceRatio::Finite(x) => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceSummary {
    pub var_first: Option<f64>,
    pub var_second: Option<f64>,
    pub ratio: VarianceRatio,
}

/// Population variance of integer totals, exact up to the final division.
fn exact_population_variance(xs: &[u64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as u128;
    let sum: u128 = xs.iter().map(|&x| x as u128).sum();
    let sum_sq: u128 = xs.iter().map(|&x| (x as u128) * (x as u128)).sum();
    let num = n * sum_sq - sum * sum;
    Some(num as f64 / (n * n) as f64)
}

/// Variances of per-block totals under first-price (actual) and
/// counterfactual settlement. Fewer than two blocks leaves them undefined.
pub fn block_totals_variance(actual: &[u64], counterfactual: &[u64]) -> VarianceSummary {
    let var_first = exact_population_variance(actual);
    let var_second = exact_population_variance(counterfactual);
    let ratio = match (var_first, var_second) {
        (Some(f), Some(s)) if s > 0.0 => VarianceRatio::Finite(f / s),
        (Some(f), Some(_)) if f > 0.0 => VarianceRatio::Infinite,
        _ => VarianceRatio::Undefined,
    };
    VarianceSummary {
        var_first,
        var_second,
        ratio,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyAggregate {
    pub day: NaiveDate,
    pub blocks: usize,
    pub actual_fees: FeeAmount,
    pub counterfactual_fees: FeeAmount,
    pub savings: FeeAmount,
    pub var_first: Option<f64>,
    pub var_second: Option<f64>,
    pub variance_ratio: VarianceRatio,
}

fn aggregate_day(day: NaiveDate, blocks: &[BlockSettlement]) -> Result<DailyAggregate> {
    let actual = FeeAmount::checked_sum(blocks.iter().map(|b| b.actual))?;
    let counterfactual = FeeAmount::checked_sum(blocks.iter().map(|b| b.counterfactual))?;
    let savings = actual.checked_sub(counterfactual)?;
    let a: Vec<u64> = blocks.iter().map(|b| b.actual.units()).collect();
    let c: Vec<u64> = blocks.iter().map(|b| b.counterfactual.units()).collect();
    let v = block_totals_variance(&a, &c);
    Ok(DailyAggregate {
        day,
        blocks: blocks.len(),
        actual_fees: actual,
        counterfactual_fees: counterfactual,
        savings,
        var_first: v.var_first,
        var_second: v.var_second,
        variance_ratio: v.ratio,
    })
}

/// Per-day totals and variances; days without blocks are absent.
pub fn daily_aggregates(settlements: &[BlockSettlement]) -> Result<Vec<DailyAggregate>> {
    let mut days: BTreeMap<NaiveDate, Vec<BlockSettlement>> = BTreeMap::new();
    for s in settlements {
        days.entry(s.day).or_default().push(*s);
    }
    days.iter().map(|(d, b)| aggregate_day(*d, b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailySavings {
    pub day: NaiveDate,
    pub actual: FeeAmount,
    pub counterfactual: FeeAmount,
    pub savings: FeeAmount,
}

pub fn daily_savings(records: &[TxRecord]) -> Result<Vec<DailySavings>> {
    Ok(daily_aggregates(&settle_blocks(records)?)?
        .into_iter()
        .map(|d| DailySavings {
            day: d.day,
            actual: d.actual_fees,
            counterfactual: d.counterfactual_fees,
            savings: d.savings,
        })
        .collect())
}

pub fn daily_variance(records: &[TxRecord]) -> Result<Vec<(NaiveDate, VarianceSummary)>> {
    Ok(daily_aggregates(&settle_blocks(records)?)?
        .into_iter()
        .map(|d| {
            (
                d.day,
                VarianceSummary {
                    var_first: d.var_first,
                    var_second: d.var_second,
                    ratio: d.variance_ratio,
                },
            )
        })
        .collect())
}

/// Further reduction when a block's revenue is spread over `B` payouts.
/// Reported next to the per-block figures; never applied to them.
pub fn b_averaging_note(var: f64, window: usize) -> f64 {
    let b = window.max(1) as f64;
    var / (b * b)
}

#[derive(Default)]
struct BlockBuf {
    txs: Vec<TxRecord>,
    ids: HashSet<String>,
}

/// Streams daily aggregates from grouped-by-day records, keeping only the
/// current day's blocks in memory.
pub struct DailyStream<I> {
    records: I,
    day: Option<NaiveDate>,
    blocks: BTreeMap<u64, BlockBuf>,
    finished_days: HashSet<NaiveDate>,
    finished_heights: HashSet<u64>,
    done: bool,
}

impl<I: Iterator<Item = Result<TxRecord>>> DailyStream<I> {
    pub fn new(records: I) -> Self {
        DailyStream {
            records,
            day: None,
            blocks: BTreeMap::new(),
            finished_days: HashSet::new(),
            finished_heights: HashSet::new(),
            done: false,
        }
    }

    fn flush(&mut self) -> Result<Option<DailyAggregate>> {
        let Some(day) = self.day.take() else {
            return Ok(None);
        };
        let blocks = std::mem::take(&mut self.blocks);
        let settled = blocks
            .into_iter()
            .map(|(h, b)| {
                self.finished_heights.insert(h);
                settle_block(&b.txs)
            })
            .collect::<Result<Vec<_>>>()?;
        self.finished_days.insert(day);
        aggregate_day(day, &settled).map(Some)
    }

    fn accept(&mut self, rec: TxRecord) -> Result<()> {
        if self.finished_days.contains(&rec.day) {
            return Err(Error::domain(format!(
                "rows for {} are not contiguous",
                rec.day
            )));
        }
        if self.finished_heights.contains(&rec.block_height) {
            return Err(Error::domain(format!(
                "block {} appears under more than one day",
                rec.block_height
            )));
        }
        let buf = self.blocks.entry(rec.block_height).or_default();
        if !buf.ids.insert(rec.tx_id.clone()) {
            return Err(Error::DuplicateTx {
                height: rec.block_height,
                tx_id: rec.tx_id,
            });
        }
        buf.txs.push(rec);
        Ok(())
    }
}

impl<I: Iterator<Item = Result<TxRecord>>> Iterator for DailyStream<I> {
    type Item = Result<DailyAggregate>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.records.next() {
                None => {
                    self.done = true;
                    return self.flush().transpose();
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Some(Ok(rec)) => {
                    let out = if self.day.is_some_and(|d| d != rec.day) {
                        match self.flush() {
                            Ok(agg) => agg,
                            Err(e) => {
                                self.done = true;
                                return Some(Err(e));
                            }
                        }
                    } else {
                        None
                    };
                    self.day = Some(rec.day);
                    if let Err(e) = self.accept(rec) {
                        self.done = true;
                        return Some(Err(e));
                    }
                    if out.is_some() {
                        return out.map(Ok);
                    }
                }
            }
        }
    }
}

/// Day -> price of one coin in USD, and how many base units make a coin.
#[derive(Debug, Clone, PartialEq)]
pub struct UsdConversion {
    pub prices: BTreeMap<NaiveDate, f64>,
    pub units_per_coin: f64,
}

impl UsdConversion {
    /// Reads `day,usd_per_coin` rows.
    pub fn from_reader<R: Read>(reader: R, units_per_coin: f64) -> Result<Self> {
        if !(units_per_coin.is_finite() && units_per_coin > 0.0) {
            return Err(Error::param("units per coin must be positive"));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut prices = BTreeMap::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if i == 0 && row.get(0) == Some("day") {
                continue;
            }
            if row.len() != 2 {
                return Err(parse_err(
                    line,
                    format!("expected 2 fields, found {}", row.len()),
                ));
            }
            let day = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
                .map_err(|e| parse_err(line, format!("day {:?}: {e}", &row[0])))?;
            let price: f64 = row[1]
                .parse()
                .map_err(|e| parse_err(line, format!("price {:?}: {e}", &row[1])))?;
            if !(price.is_finite() && price >= 0.0) {
                return Err(parse_err(line, "price must be finite and non-negative"));
            }
            prices.insert(day, price);
        }
        Ok(UsdConversion {
            prices,
            units_per_coin,
        })
    }

    pub fn to_usd(&self, day: NaiveDate, amount: FeeAmount) -> Option<f64> {
        self.prices
            .get(&day)
            .map(|p| amount.as_f64() * p / self.units_per_coin)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const DAILY_HEADER: &str = "day,actual,counterfactual,savings,var_first,var_second,ratio";

/// Writes the daily CSV; USD columns are appended when prices are given.
pub fn write_daily_csv<W: Write>(
    days: &[DailyAggregate],
    usd: Option<&UsdConversion>,
    mut out: W,
) -> Result<()> {
    write!(out, "{DAILY_HEADER}")?;
    if usd.is_some() {
        write!(out, ",actual_usd,counterfactual_usd,savings_usd")?;
    }
    writeln!(out)?;
    for d in days {
        let ratio = match d.variance_ratio {
            VarianceRatio::Finite(x) => x.to_string(),
            VarianceRatio::Infinite => "inf".to_string(),
            VarianceRatio::Undefined => String::new(),
        };
        write!(
            out,
            "{},{},{},{},{},{},{}",
            d.day,
            d.actual_fees,
            d.counterfactual_fees,
            d.savings,
            opt(d.var_first),
            opt(d.var_second),
            ratio
        )?;
        if let Some(u) = usd {
            write!(
                out,
                ",{},{},{}",
                opt(u.to_usd(d.day, d.actual_fees)),
                opt(u.to_usd(d.day, d.counterfactual_fees)),
                opt(u.to_usd(d.day, d.savings))
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn rec(h: u64, d: &str, id: &str, size: u32, fee: u64) -> TxRecord {
        TxRecord {
            block_height: h,
            day: day(d),
            tx_id: id.into(),
            size_bytes: size,
            fee_paid: FeeAmount::new(fee),
        }
    }

    #[test]
    fn ingest_two_rows() {
        let csv =
            "height,day,tx_id,size_bytes,fee\n1,2017-12-01,a,300,600\n1,2017-12-01,b,200,1000\n";
        let recs = ingest(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(settle_blocks(&recs).unwrap().len(), 1);
        assert_eq!(recs[1], rec(1, "2017-12-01", "b", 200, 1000));
    }

    #[test]
    fn ingest_rejects_zero_size_with_line() {
        let csv =
            "height,day,tx_id,size_bytes,fee\n1,2017-12-01,a,300,600\n1,2017-12-01,b,0,1000\n";
        match ingest(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_empty_and_malformed() {
        assert!(ingest("".as_bytes()).unwrap().is_empty());
        assert!(ingest("height,day,tx_id,size_bytes,fee\n".as_bytes())
            .unwrap()
            .is_empty());
        assert!(matches!(
            ingest("1,2017-12-01,a,300\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ingest("1,2017-13-01,a,3,1\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            ingest("1,2017-12-01,a,3,-1\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn ingest_rejects_duplicates_and_split_blocks() {
        let dup = "1,2017-12-01,a,3,1\n1,2017-12-01,a,4,1\n";
        assert!(matches!(
            ingest(dup.as_bytes()),
            Err(Error::DuplicateTx { height: 1, .. })
        ));
        // same id in another block is fine
        assert!(ingest("1,2017-12-01,a,3,1\n2,2017-12-01,a,4,1\n".as_bytes()).is_ok());
        assert!(ingest("1,2017-12-01,a,3,1\n1,2017-12-02,b,4,1\n".as_bytes()).is_err());
    }

    #[test]
    fn counterfactual_example() {
        let block = [
            rec(1, "2017-12-01", "A", 300, 600),
            rec(1, "2017-12-01", "B", 200, 1000),
        ];
        let pays = counterfactual_payment(&block).unwrap();
        assert_eq!(
            pays,
            vec![
                ("A".into(), FeeAmount::new(600)),
                ("B".into(), FeeAmount::new(400))
            ]
        );
        let s = settle_block(&block).unwrap();
        assert_eq!(s.actual.units() - s.counterfactual.units(), 600);
    }

    #[test]
    fn counterfactual_edge_cases() {
        let single = [rec(1, "2017-12-01", "A", 250, 777)];
        assert_eq!(
            counterfactual_payment(&single).unwrap()[0].1,
            FeeAmount::new(777)
        );
        let equal = [
            rec(1, "2017-12-01", "A", 100, 300),
            rec(1, "2017-12-01", "B", 50, 150),
        ];
        let pays: Vec<u64> = counterfactual_payment(&equal)
            .unwrap()
            .iter()
            .map(|p| p.1.units())
            .collect();
        assert_eq!(pays, vec![300, 150]);
        assert!(matches!(counterfactual_payment(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn counterfactual_rounds_half_to_even() {
        // rate 1/2 per byte: sizes 3 -> 1.5 -> 2, 5 -> 2.5 -> 2, 7 -> 3.5 -> 4
        let block = [
            rec(1, "2017-12-01", "m", 2, 1),
            rec(1, "2017-12-01", "a", 3, 9),
            rec(1, "2017-12-01", "b", 5, 9),
            rec(1, "2017-12-01", "c", 7, 9),
        ];
        let pays: Vec<u64> = counterfactual_payment(&block)
            .unwrap()
            .iter()
            .map(|p| p.1.units())
            .collect();
        assert_eq!(pays, vec![1, 2, 2, 4]);
        assert_eq!(div_round_half_even(5, 2), 2);
        assert_eq!(div_round_half_even(7, 2), 4);
        assert_eq!(div_round_half_even(8, 3), 3);
    }

    #[test]
    fn daily_savings_sums_blocks() {
        let recs = vec![
            rec(100, "2017-12-01", "A", 300, 600),
            rec(100, "2017-12-01", "B", 200, 1000),
            rec(101, "2017-12-01", "C", 250, 500),
        ];
        let days = daily_savings(&recs).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].savings, FeeAmount::new(600));
        assert_eq!(days[0].actual, FeeAmount::new(2100));
    }

    #[test]
    fn variance_examples() {
        let v = block_totals_variance(&[10, 20], &[12, 12]);
        assert_eq!(v.var_first, Some(25.0));
        assert_eq!(v.var_second, Some(0.0));
        assert_eq!(v.ratio, VarianceRatio::Infinite);

        let v = block_totals_variance(&[7, 7, 7], &[5, 5, 5]);
        assert_eq!((v.var_first, v.var_second), (Some(0.0), Some(0.0)));
        assert_eq!(v.ratio, VarianceRatio::Undefined);

        let v = block_totals_variance(&[10], &[10]);
        assert_eq!(
            (v.var_first, v.var_second, v.ratio),
            (None, None, VarianceRatio::Undefined)
        );
    }

    #[test]
    fn averaging_note() {
        assert_eq!(b_averaging_note(100.0, 10), 1.0);
        assert_eq!(b_averaging_note(100.0, 1), 100.0);
    }

    #[test]
    fn stream_matches_batch_and_rejects_revisits() {
        let csv = "1,2017-12-01,a,300,600\n1,2017-12-01,b,200,1000\n2,2017-12-01,c,10,50\n3,2017-12-02,d,10,10\n";
        let streamed: Vec<_> = DailyStream::new(TxReader::new(csv.as_bytes()))
            .collect::<Result<_>>()
            .unwrap();
        let batch =
            daily_aggregates(&settle_blocks(&ingest(csv.as_bytes()).unwrap()).unwrap()).unwrap();
        assert_eq!(streamed, batch);

        let revisit = "1,2017-12-01,a,3,6\n2,2017-12-02,b,3,6\n3,2017-12-01,c,3,6\n";
        let r: Result<Vec<_>> = DailyStream::new(TxReader::new(revisit.as_bytes())).collect();
        assert!(r.is_err());
    }

    #[test]
    fn usd_columns() {
        let prices =
            UsdConversion::from_reader("day,usd_per_coin\n2017-12-01,10000\n".as_bytes(), 1e8)
                .unwrap();
        let recs = vec![
            rec(1, "2017-12-01", "A", 300, 600),
            rec(1, "2017-12-01", "B", 200, 1000),
        ];
        let days = daily_aggregates(&settle_blocks(&recs).unwrap()).unwrap();
        let mut out = Vec::new();
        write_daily_csv(&days, Some(&prices), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert!(lines
            .next()
            .unwrap()
            .ends_with(",actual_usd,counterfactual_usd,savings_usd"));
        assert_eq!(
            lines.next().unwrap(),
            "2017-12-01,1600,1000,600,,,,0.16,0.1,0.06"
        );
    }
}
