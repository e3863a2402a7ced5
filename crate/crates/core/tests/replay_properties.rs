use chrono::NaiveDate;
use feemarket_core::replay::{
    counterfactual_payment, daily_aggregates, ingest, settle_block, settle_blocks, DailyStream,
    TxReader, TxRecord,
};
use feemarket_core::FeeAmount;
use proptest::prelude::*;

fn day(offset: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 12, 1).unwrap() + chrono::Days::new(offset)
}

fn block_strategy() -> impl Strategy<Value = Vec<(u32, u64)>> {
    prop::collection::vec((1u32..5_000, 0u64..10_000_000), 1..30)
}

fn to_block(height: u64, d: NaiveDate, txs: &[(u32, u64)]) -> Vec<TxRecord> {
    txs.iter()
        .enumerate()
        .map(|(i, &(size, fee))| TxRecord {
            block_height: height,
            day: d,
            tx_id: format!("{height}:{i}"),
            size_bytes: size,
            fee_paid: FeeAmount::new(fee),
        })
        .collect()
}

fn to_csv(records: &[TxRecord]) -> String {
    let mut s = String::from("height,day,tx_id,size_bytes,fee\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.block_height, r.day, r.tx_id, r.size_bytes, r.fee_paid
        ));
    }
    s
}

proptest! {
    #[test]
    fn nobody_pays_more_than_their_fee(txs in block_strategy()) {
        let block = to_block(1, day(0), &txs);
        let pays = counterfactual_payment(&block).unwrap();
        for (t, (id, p)) in block.iter().zip(&pays) {
            prop_assert_eq!(&t.tx_id, id);
            prop_assert!(*p <= t.fee_paid);
        }
        let s = settle_block(&block).unwrap();
        prop_assert!(s.counterfactual <= s.actual);
    }

    #[test]
    fn payment_is_minimum_rate_times_size_rounded(txs in block_strategy()) {
        let block = to_block(1, day(0), &txs);
        let (min_size, min_fee) = txs
            .iter()
            .copied()
            .min_by(|a, b| (a.1 as u128 * b.0 as u128).cmp(&(b.1 as u128 * a.0 as u128)))
            .unwrap();
        let rate = min_fee as f64 / min_size as f64;
        for ((size, _), (_, p)) in txs.iter().zip(counterfactual_payment(&block).unwrap()) {
            prop_assert!((p.as_f64() - rate * *size as f64).abs() <= 0.5 + 1e-6 * p.as_f64());
        }
    }

    #[test]
    fn streaming_matches_batch(days in prop::collection::vec(prop::collection::vec(block_strategy(), 1..4), 1..5)) {
        let mut records = Vec::new();
        let mut height = 0;
        for (d, blocks) in days.iter().enumerate() {
            for txs in blocks {
                records.extend(to_block(height, day(d as u64), txs));
                height += 1;
            }
        }
        let csv = to_csv(&records);
        let batch = daily_aggregates(&settle_blocks(&ingest(csv.as_bytes()).unwrap()).unwrap()).unwrap();
        let streamed = DailyStream::new(TxReader::new(csv.as_bytes())).collect::<Result<Vec<_>, _>>().unwrap();
        prop_assert_eq!(batch.len(), days.len());
        prop_assert_eq!(batch, streamed);
    }
}
