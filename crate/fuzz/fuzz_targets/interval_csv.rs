#![no_main]

use libfuzzer_sys::fuzz_target;
use prosumer_core::ingest::{aggregate_daily, parse_interval_csv, parse_timestamp, ColumnMapping};
use prosumer_core::tariff::PeriodPartition;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_timestamp(s);
    }
    let mapping = ColumnMapping::new("ts", "load", "irr");
    if let Ok(series) = parse_interval_csv(data, &mapping) {
        let partition = PeriodPartition::new(8, 22).unwrap();
        let _ = aggregate_daily(&series.samples, partition, "fuzz");
    }
});
