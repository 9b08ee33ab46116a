#![no_main]

use libfuzzer_sys::fuzz_target;
use prosumer_core::dist::{Distribution, EmpiricalDistribution};
use prosumer_core::ingest::read_dataset_csv;
use prosumer_core::tariff::PeriodPartition;

fuzz_target!(|data: &[u8]| {
    let partition = PeriodPartition::new(8, 22).unwrap();
    let Ok(ds) = read_dataset_csv(data, partition, "fuzz") else {
        return;
    };
    // what was accepted must round-trip
    let mut out = Vec::new();
    ds.write_csv(&mut out).unwrap();
    let again = read_dataset_csv(out.as_slice(), partition, "fuzz").unwrap();
    assert_eq!(again.records(), ds.records());
    if let Ok(d) = EmpiricalDistribution::ecdf(ds.h_peak()) {
        let _ = d.quantile(0.965);
    }
});
