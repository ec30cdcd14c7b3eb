#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::metrics::{aggregate, parse_outcomes};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_outcomes(text) {
        let agg = aggregate(&records);
        assert_eq!(agg.hits + agg.misses + agg.drops, agg.total);
        for r in &records {
            let _ = r.tightened(1_000);
        }
    }
});
