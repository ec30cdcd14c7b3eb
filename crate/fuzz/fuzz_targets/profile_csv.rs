#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::profile::{build_buckets, parse_catalog, pareto_filter};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cat) = parse_catalog(text) else { return };
    // Whatever parses must survive the downstream table builders.
    let front = pareto_filter(&cat);
    if front.is_pareto() && !front.is_empty() {
        let _ = build_buckets(&front, 20);
    }
    let _ = parse_catalog(&cat.to_csv()).expect("own CSV reparses");
});
