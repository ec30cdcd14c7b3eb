#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::tracegen::Trace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = Trace::parse_jsonl(text) {
        assert!(trace.queries.windows(2).all(|w| w[0].arrival_us <= w[1].arrival_us));
        let again = Trace::parse_jsonl(&trace.to_jsonl_string()).expect("own output reparses");
        assert_eq!(again, trace);
    }
});
