#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::sim::{parse_faults, Fault};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(faults) = parse_faults(text) {
        for f in faults {
            let back: Fault = f.to_string().parse().expect("display reparses");
            assert_eq!(back, f);
        }
    }
});
