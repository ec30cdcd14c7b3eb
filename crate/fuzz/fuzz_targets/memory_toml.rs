#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::profile::{memory_footprint, MemorySpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = MemorySpec::parse(text) {
        let _ = memory_footprint(&spec);
    }
});
