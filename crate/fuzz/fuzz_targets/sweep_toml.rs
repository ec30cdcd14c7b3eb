#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::profile::Catalog;
use servesim_core::sweep::SweepSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SweepSpec::parse(text) {
        // Expanding the grid validates every cell without running any.
        let _ = spec.cells(&Catalog::synthetic_default());
    }
});
