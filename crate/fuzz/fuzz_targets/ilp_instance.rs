#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::oracle::{check_schedule, solve_exact, IlpInstance};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(inst) = IlpInstance::parse(text) else { return };
    if let Ok(best) = solve_exact(&inst) {
        check_schedule(&inst, &best).expect("solver output is feasible");
    }
});
