#![no_main]

use libfuzzer_sys::fuzz_target;
use servesim_core::policy::PolicyKind;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(kind) = text.parse::<PolicyKind>() {
        assert_eq!(kind.to_string().parse::<PolicyKind>().unwrap(), kind);
    }
});
