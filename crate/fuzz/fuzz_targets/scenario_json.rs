#![no_main]

use libfuzzer_sys::fuzz_target;
use polytrack_core::sim::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(sc) = Scenario::from_json(s) {
        // accepted scenarios must be usable: grid and frame bounds are checked on load
        let _ = sc.grid();
    }
});
