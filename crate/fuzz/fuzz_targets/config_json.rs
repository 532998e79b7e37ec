#![no_main]

use libfuzzer_sys::fuzz_target;
use polytrack_core::engine::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::from_json(s) {
        let _ = cfg.label();
        let back = serde_json::to_string(&cfg).expect("config serializes");
        assert_eq!(Config::from_json(&back).expect("round trip"), cfg);
    }
});
