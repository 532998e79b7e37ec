#![no_main]

use libfuzzer_sys::fuzz_target;
use polytrack_core::gaps::{derive_gap_matrix, MissRateTensor};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = MissRateTensor::from_json(s) {
        let m = derive_gap_matrix(&t, 0.5);
        assert!(m.validate().is_ok());
    }
});
