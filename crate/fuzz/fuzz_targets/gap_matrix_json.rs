#![no_main]

use libfuzzer_sys::fuzz_target;
use polytrack_core::gaps::GapMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = GapMatrix::from_json(s) {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                assert!(m.get((i, j)) >= 1);
            }
        }
    }
});
