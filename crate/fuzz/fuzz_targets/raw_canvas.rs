#![no_main]

use libfuzzer_sys::fuzz_target;
use polytrack_core::pack::decode_raw;

// input layout: u16 header length (little endian), header JSON, pixel bytes
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if n > rest.len() {
        return;
    }
    let Ok(header) = std::str::from_utf8(&rest[..n]) else { return };
    let _ = decode_raw(header, &rest[n..]);
});
