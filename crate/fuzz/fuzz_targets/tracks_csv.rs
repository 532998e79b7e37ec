#![no_main]

use libfuzzer_sys::fuzz_target;
use polytrack_core::tracker::{read_tracks_csv, tracks_to_csv_string};

fuzz_target!(|data: &[u8]| {
    if let Ok(tracks) = read_tracks_csv(data) {
        let s = tracks_to_csv_string(&tracks);
        assert_eq!(read_tracks_csv(s.as_bytes()).expect("round trip").len(), tracks.len());
    }
});
