#![no_main]

use kpist::io::{decode_spectral, encode_spectral};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = decode_spectral(data) {
        let again =
            decode_spectral(encode_spectral(&f).as_bytes()).expect("re-encoded data decodes");
        assert_eq!(again.g, f.g);
    }
});
