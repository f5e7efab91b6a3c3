#![no_main]

use kpist::io::{decode_field, encode_field, Encoding};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = decode_field(data) {
        // Anything accepted must survive a re-encode in both encodings.
        for enc in [Encoding::Csv, Encoding::Binary] {
            let again = decode_field(&encode_field(&field, enc)).expect("re-encoded field decodes");
            assert_eq!(again, field);
        }
    }
});
