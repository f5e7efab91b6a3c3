#![no_main]

use kpist::config::{Document, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(doc) = Document::parse(text) {
        assert_eq!(
            Document::parse(&doc.to_text()).expect("printed document parses"),
            doc
        );
    }
    if let Ok(cfg) = RunConfig::parse(text) {
        assert_eq!(
            RunConfig::parse(&cfg.to_text()).expect("printed config parses"),
            cfg
        );
    }
});
