#![no_main]
use libfuzzer_sys::fuzz_target;

use std::collections::HashSet;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(items) = fracsig::retrieval::parse_corpus(text, Path::new("base")) {
        let ids: HashSet<_> = items.iter().map(|it| it.id.as_str()).collect();
        assert_eq!(ids.len(), items.len());
        assert!(items.iter().all(|it| it.tags.is_some() || it.label.is_some()));
    }
});
