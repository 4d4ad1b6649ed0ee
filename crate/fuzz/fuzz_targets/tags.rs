#![no_main]
use libfuzzer_sys::fuzz_target;

use fracsig::metrics::{default_stopwords, jaccard_si, normalize_tags};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let raw: Vec<&str> = text.split('\n').collect();
    let tags = normalize_tags(&raw, &default_stopwords());
    for t in tags.iter() {
        assert!(!t.is_empty());
        assert!(!t.contains("fieldrecord"));
    }
    if !tags.is_empty() {
        assert_eq!(jaccard_si(&tags, &tags).unwrap(), 1.0);
    }
    for word in text.split_whitespace() {
        let _ = fracsig::porter::stem(word);
    }
});
