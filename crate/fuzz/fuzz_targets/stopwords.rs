#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    for word in fracsig::metrics::parse_stopwords(&text) {
        assert!(!word.is_empty() && !word.starts_with('#'));
    }
});
