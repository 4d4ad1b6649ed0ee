#![no_main]
use libfuzzer_sys::fuzz_target;

use fracsig::audio::{decode_wav, LoadMode};

fuzz_target!(|data: &[u8]| {
    for mode in [LoadMode::Strict, LoadMode::Convert] {
        if let Ok(signal) = decode_wav(data, mode) {
            assert!(signal.samples().iter().all(|s| s.is_finite()));
        }
    }
});
