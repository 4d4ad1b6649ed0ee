#![no_main]
use libfuzzer_sys::fuzz_target;

use fracsig::retrieval::{decode_index, encode_index};

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = decode_index(data) {
        let bytes = encode_index(&index).expect("decoded index re-encodes");
        let again = decode_index(&bytes).expect("round trip");
        assert_eq!(again.items, index.items);
        assert_eq!(again.vectors.len(), index.vectors.len());
    }
});
