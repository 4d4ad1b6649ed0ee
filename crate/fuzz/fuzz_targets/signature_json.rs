#![no_main]
use libfuzzer_sys::fuzz_target;

use fracsig::signature::{deserialize_signature, serialize_signature};

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = deserialize_signature(data) {
        // Anything that loads must survive a save/load cycle unchanged.
        let bytes = serialize_signature(&record).expect("valid record serializes");
        assert_eq!(deserialize_signature(&bytes).expect("round trip"), record);
    }
});
