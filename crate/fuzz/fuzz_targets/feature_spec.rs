#![no_main]
use libfuzzer_sys::fuzz_target;

use fracsig::retrieval::{FeatureAssembly, PcaMode};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(assembly) = FeatureAssembly::parse(text) {
        let reparsed = FeatureAssembly::parse(&assembly.to_string()).expect("display form parses");
        assert_eq!(reparsed, assembly);
    }
    let _ = text.parse::<PcaMode>();
    let _ = text.parse::<fracsig::synth::TestSet>();
    let _ = text.parse::<fracsig::synth::SynthKind>();
});
