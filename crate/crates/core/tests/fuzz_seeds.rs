//! Replays the fuzz corpus through the same checks the fuzz targets make,
//! so the seeds stay meaningful on a stable toolchain.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use fracsig::audio::{decode_wav, LoadMode};
use fracsig::metrics::{default_stopwords, jaccard_si, normalize_tags, parse_stopwords};
use fracsig::retrieval::{decode_index, encode_index, parse_corpus, FeatureAssembly, PcaMode};
use fracsig::signature::{deserialize_signature, serialize_signature};
use proptest::prelude::*;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn check_wav(data: &[u8]) -> bool {
    let mut any = false;
    for mode in [LoadMode::Strict, LoadMode::Convert] {
        if let Ok(signal) = decode_wav(data, mode) {
            assert!(signal.samples().iter().all(|s| s.is_finite()));
            any = true;
        }
    }
    any
}

fn check_signature(data: &[u8]) -> bool {
    match deserialize_signature(data) {
        Ok(record) => {
            let bytes = serialize_signature(&record).expect("valid record serializes");
            assert_eq!(deserialize_signature(&bytes).expect("round trip"), record);
            true
        }
        Err(_) => false,
    }
}

fn check_index(data: &[u8]) -> bool {
    match decode_index(data) {
        Ok(index) => {
            let bytes = encode_index(&index).expect("decoded index re-encodes");
            let again = decode_index(&bytes).expect("round trip");
            assert_eq!(again.items, index.items);
            assert_eq!(again.vectors, index.vectors);
            true
        }
        Err(_) => false,
    }
}

fn check_corpus(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    match parse_corpus(text, Path::new("base")) {
        Ok(items) => {
            let ids: HashSet<_> = items.iter().map(|it| it.id.as_str()).collect();
            assert_eq!(ids.len(), items.len());
            assert!(items.iter().all(|it| it.tags.is_some() || it.label.is_some()));
            true
        }
        Err(_) => false,
    }
}

fn check_feature_spec(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    let mut parsed = false;
    if let Ok(assembly) = FeatureAssembly::parse(text) {
        let reparsed = FeatureAssembly::parse(&assembly.to_string()).expect("display form parses");
        assert_eq!(reparsed, assembly);
        parsed = true;
    }
    parsed |= text.parse::<PcaMode>().is_ok();
    parsed |= text.parse::<fracsig::synth::TestSet>().is_ok();
    parsed |= text.parse::<fracsig::synth::SynthKind>().is_ok();
    parsed
}

fn check_stopwords(data: &[u8]) -> usize {
    let words = parse_stopwords(&String::from_utf8_lossy(data));
    for word in &words {
        assert!(!word.is_empty() && !word.starts_with('#'));
    }
    words.len()
}

fn check_tags(data: &[u8]) -> usize {
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
    tags.len()
}

#[test]
fn wav_seeds() {
    for (name, data) in seeds("decode_wav") {
        let ok = check_wav(&data);
        // float PCM is a deliberate unsupported-codec error
        let expect_ok = !name.starts_with("truncated") && !name.starts_with("float");
        assert_eq!(ok, expect_ok, "{name}");
    }
}

#[test]
fn signature_seeds() {
    for (name, data) in seeds("signature_json") {
        assert_eq!(check_signature(&data), !name.starts_with("future"), "{name}");
    }
}

#[test]
fn index_seeds() {
    for (name, data) in seeds("index_file") {
        assert_eq!(check_index(&data), !name.starts_with("truncated"), "{name}");
    }
}

#[test]
fn corpus_seeds() {
    for (name, data) in seeds("corpus_metadata") {
        assert_eq!(check_corpus(&data), !name.starts_with("duplicate"), "{name}");
    }
}

#[test]
fn feature_spec_seeds() {
    for (name, data) in seeds("feature_spec") {
        assert!(check_feature_spec(&data), "{name}");
    }
}

#[test]
fn stopword_and_tag_seeds() {
    for (name, data) in seeds("stopwords") {
        assert!(check_stopwords(&data) > 0, "{name}");
    }
    for (name, data) in seeds("tags") {
        assert!(check_tags(&data) > 0, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn arbitrary_bytes_never_panic(data in prop::collection::vec(any::<u8>(), 0..512)) {
        check_wav(&data);
        check_signature(&data);
        check_index(&data);
        check_corpus(&data);
        check_feature_spec(&data);
        check_stopwords(&data);
        check_tags(&data);
    }

    #[test]
    fn mutated_seeds_never_panic(pick in 0usize..1000, pos in 0usize..4096, byte in any::<u8>(), cut in 0usize..4096) {
        let all: Vec<(String, Vec<u8>)> = ["decode_wav", "signature_json", "index_file", "corpus_metadata"]
            .iter()
            .flat_map(|t| seeds(t))
            .collect();
        let (_, seed) = &all[pick % all.len()];
        let mut data = seed.clone();
        if !data.is_empty() {
            let p = pos % data.len();
            data[p] = byte;
            data.truncate(data.len() - cut % data.len().max(1) / 2);
        }
        check_wav(&data);
        check_signature(&data);
        check_index(&data);
        check_corpus(&data);
    }

    #[test]
    fn porter_accepts_any_text(word in "\\PC{0,40}") {
        let _ = fracsig::porter::stem(&word);
    }
}
