use std::fs;
use std::path::Path;

use fracsig::audio::write_wav;
use fracsig::retrieval::{
    self, decode_index, encode_index, evaluate, ingest_corpus, parse_corpus, pca_fit, CorpusItem, EvalMode,
    FeatureAssembly, FeatureKind, Ingested, PcaMode, SearchIndex,
};
use fracsig::{synth, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn gaussian_rows(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

fn item(id: &str, label: &str, tags: &[&str]) -> CorpusItem {
    CorpusItem {
        id: id.into(),
        path: format!("{id}.wav").into(),
        tags: Some(tags.iter().map(|t| t.to_string()).collect()),
        label: Some(label.into()),
    }
}

/// An index over hand-placed 10-d points (the MFD-VL width), no PCA.
fn point_index(points: &[(&str, &str, Vec<f64>)]) -> SearchIndex {
    let ingested = Ingested {
        items: points.iter().map(|(id, label, _)| item(id, label, &[label])).collect(),
        rows: points.iter().map(|(_, _, v)| v.clone()).collect(),
        failures: Vec::new(),
    };
    SearchIndex::build(
        ingested,
        FeatureAssembly::single(FeatureKind::MfdVl),
        PcaMode::Identity,
        None,
    )
    .unwrap()
}

fn pad10(head: &[f64]) -> Vec<f64> {
    let mut v = head.to_vec();
    v.resize(10, 0.0);
    v
}

#[test]
fn isotropic_cloud_keeps_every_component() {
    let rows = gaussian_rows(4000, 10, 1);
    let model = pca_fit(&rows, PcaMode::Variance(0.98)).unwrap();
    assert_eq!(model.dim_out(), 10);
    model.validate().unwrap();
}

#[test]
fn rank_one_data_needs_one_component() {
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let t = i as f64 * 0.37 - 4.0;
            vec![1.0 + 2.0 * t, -3.0 + 0.5 * t, t]
        })
        .collect();
    let model = pca_fit(&rows, PcaMode::Variance(0.99)).unwrap();
    assert_eq!(model.dim_out(), 1);
    let z = model.project(&model.mean).unwrap();
    assert!(z.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn fixed_dim_components_are_orthonormal_and_ordered() {
    let rows: Vec<Vec<f64>> = gaussian_rows(200, 3, 2)
        .into_iter()
        .map(|r| vec![3.0 * r[0], r[1] + 0.1 * r[0], 0.2 * r[2]])
        .collect();
    let model = pca_fit(&rows, PcaMode::Fixed(2)).unwrap();
    assert_eq!(model.components.len(), 2);
    for (i, a) in model.components.iter().enumerate() {
        for (j, b) in model.components.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-9);
        }
        // sign convention: the largest-magnitude coordinate is positive
        let big = a.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
        assert!(big > 0.0);
    }
    assert!(model.explained_ratio[0] >= model.explained_ratio[1]);
}

#[test]
fn full_rank_projection_is_lossless_and_contracting() {
    // rank-3 data embedded in 6 dimensions
    let basis = gaussian_rows(3, 6, 3);
    let coeffs = gaussian_rows(40, 3, 4);
    let rows: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| {
            (0..6)
                .map(|d| (0..3).map(|k| c[k] * basis[k][d]).sum::<f64>() + 5.0)
                .collect()
        })
        .collect();
    let model = pca_fit(&rows, PcaMode::Fixed(3)).unwrap();
    for r in &rows {
        let back = model.reconstruct(&model.project(r).unwrap()).unwrap();
        for (x, y) in r.iter().zip(&back) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }
    let small = pca_fit(&rows, PcaMode::Fixed(2)).unwrap();
    let z: Vec<Vec<f64>> = rows.iter().map(|r| small.project(r).unwrap()).collect();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            assert!(dist(&z[i], &z[j]) <= dist(&rows[i], &rows[j]) + 1e-9);
        }
    }
}

#[test]
fn identical_rows_have_zero_variance() {
    let rows = vec![vec![1.0, 2.0]; 5];
    assert!(matches!(
        pca_fit(&rows, PcaMode::Variance(0.9)),
        Err(Error::ZeroVariance)
    ));
}

#[test]
fn knn_matches_hand_computed_distances() {
    let index = point_index(&[
        ("a", "x", pad10(&[0.0, 0.0])),
        ("b", "x", pad10(&[3.0, 4.0])),
        ("c", "y", pad10(&[1.0, 1.0])),
    ]);
    let hits = index.query_vector(&pad10(&[0.0, 0.0]), 3, None).unwrap();
    let got: Vec<(&str, f64)> = hits.iter().map(|h| (h.id.as_str(), h.distance)).collect();
    assert_eq!(got, vec![("a", 0.0), ("c", 2f64.sqrt()), ("b", 5.0)]);
    let from_b = index.query_id("b", 2, true).unwrap();
    assert_eq!(from_b[0].id, "c");
    assert!((from_b[0].distance - 13f64.sqrt()).abs() < 1e-15);
    assert_eq!(from_b[1].distance, 5.0);
    // equidistant neighbours come back in id order, whatever the insertion order
    let ties = point_index(&[
        ("z", "x", pad10(&[1.0, 0.0])),
        ("m", "x", pad10(&[0.0, 2.0])),
        ("y", "x", pad10(&[0.0, 1.0])),
    ]);
    let tie = ties.query_vector(&pad10(&[0.0, 0.0]), 3, None).unwrap();
    let order: Vec<&str> = tie.iter().map(|h| h.id.as_str()).collect();
    assert_eq!(order, vec!["y", "z", "m"]);
    assert!(index.query_id("zzz", 1, false).is_err());
    assert!(index.query_id("a", 3, true).is_err());
}

#[test]
fn weights_scale_their_block() {
    let sig = synth::pulse_sine(2.0, 0.5, 440.0, 1.2, 1).unwrap();
    let one = FeatureAssembly::parse("mfd-vl:1,mfcc13:1")
        .unwrap()
        .extract(&sig)
        .unwrap();
    let two = FeatureAssembly::parse("mfd-vl:1,mfcc13:2")
        .unwrap()
        .extract(&sig)
        .unwrap();
    let zero = FeatureAssembly::parse("mfd-vl:0,mfcc13:1")
        .unwrap()
        .extract(&sig)
        .unwrap();
    assert_eq!(one.len(), 23);
    assert_eq!(&one[..10], &two[..10]);
    for (a, b) in one[10..].iter().zip(&two[10..]) {
        assert_eq!(2.0 * a, *b);
    }
    assert!(zero[..10].iter().all(|v| *v == 0.0));
    assert_eq!(&zero[10..], &one[10..]);
}

fn write_corpus(dir: &Path, entries: &[(&str, &str, fracsig::Signal)]) -> Vec<CorpusItem> {
    let mut lines = String::new();
    for (id, label, sig) in entries {
        write_wav(sig, dir.join(format!("{id}.wav"))).unwrap();
        lines.push_str(&format!(
            "{{\"id\":\"{id}\",\"path\":\"{id}.wav\",\"label\":\"{label}\",\"tags\":[\"{label}\",\"field-recording\"]}}\n"
        ));
    }
    fs::write(dir.join("metadata.jsonl"), &lines).unwrap();
    retrieval::load_corpus(&dir.join("metadata.jsonl")).unwrap()
}

fn two_class_entries() -> Vec<(&'static str, &'static str, fracsig::Signal)> {
    let d = 1.2;
    vec![
        ("beat_a", "beat", synth::beat_sine(2.0, 440.0, d, 1).unwrap()),
        ("beat_b", "beat", synth::beat_sine(2.2, 450.0, d, 2).unwrap()),
        ("beat_c", "beat", synth::beat_sine(1.8, 430.0, d, 3).unwrap()),
        (
            "cricket_a",
            "cricket",
            synth::cricket2_filtered(5800.0, 3, 2.73, 30.0, d, 4).unwrap(),
        ),
        (
            "cricket_b",
            "cricket",
            synth::cricket2_filtered(5600.0, 3, 2.6, 30.0, d, 5).unwrap(),
        ),
        (
            "cricket_c",
            "cricket",
            synth::cricket2_filtered(6000.0, 3, 2.9, 30.0, d, 6).unwrap(),
        ),
    ]
}

#[test]
fn file_corpus_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut items = write_corpus(dir.path(), &two_class_entries());
    // an unreadable entry is reported, not fatal
    fs::write(dir.path().join("broken.wav"), b"not a wav file").unwrap();
    items.push(CorpusItem {
        id: "broken".into(),
        path: dir.path().join("broken.wav"),
        tags: None,
        label: Some("beat".into()),
    });
    // the same audio under a second id
    fs::copy(dir.path().join("beat_a.wav"), dir.path().join("copy.wav")).unwrap();
    items.push(CorpusItem {
        id: "beat_copy".into(),
        path: dir.path().join("copy.wav"),
        tags: Some(vec!["beat".into()]),
        label: Some("beat".into()),
    });

    let assembly = FeatureAssembly::single(FeatureKind::MfdVl);
    let ingested = ingest_corpus(&items, &assembly).unwrap();
    assert_eq!(ingested.rows.len(), 7);
    assert!(ingested.rows.iter().all(|r| r.len() == 10));
    assert_eq!(ingested.failures.len(), 1);
    assert_eq!(ingested.failures[0].id, "broken");

    let index = SearchIndex::build(ingested.clone(), assembly.clone(), PcaMode::Identity, None).unwrap();
    let hits = index.query_id("beat_a", 2, false).unwrap();
    assert_eq!(hits[0].distance, 0.0);
    assert_eq!(hits[1].distance, 0.0);
    let ids: Vec<&str> = hits.iter().map(|h| h.id.as_str()).collect();
    assert_eq!(ids, vec!["beat_a", "beat_copy"]);

    let report = evaluate(&index, EvalMode::Precision, &[1], &[]).unwrap();
    assert_eq!(report.aggregate[&1], 1.0);

    // bit-identical on a rebuild, and through a file round trip
    let again = SearchIndex::build(
        ingest_corpus(&items, &assembly).unwrap(),
        assembly,
        PcaMode::Identity,
        None,
    )
    .unwrap();
    let bytes = encode_index(&index).unwrap();
    assert_eq!(bytes, encode_index(&again).unwrap());
    let path = dir.path().join("corpus.idx");
    retrieval::save_index(&index, &path).unwrap();
    let loaded = retrieval::load_index(&path).unwrap();
    assert_eq!(loaded.vectors, index.vectors);
    for it in &index.items {
        assert_eq!(
            loaded.query_id(&it.id, 3, true).unwrap(),
            index.query_id(&it.id, 3, true).unwrap()
        );
    }
    let sig = fracsig::audio::load_wav(dir.path().join("beat_a.wav"), fracsig::audio::LoadMode::Strict).unwrap();
    assert_eq!(loaded.query_signal(&sig, 1).unwrap()[0].distance, 0.0);

    let truncated = &bytes[..bytes.len() - 9];
    assert!(matches!(decode_index(truncated), Err(Error::Checksum(_))));
}

#[test]
fn single_part_weight_does_not_change_neighbours() {
    let dir = tempfile::tempdir().unwrap();
    let items = write_corpus(dir.path(), &two_class_entries());
    let plain = FeatureAssembly::parse("mfd-vl").unwrap();
    let heavy = FeatureAssembly::parse("mfd-vl:7.5").unwrap();
    let a = SearchIndex::build(ingest_corpus(&items, &plain).unwrap(), plain, PcaMode::Identity, None).unwrap();
    let b = SearchIndex::build(ingest_corpus(&items, &heavy).unwrap(), heavy, PcaMode::Identity, None).unwrap();
    for it in &items {
        let ia: Vec<String> = a.query_id(&it.id, 5, true).unwrap().into_iter().map(|h| h.id).collect();
        let ib: Vec<String> = b.query_id(&it.id, 5, true).unwrap().into_iter().map(|h| h.id).collect();
        assert_eq!(ia, ib);
    }
}

#[test]
fn pca_fit_subset_and_variance_mode_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let items = write_corpus(dir.path(), &two_class_entries());
    let assembly = FeatureAssembly::parse("mfd-vl,mfcc13:0.1").unwrap();
    let ingested = ingest_corpus(&items, &assembly).unwrap();
    let fit: Vec<String> = vec!["beat_a".into(), "beat_b".into(), "cricket_a".into(), "cricket_b".into()];
    let index = SearchIndex::build(ingested.clone(), assembly.clone(), PcaMode::Variance(0.99), Some(&fit)).unwrap();
    assert_eq!(index.pca.dim_in(), 23);
    assert!(index.pca.dim_out() <= 3);
    index.validate().unwrap();
    let unknown: Vec<String> = vec!["nope".into()];
    assert!(SearchIndex::build(ingested, assembly, PcaMode::Fixed(2), Some(&unknown)).is_err());
}

#[test]
fn evaluation_truths() {
    let same_tags = point_index(&[
        ("a", "x", pad10(&[0.0])),
        ("b", "x", pad10(&[1.0])),
        ("c", "x", pad10(&[3.0])),
    ]);
    let si = evaluate(&same_tags, EvalMode::Si, &[1, 2], &[]).unwrap();
    assert_eq!(si.aggregate[&1], 1.0);
    assert_eq!(si.aggregate[&2], 1.0);
    assert_eq!(si.rows.len(), 6);
    assert!(si.rows.iter().all(|r| r.query_id != r.neighbor_id));

    let two_class = point_index(&[
        ("a1", "a", pad10(&[0.0, 0.1])),
        ("a2", "a", pad10(&[0.2, 0.0])),
        ("a3", "a", pad10(&[0.1, 0.2])),
        ("b1", "b", pad10(&[5.0, 5.1])),
        ("b2", "b", pad10(&[5.2, 5.0])),
        ("b3", "b", pad10(&[5.1, 5.2])),
    ]);
    let p = evaluate(&two_class, EvalMode::Precision, &[1, 2, 3], &[]).unwrap();
    assert_eq!(p.aggregate[&1], 1.0);
    assert_eq!(p.aggregate[&2], 1.0);
    assert!((p.aggregate[&3] - 2.0 / 3.0).abs() < 1e-15);
    let csv = p.rows_csv();
    assert!(csv.starts_with("query_id,rank,neighbor_id,distance,si_or_match\n"));
    assert_eq!(csv.lines().count(), 1 + 6 * 3);
    assert!(evaluate(&two_class, EvalMode::Precision, &[6], &[]).is_err());

    let single = point_index(&[("only", "a", pad10(&[0.0]))]);
    assert!(evaluate(&single, EvalMode::Si, &[1], &[]).is_err());
}

#[test]
fn corpus_metadata_validation() {
    let base = Path::new("/data");
    let ok = parse_corpus("{\"id\":\"a\",\"path\":\"x/a.wav\",\"label\":\"l\"}\n\n", base).unwrap();
    assert_eq!(ok[0].path, Path::new("/data/x/a.wav"));
    for bad in [
        "",
        "{\"id\":\"a\",\"path\":\"a.wav\"}",
        "{\"id\":\"\",\"path\":\"a.wav\",\"label\":\"l\"}",
        "{\"id\":\"a\",\"path\":\"a.wav\",\"label\":\"l\"}\n{\"id\":\"a\",\"path\":\"b.wav\",\"label\":\"l\"}",
        "not json",
    ] {
        assert!(parse_corpus(bad, base).is_err(), "{bad:?}");
    }
}
