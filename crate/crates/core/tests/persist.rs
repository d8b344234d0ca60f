use edge_ann::persist::{balanced_internal_count, size_report, HEADER_BYTES, MAGIC};
use edge_ann::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn data() -> VecStore {
    gen_synthetic(&DataGenSpec {
        n: 3000,
        dim: 16,
        cluster_count: 4,
        cluster_stddev: 0.15,
        seed: 21,
    })
    .unwrap()
}

fn cfg() -> BuildConfig {
    BuildConfig {
        leaf_threshold: 40,
        num_trees: 4,
        seed: 77,
        ..Default::default()
    }
}

fn digest(bytes: &[u8]) -> Vec<u8> {
    Sha256::digest(bytes).to_vec()
}

#[test]
fn file_round_trip_preserves_queries_and_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let s = data();
    let f = build_forest(&s, &cfg()).unwrap();
    let path = dir.path().join("edge.idx");
    let report = serialize(&f, &s, &path, true).unwrap();
    let on_disk = std::fs::read(&path).unwrap();
    assert_eq!(on_disk.len() as u64, report.total_bytes);

    let loaded = deserialize(&path).unwrap();
    assert_eq!(loaded.header.n, 3000);
    assert!(loaded.header.vectors_embedded());
    let store = loaded.store.as_ref().unwrap();
    assert_eq!(store, &s);
    let AnyForest::Edge(g) = &loaded.forest else {
        panic!("wrong kind");
    };
    assert_eq!(g, &f);

    let (again, _) = encode(g, store, true).unwrap();
    assert_eq!(digest(&again), digest(&on_disk));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = SearchParams::new(10, 200).unwrap();
    for _ in 0..100 {
        let q: Vec<f32> = (0..16).map(|_| rng.random::<f32>()).collect();
        assert_eq!(query(&f, &s, &q, &p).unwrap(), query(g, store, &q, &p).unwrap());
    }
}

#[test]
fn baseline_round_trip_without_vectors() {
    let s = data();
    let f = build_baseline_forest(&s, &cfg()).unwrap();
    let (bytes, report) = encode(&f, &s, false).unwrap();
    assert_eq!(report.vector_bytes, 0);
    let loaded = decode(&bytes).unwrap();
    assert!(loaded.store.is_none());
    assert_eq!(loaded.forest, AnyForest::Baseline(f));
    assert_eq!(loaded.forest.kind(), IndexKind::Baseline);
}

#[test]
fn same_seed_same_hash() {
    let s = data();
    let a = encode(&build_forest(&s, &cfg()).unwrap(), &s, true).unwrap().0;
    let b = encode(&build_forest(&s, &cfg()).unwrap(), &s, true).unwrap().0;
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn header_layout() {
    let s = data();
    let (bytes, _) = encode(&build_forest(&s, &cfg()).unwrap(), &s, false).unwrap();
    assert_eq!(&bytes[..4], &MAGIC);
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(bytes[6], 0);
    assert_eq!(u64::from_le_bytes(bytes[7..15].try_into().unwrap()), 3000);
    assert_eq!(u32::from_le_bytes(bytes[15..19].try_into().unwrap()), 16);
    assert_eq!(u32::from_le_bytes(bytes[19..23].try_into().unwrap()), 4);
    assert_eq!(u32::from_le_bytes(bytes[23..27].try_into().unwrap()), 40);
    assert_eq!(u32::from_le_bytes(bytes[27..31].try_into().unwrap()), 0);
    assert_eq!(u64::from_le_bytes(bytes[31..39].try_into().unwrap()), 77);
    assert_eq!(HEADER_BYTES, 39);
}

#[test]
fn corruption_is_rejected() {
    let s = data();
    let (bytes, _) = encode(&build_forest(&s, &cfg()).unwrap(), &s, false).unwrap();
    let body = HEADER_BYTES;
    let mut cases: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut b = bytes.clone();
    b[0] = b'X';
    cases.push(("magic", b));
    let mut b = bytes.clone();
    b[4] = 2;
    cases.push(("version", b));
    let mut b = bytes.clone();
    b[6] = 5;
    cases.push(("kind", b));
    let mut b = bytes.clone();
    b[27] = 0x80;
    cases.push(("flags", b));
    let mut b = bytes.clone();
    b.push(0);
    cases.push(("trailing byte", b));
    cases.push(("truncated", bytes[..bytes.len() - 1].to_vec()));
    // Root node tag.
    let mut b = bytes.clone();
    b[body + 4] = 9;
    cases.push(("node tag", b));
    // Root anchor id out of range.
    let mut b = bytes.clone();
    b[body + 9..body + 13].copy_from_slice(&5000u32.to_le_bytes());
    cases.push(("dangling anchor", b));
    // Root right-child skip pointing past the tree.
    let mut b = bytes.clone();
    b[body + 5..body + 9].copy_from_slice(&u32::MAX.to_le_bytes());
    cases.push(("skip", b));
    // Equal anchors.
    let mut b = bytes.clone();
    let p1: [u8; 4] = b[body + 9..body + 13].try_into().unwrap();
    b[body + 13..body + 17].copy_from_slice(&p1);
    cases.push(("same anchors", b));
    for (name, b) in cases {
        assert!(decode(&b).is_err(), "{name} accepted");
    }
    assert!(deserialize("/nonexistent/index.bin").is_err());
}

#[test]
fn predicted_size_matches_measured() {
    let s = gen_synthetic(&DataGenSpec {
        n: 10_000,
        dim: 32,
        cluster_count: 8,
        cluster_stddev: 0.1,
        seed: 2,
    })
    .unwrap();
    let c = BuildConfig {
        leaf_threshold: 50,
        num_trees: 1,
        seed: 4,
        ..Default::default()
    };
    let f = build_forest(&s, &c).unwrap();
    let r = size_report(&f, false);
    assert_eq!(r.internal_nodes, 255);
    assert_eq!(r.predicted_internal_bytes, 255 * 12);
    assert_eq!(r.internal_node_bytes, r.predicted_internal_bytes);
    for kind in [IndexKind::Edge, IndexKind::Baseline] {
        for embed in [false, true] {
            let p = predict_size(10_000, 32, 50, 1, kind, embed).unwrap();
            let measured = match kind {
                IndexKind::Edge => size_report(&f, embed).total_bytes,
                IndexKind::Baseline => {
                    size_report(&build_baseline_forest(&s, &c).unwrap(), embed).total_bytes
                }
            };
            let delta = (p.total_bytes as f64 - measured as f64).abs() / measured as f64;
            assert!(delta < 0.02, "{kind:?} embed={embed}: {delta}");
        }
    }
    assert!(predict_size(0, 1, 1, 1, IndexKind::Edge, false).is_err());
}

#[test]
fn balanced_counts() {
    assert_eq!(balanced_internal_count(50, 50), 0);
    assert_eq!(balanced_internal_count(51, 50), 1);
    assert_eq!(balanced_internal_count(10_000, 50), 255);
    assert_eq!(balanced_internal_count(20_000, 50), 511);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn decode_survives_mutation(pos in any::<prop::sample::Index>(), byte in any::<u8>(), cut in any::<prop::sample::Index>()) {
        let s = VecStore::from_rows(&[[0.0f32, 1.0], [2.0, 0.5], [1.0, 1.0], [3.0, 3.0], [0.5, 2.0]]).unwrap();
        let c = BuildConfig { leaf_threshold: 2, num_trees: 2, ..Default::default() };
        let (mut bytes, _) = encode(&build_forest(&s, &c).unwrap(), &s, true).unwrap();
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        let _ = decode(&bytes);
        let _ = decode(&bytes[..cut.index(bytes.len())]);
    }
}
