#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(index) = edge_ann::decode(data) else {
        return;
    };
    // A decoded index with vectors must be queryable and re-encode losslessly.
    if let Some(store) = &index.store {
        let q = vec![0.0f32; store.dim()];
        let params = edge_ann::SearchParams::new(1, 8).unwrap();
        let _ = index.forest.query(store, &q, &params);
        let (bytes, _) = index.forest.encode(store, true).unwrap();
        assert_eq!(bytes, data);
    }
});
