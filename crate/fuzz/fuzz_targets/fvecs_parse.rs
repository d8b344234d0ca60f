#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = edge_ann::parse_fvecs(data) {
        // Whatever parses must re-encode to the same bytes.
        assert_eq!(store.to_fvecs_bytes(), data);
    }
});
