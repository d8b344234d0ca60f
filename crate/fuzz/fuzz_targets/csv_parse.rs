#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(store) = edge_ann::parse_csv(text) {
        assert!(!store.is_empty() && store.dim() > 0);
    }
});
