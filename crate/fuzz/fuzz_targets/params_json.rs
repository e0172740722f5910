#![no_main]

use gfbm_core::io::{params_to_json, parse_params_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_params_json(text) {
        // Anything accepted is in the domain and survives a round trip.
        assert!(p.hurst() > 0.0 && p.hurst() < 1.0);
        if let Ok(json) = params_to_json(&p) {
            assert_eq!(parse_params_json(&json).unwrap(), p);
        }
    }
});
