#![no_main]

use gfbm_core::io::parse_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_manifest(text) {
        let json = m.to_json().unwrap();
        assert_eq!(parse_manifest(&json).unwrap(), m);
    }
});
