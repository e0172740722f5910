#![no_main]

use gfbm_core::analysis::suite::parse_checks;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(checks) = parse_checks(text) {
        assert!(!checks.is_empty());
        let names: Vec<&str> = checks.iter().map(|c| c.name()).collect();
        assert_eq!(parse_checks(&names.join(",")).unwrap(), checks);
    }
});
