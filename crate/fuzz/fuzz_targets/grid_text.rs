#![no_main]

use gfbm_core::io::{grid_to_text, parse_grid};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = parse_grid(text) {
        assert!(grid.times().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(parse_grid(&grid_to_text(&grid)).unwrap(), grid);
    }
});
