#![no_main]

use gfbm_core::io::{read_paths_csv, write_paths_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((grid, rows)) = read_paths_csv(data) {
        assert!(rows.iter().all(|r| r.len() == grid.len()));
        let mut out = Vec::new();
        write_paths_csv(&mut out, &grid, &rows).unwrap();
        let (g2, r2) = read_paths_csv(out.as_slice()).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(r2, rows);
    }
});
