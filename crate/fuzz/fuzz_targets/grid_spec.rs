#![no_main]

use libfuzzer_sys::fuzz_target;
use prosumer_core::dist::DistMode;
use prosumer_core::sizing::parse_grid_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(grid) = parse_grid_spec(s) {
            assert!(!grid.is_empty());
            assert!(grid.windows(2).all(|w| w[0] < w[1]));
        }
        let _ = s.parse::<DistMode>();
    }
});
