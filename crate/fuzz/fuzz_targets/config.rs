#![no_main]

use libfuzzer_sys::fuzz_target;
use prosumer_core::config::ModelConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = ModelConfig::parse(s);
    }
});
