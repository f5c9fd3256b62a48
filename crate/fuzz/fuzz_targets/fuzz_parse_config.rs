#![no_main]

use libfuzzer_sys::fuzz_target;

// The config parser must never panic on arbitrary text, and any config it
// accepts must survive the canonical round trip.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = secor::config::parse_config_str(text) {
            let canonical = config.to_canonical_string();
            let reparsed = secor::config::parse_config_str(&canonical)
                .expect("canonical form must re-parse");
            assert_eq!(reparsed, config, "canonical round trip must be lossless");
        }
    }
});
