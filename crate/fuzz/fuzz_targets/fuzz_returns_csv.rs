#![no_main]

use libfuzzer_sys::fuzz_target;
use secor::backtest::{TrimMode, TrimRule};

// The returns-CSV reader must never panic on arbitrary input, with or
// without trim rules, and anything it accepts must round-trip.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = secor::io::parse_returns_csv(text, None);

        let clamp = TrimRule::clamp_default();
        let _ = secor::io::parse_returns_csv(text, Some(&clamp));

        let drop = TrimRule {
            mode: TrimMode::Drop,
            lower: -0.8,
            upper: 4.0,
            cross_sectional_sigma_cap: Some(10.0),
        };
        if let Ok(loaded) = secor::io::parse_returns_csv(text, Some(&drop)) {
            let back = secor::io::panel_to_csv(&loaded.panel);
            // values already trimmed/validated: re-parsing must succeed
            secor::io::parse_returns_csv(&back, None).expect("round trip must parse");
        }
    }
});
