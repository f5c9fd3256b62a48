//! Runs the fuzz corpus (and cheap mutations of it) through the two parser
//! entry points under plain `cargo test`, asserting the fuzz-target
//! properties: no panics, and canonical/CSV round trips for accepted inputs.
//! The real fuzzers live in `fuzz/` and run under `cargo fuzz`.

use secor::backtest::{TrimMode, TrimRule};
use std::path::PathBuf;

fn corpus_dir(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target)
}

fn corpus_texts(target: &str) -> Vec<String> {
    let dir = corpus_dir(target);
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap_or_else(|e| panic!("read {dir:?}: {e}")) {
        let path = entry.unwrap().path();
        out.push(std::fs::read_to_string(&path).unwrap());
    }
    assert!(!out.is_empty(), "corpus {target} is empty");
    out
}

/// Deterministic byte-level mutations: truncations, splices, flips.
fn mutations(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    for cut in [1, bytes.len() / 3, bytes.len() / 2, bytes.len().saturating_sub(2)] {
        if cut > 0 && cut < bytes.len() {
            out.push(String::from_utf8_lossy(&bytes[..cut]).into_owned());
            out.push(String::from_utf8_lossy(&bytes[cut..]).into_owned());
        }
    }
    out.push(text.replace('=', ","));
    out.push(text.replace(',', "="));
    out.push(text.replace('.', ".."));
    out.push(text.replace('0', "-"));
    out.push(format!("{text}{text}"));
    out.push(text.to_uppercase());
    out.push(text.replace('\n', "\r\n"));
    out
}

#[test]
fn config_parser_never_panics_and_round_trips() {
    for text in corpus_texts("fuzz_parse_config") {
        let mut cases = vec![text.clone()];
        cases.extend(mutations(&text));
        for case in cases {
            if let Ok(config) = secor::config::parse_config_str(&case) {
                let canonical = config.to_canonical_string();
                let reparsed = secor::config::parse_config_str(&canonical)
                    .expect("canonical form must re-parse");
                assert_eq!(reparsed, config, "lossy canonical round trip for:\n{case}");
            }
        }
    }
}

#[test]
fn csv_parser_never_panics_and_round_trips() {
    let drop_rule = TrimRule {
        mode: TrimMode::Drop,
        lower: -0.8,
        upper: 4.0,
        cross_sectional_sigma_cap: Some(10.0),
    };
    for text in corpus_texts("fuzz_returns_csv") {
        let mut cases = vec![text.clone()];
        cases.extend(mutations(&text));
        for case in cases {
            let _ = secor::io::parse_returns_csv(&case, None);
            let _ = secor::io::parse_returns_csv(&case, Some(&TrimRule::clamp_default()));
            if let Ok(loaded) = secor::io::parse_returns_csv(&case, Some(&drop_rule)) {
                let back = secor::io::panel_to_csv(&loaded.panel);
                secor::io::parse_returns_csv(&back, None).expect("round trip must parse");
            }
        }
    }
}
