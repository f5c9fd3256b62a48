//! Returns-panel CSV ingestion.
//!
//! Format: a header row `date,<asset>,<asset>,...` followed by one row per
//! period with an ISO-8601 date and decimal simple returns (0.01 = 1%).
//! Empty cells are missing observations; assets with any missing observation
//! are excluded from the panel (with a logged count). Garbage cells, short
//! rows, duplicate or non-monotonic dates are hard errors with line numbers.

use crate::backtest::{apply_trim, TrimOutcome, TrimRule};
use crate::panel::ReturnsPanel;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot read {path:?}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("header must start with a `date` column followed by at least one asset")]
    BadHeader,
    #[error("duplicate asset column {name:?} in header")]
    DuplicateAsset { name: String },
    #[error("line {line}: cannot parse date {value:?} (expected ISO-8601, e.g. 2009-04-30)")]
    BadDate { line: usize, value: String },
    #[error("line {line}: duplicate date {date:?}")]
    DuplicateDate { line: usize, date: String },
    #[error("line {line}: dates must be strictly increasing ({prev:?} then {next:?})")]
    NonMonotonicDates {
        line: usize,
        prev: String,
        next: String,
    },
    #[error("line {line}: column {column:?}: cannot parse return {value:?}")]
    BadValue {
        line: usize,
        column: String,
        value: String,
    },
    #[error("no asset has a complete history; nothing to load")]
    NoCompleteAssets,
    #[error("need at least 2 periods, got {0}")]
    TooFewPeriods(usize),
    #[error(transparent)]
    Trim(#[from] crate::backtest::BacktestError),
}

/// A loaded panel plus everything the loader had to decide along the way.
#[derive(Debug)]
pub struct LoadedPanel {
    pub panel: ReturnsPanel,
    /// Validity mask from a drop-mode trim (all true otherwise).
    pub valid: DMatrix<bool>,
    /// Assets dropped for incomplete history, with their missing-cell counts.
    pub excluded_assets: Vec<(String, usize)>,
    pub n_clamped: usize,
    pub n_dropped: usize,
}

/// Parses a returns panel from CSV text, applying an optional trim rule.
pub fn parse_returns_csv(text: &str, trim: Option<&TrimRule>) -> Result<LoadedPanel, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(rec)) => rec,
        Some(Err(e)) => {
            return Err(CsvError::Malformed {
                line: 1,
                msg: e.to_string(),
            })
        }
        None => return Err(CsvError::BadHeader),
    };
    if header.len() < 2 || !header.get(0).map_or(false, |c| c.trim().eq_ignore_ascii_case("date"))
    {
        return Err(CsvError::BadHeader);
    }
    let asset_names: Vec<String> = (1..header.len())
        .map(|i| header.get(i).unwrap_or("").trim().to_string())
        .collect();
    if asset_names.iter().any(|a| a.is_empty()) {
        return Err(CsvError::BadHeader);
    }
    for (i, a) in asset_names.iter().enumerate() {
        if asset_names[..i].contains(a) {
            return Err(CsvError::DuplicateAsset { name: a.clone() });
        }
    }
    let n_all = asset_names.len();

    let mut dates: Vec<String> = Vec::new();
    let mut parsed_dates: Vec<chrono::NaiveDate> = Vec::new();
    // column-major storage of optional values
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); n_all];

    for (idx, rec) in records.enumerate() {
        let line = idx + 2; // 1-based, after header
        let rec = rec.map_err(|e| CsvError::Malformed {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() == 1 && rec.get(0).map_or(true, |c| c.trim().is_empty()) {
            continue; // blank line
        }
        if rec.len() != n_all + 1 {
            return Err(CsvError::Malformed {
                line,
                msg: format!("expected {} fields, got {}", n_all + 1, rec.len()),
            });
        }
        let date_str = rec.get(0).unwrap_or("").trim().to_string();
        let parsed = chrono::NaiveDate::parse_from_str(&date_str, "%Y-%m-%d").map_err(|_| {
            CsvError::BadDate {
                line,
                value: date_str.clone(),
            }
        })?;
        if let Some(last) = parsed_dates.last() {
            if *last == parsed {
                return Err(CsvError::DuplicateDate {
                    line,
                    date: date_str,
                });
            }
            if *last > parsed {
                return Err(CsvError::NonMonotonicDates {
                    line,
                    prev: dates.last().unwrap().clone(),
                    next: date_str,
                });
            }
        }
        parsed_dates.push(parsed);
        dates.push(date_str);
        for (j, cell_store) in cells.iter_mut().enumerate() {
            let raw = rec.get(j + 1).unwrap_or("").trim();
            if raw.is_empty() {
                cell_store.push(None);
            } else {
                let v: f64 = raw.parse().map_err(|_| CsvError::BadValue {
                    line,
                    column: asset_names[j].clone(),
                    value: raw.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(CsvError::BadValue {
                        line,
                        column: asset_names[j].clone(),
                        value: raw.to_string(),
                    });
                }
                cell_store.push(Some(v));
            }
        }
    }

    let t = dates.len();
    if t < 2 {
        return Err(CsvError::TooFewPeriods(t));
    }

    // complete-history filter
    let mut keep: Vec<usize> = Vec::new();
    let mut excluded_assets: Vec<(String, usize)> = Vec::new();
    for (j, col) in cells.iter().enumerate() {
        let missing = col.iter().filter(|c| c.is_none()).count();
        if missing == 0 {
            keep.push(j);
        } else {
            excluded_assets.push((asset_names[j].clone(), missing));
        }
    }
    if keep.is_empty() {
        return Err(CsvError::NoCompleteAssets);
    }

    let values = DMatrix::from_fn(keep.len(), t, |i, s| cells[keep[i]][s].unwrap());
    let assets: Vec<String> = keep.iter().map(|&j| asset_names[j].clone()).collect();
    let panel = ReturnsPanel::new(assets, dates, values).map_err(|e| CsvError::Malformed {
        line: 0,
        msg: e.to_string(),
    })?;

    let (panel, valid, n_clamped, n_dropped) = match trim {
        None => {
            let valid = DMatrix::from_element(panel.n_assets(), panel.n_periods(), true);
            (panel, valid, 0, 0)
        }
        Some(rule) => {
            let TrimOutcome {
                panel,
                valid,
                n_clamped,
                n_dropped,
            } = apply_trim(&panel, rule)?;
            (panel, valid, n_clamped, n_dropped)
        }
    };

    Ok(LoadedPanel {
        panel,
        valid,
        excluded_assets,
        n_clamped,
        n_dropped,
    })
}

/// Reads and parses a returns-panel CSV file.
pub fn load_returns_csv(
    path: &std::path::Path,
    trim: Option<&TrimRule>,
) -> Result<LoadedPanel, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_returns_csv(&text, trim)
}

/// Factor-return series as a panel in the same CSV layout (factors take the
/// place of assets), so estimated factor returns round-trip through the
/// ordinary loader.
pub fn factor_returns_to_csv(factor_returns: &DMatrix<f64>, dates: &[String]) -> String {
    assert_eq!(
        factor_returns.ncols(),
        dates.len(),
        "one date per factor-return period"
    );
    let mut out = String::from("date");
    for k in 0..factor_returns.nrows() {
        out.push_str(&format!(",F{:03}", k + 1));
    }
    out.push('\n');
    for t in 0..factor_returns.ncols() {
        out.push_str(&dates[t]);
        for k in 0..factor_returns.nrows() {
            out.push(',');
            out.push_str(&factor_returns[(k, t)].to_string());
        }
        out.push('\n');
    }
    out
}

/// Exposure matrix in the analogous layout: one row per asset, one column
/// per factor.
pub fn exposures_to_csv(exposures: &DMatrix<f64>, assets: &[String]) -> String {
    assert_eq!(exposures.nrows(), assets.len(), "one label per asset row");
    let mut out = String::from("asset");
    for k in 0..exposures.ncols() {
        out.push_str(&format!(",F{:03}", k + 1));
    }
    out.push('\n');
    for (i, asset) in assets.iter().enumerate() {
        out.push_str(asset);
        for k in 0..exposures.ncols() {
            out.push(',');
            out.push_str(&exposures[(i, k)].to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes a panel back to the same CSV format.
pub fn panel_to_csv(panel: &ReturnsPanel) -> String {
    let mut out = String::from("date");
    for a in panel.assets() {
        out.push(',');
        out.push_str(a);
    }
    out.push('\n');
    for t in 0..panel.n_periods() {
        out.push_str(&panel.dates()[t]);
        for i in 0..panel.n_assets() {
            out.push(',');
            out.push_str(&panel.values()[(i, t)].to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::TrimMode;
    use approx::assert_relative_eq;

    const BASIC: &str = "date,AAA,BBB,CCC\n\
2009-01-05,0.01,-0.02,0.003\n\
2009-01-06,0.005,0.01,-0.004\n\
2009-01-07,-0.01,0.0,0.02\n\
2009-01-08,0.02,0.015,0.001\n\
2009-01-09,0.0,-0.005,0.002\n";

    #[test]
    fn loads_complete_panel() {
        let loaded = parse_returns_csv(BASIC, None).unwrap();
        assert_eq!(loaded.panel.n_assets(), 3);
        assert_eq!(loaded.panel.n_periods(), 5);
        assert!(loaded.excluded_assets.is_empty());
        assert_relative_eq!(loaded.panel.values()[(1, 0)], -0.02);
        assert_eq!(loaded.panel.dates()[0], "2009-01-05");
    }

    #[test]
    fn incomplete_assets_are_excluded() {
        let text = "date,AAA,BBB\n2009-01-05,0.01,\n2009-01-06,0.005,0.01\n";
        let loaded = parse_returns_csv(text, None).unwrap();
        assert_eq!(loaded.panel.n_assets(), 1);
        assert_eq!(loaded.panel.assets()[0], "AAA");
        assert_eq!(loaded.excluded_assets, vec![("BBB".to_string(), 1)]);
    }

    #[test]
    fn clamp_applied_at_load() {
        let text = "date,AAA\n2009-01-05,1.2\n2009-01-06,0.01\n";
        let rule = TrimRule::clamp_default();
        let loaded = parse_returns_csv(text, Some(&rule)).unwrap();
        assert_relative_eq!(loaded.panel.values()[(0, 0)], 0.8);
        assert_eq!(loaded.n_clamped, 1);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "date,AAA,BBB\n2009-01-05,0.01,0.02\n2009-01-06,0.005\n";
        match parse_returns_csv(text, None).unwrap_err() {
            CsvError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("expected Malformed, got {other}"),
        }
        let text = "date,AAA\n2009-01-05,abc\n2009-01-06,0.0\n";
        match parse_returns_csv(text, None).unwrap_err() {
            CsvError::BadValue { line, value, .. } => {
                assert_eq!(line, 2);
                assert_eq!(value, "abc");
            }
            other => panic!("expected BadValue, got {other}"),
        }
    }

    #[test]
    fn duplicate_and_nonmonotonic_dates() {
        let dup = "date,AAA\n2009-01-05,0.01\n2009-01-05,0.02\n";
        assert!(matches!(
            parse_returns_csv(dup, None).unwrap_err(),
            CsvError::DuplicateDate { line: 3, .. }
        ));
        let back = "date,AAA\n2009-01-06,0.01\n2009-01-05,0.02\n";
        assert!(matches!(
            parse_returns_csv(back, None).unwrap_err(),
            CsvError::NonMonotonicDates { line: 3, .. }
        ));
    }

    #[test]
    fn bad_header_and_dates() {
        assert!(matches!(
            parse_returns_csv("time,AAA\n2009-01-05,0.0\n", None).unwrap_err(),
            CsvError::BadHeader
        ));
        assert!(matches!(
            parse_returns_csv("date,AAA\n01/05/2009,0.0\n2009-01-06,0.1\n", None).unwrap_err(),
            CsvError::BadDate { line: 2, .. }
        ));
        assert!(matches!(
            parse_returns_csv("date,AAA,AAA\n2009-01-05,0.0,0.1\n", None).unwrap_err(),
            CsvError::DuplicateAsset { .. }
        ));
    }

    #[test]
    fn drop_trim_produces_mask() {
        let text = "date,AAA,BBB\n2009-01-05,-0.9,0.01\n2009-01-06,0.005,0.01\n";
        let rule = TrimRule {
            mode: TrimMode::Drop,
            lower: -0.8,
            upper: 4.0,
            cross_sectional_sigma_cap: None,
        };
        let loaded = parse_returns_csv(text, Some(&rule)).unwrap();
        assert!(!loaded.valid[(0, 0)]);
        assert_eq!(loaded.n_dropped, 1);
    }

    #[test]
    fn csv_round_trip() {
        let loaded = parse_returns_csv(BASIC, None).unwrap();
        let text = panel_to_csv(&loaded.panel);
        let again = parse_returns_csv(&text, None).unwrap();
        assert_eq!(again.panel, loaded.panel);
    }

    #[test]
    fn factor_series_round_trips_through_the_panel_loader() {
        let f = DMatrix::from_row_slice(2, 3, &[0.01, -0.02, 0.005, 0.0, 0.004, -0.001]);
        let dates: Vec<String> = ["2009-01-05", "2009-01-06", "2009-01-07"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let text = factor_returns_to_csv(&f, &dates);
        let loaded = parse_returns_csv(&text, None).unwrap();
        assert_eq!(loaded.panel.assets(), &["F001".to_string(), "F002".to_string()]);
        assert_relative_eq!(loaded.panel.values()[(1, 2)], -0.001);
    }

    #[test]
    fn exposures_serialize_with_asset_labels() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.25, 2.0]);
        let assets = vec!["AAA".to_string(), "BBB".to_string()];
        let text = exposures_to_csv(&x, &assets);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "asset,F001,F002");
        assert_eq!(lines[1], "AAA,1,-0.5");
        assert_eq!(lines[2], "BBB,0.25,2");
    }
}
