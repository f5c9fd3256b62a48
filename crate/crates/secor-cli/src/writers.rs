//! Result emission: CSV or JSON tables (one file per table, identical
//! content either way) plus a schema file documenting every column.

use crate::OutputFormat;
use secor::experiments::{ColumnData, ExperimentResult, ResultTable};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    let mut f = std::fs::File::create(&tmp).map_err(|e| format!("create {}: {e}", tmp.display()))?;
    f.write_all(bytes).map_err(|e| format!("write {}: {e}", tmp.display()))?;
    f.sync_all().map_err(|e| format!("sync {}: {e}", tmp.display()))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| format!("rename to {}: {e}", path.display()))
}

fn cell_string(data: &ColumnData, row: usize) -> String {
    match data {
        ColumnData::F64(v) => v[row].to_string(),
        ColumnData::U64(v) => v[row].to_string(),
        ColumnData::Str(v) => {
            let s = &v[row];
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
    }
}

fn table_csv(table: &ResultTable) -> String {
    let mut out = String::new();
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in 0..table.n_rows() {
        let cells: Vec<String> = table
            .columns
            .iter()
            .map(|c| cell_string(&c.data, row))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn table_json(table: &ResultTable) -> serde_json::Value {
    let mut rows = Vec::with_capacity(table.n_rows());
    for row in 0..table.n_rows() {
        let mut obj = serde_json::Map::new();
        for c in &table.columns {
            let v = match &c.data {
                ColumnData::F64(v) => serde_json::json!(v[row]),
                ColumnData::U64(v) => serde_json::json!(v[row]),
                ColumnData::Str(v) => serde_json::json!(v[row]),
            };
            obj.insert(c.name.clone(), v);
        }
        rows.push(serde_json::Value::Object(obj));
    }
    serde_json::Value::Array(rows)
}

fn table_file_name(result: &ExperimentResult, table: &ResultTable, ext: &str) -> String {
    format!("{}_{}.{ext}", result.experiment, table.name)
}

/// Writes every table as CSV; returns the written paths.
pub fn write_tables_csv(out: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>, String> {
    let mut written = Vec::new();
    for table in &result.tables {
        let path = out.join(table_file_name(result, table, "csv"));
        write_atomic(&path, table_csv(table).as_bytes())?;
        written.push(path);
    }
    written.push(write_summary(out, result)?);
    Ok(written)
}

/// Writes every table as a JSON array of row objects; same rows as CSV.
pub fn write_tables_json(out: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>, String> {
    let mut written = Vec::new();
    for table in &result.tables {
        let path = out.join(table_file_name(result, table, "json"));
        let text = serde_json::to_string_pretty(&table_json(table))
            .map_err(|e| format!("serialize {}: {e}", table.name))?;
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    written.push(write_summary(out, result)?);
    Ok(written)
}

/// The summary always ships as JSON (it is small and keyed).
fn write_summary(out: &Path, result: &ExperimentResult) -> Result<PathBuf, String> {
    let path = out.join(format!("{}_summary.json", result.experiment));
    let text = serde_json::to_string_pretty(&result.summary)
        .map_err(|e| format!("serialize summary: {e}"))?;
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use secor::experiments::Column;

    fn sample_table() -> ResultTable {
        ResultTable::new(
            "demo",
            vec![
                Column::u64("idx", "row index", vec![0, 1]),
                Column::f64("value", "a number", vec![1.5, -0.25]),
                Column::str(
                    "label",
                    "may need quoting",
                    vec!["plain".into(), "a,\"quoted\"".into()],
                ),
            ],
        )
    }

    #[test]
    fn csv_quotes_awkward_strings() {
        let text = table_csv(&sample_table());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "idx,value,label");
        assert_eq!(lines[1], "0,1.5,plain");
        assert_eq!(lines[2], "1,-0.25,\"a,\"\"quoted\"\"\"");
    }

    #[test]
    fn json_rows_mirror_csv() {
        let v = table_json(&sample_table());
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1]["value"], serde_json::json!(-0.25));
        assert_eq!(rows[1]["label"], serde_json::json!("a,\"quoted\""));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        // no temp litter left behind
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

/// Schema file documenting every emitted column.
pub fn write_schema(
    out: &Path,
    result: &ExperimentResult,
    format: OutputFormat,
    written: &[PathBuf],
) -> Result<PathBuf, String> {
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let tables: Vec<serde_json::Value> = result
        .tables
        .iter()
        .map(|t| {
            serde_json::json!({
                "name": t.name,
                "file": table_file_name(result, t, ext),
                "rows": t.n_rows(),
                "columns": t.columns.iter().map(|c| serde_json::json!({
                    "name": c.name,
                    "type": c.data.type_name(),
                    "description": c.description,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let schema = serde_json::json!({
        "experiment": result.experiment,
        "format": ext,
        "tables": tables,
        "summary_file": format!("{}_summary.json", result.experiment),
        "summary_keys": result.summary.iter().map(|s| s.key.clone()).collect::<Vec<_>>(),
        "files": written.iter().map(|p| p.file_name().unwrap().to_string_lossy().to_string()).collect::<Vec<_>>(),
    });
    let path = out.join(format!("{}.schema.json", result.experiment));
    let text =
        serde_json::to_string_pretty(&schema).map_err(|e| format!("serialize schema: {e}"))?;
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
