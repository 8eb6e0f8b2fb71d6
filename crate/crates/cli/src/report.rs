//! Report writing: self-describing JSON plus diffable CSV tables.
//!
//! CSV numbers carry 12 significant digits; the JSON report holds the full
//! binary64 values, the exact configuration, its hash and the crate version.

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

/// One tabular row: ordered (column, value) pairs.
pub type Row = Vec<(String, Value)>;

#[derive(Serialize)]
pub struct Report {
    pub pipeline: String,
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub wall_clock_ms: f64,
    pub rows: Vec<serde_json::Map<String, Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
}

pub fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(format!("{v}")))
}

fn fmt_cell(v: &Value) -> String {
    match v {
        // 12 significant digits for floating-point cells.
        Value::Number(n) if n.is_f64() => format!("{:.11e}", n.as_f64().unwrap()),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut out = String::new();
    if rows.is_empty() {
        return out;
    }
    let header: Vec<&str> = rows[0].iter().map(|(k, _)| k.as_str()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|(_, v)| fmt_cell(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn rows_to_json(rows: &[Row]) -> Vec<serde_json::Map<String, Value>> {
    rows.iter()
        .map(|row| {
            let mut m = serde_json::Map::new();
            for (k, v) in row {
                m.insert(k.clone(), v.clone());
            }
            m
        })
        .collect()
}

pub fn write_report(
    out_dir: &std::path::Path,
    pipeline: &str,
    config: &ExperimentConfig,
    rows: &[Row],
    extra: Option<Value>,
    wall_clock_ms: f64,
) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let report = Report {
        pipeline: pipeline.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        config: config.clone(),
        wall_clock_ms,
        rows: rows_to_json(rows),
        extra,
    };
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    std::fs::write(out_dir.join("report.csv"), rows_to_csv(rows))?;
    Ok(())
}
