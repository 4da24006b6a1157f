//! Report serialization and the matching readers.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every finite `f64` exactly; non-finite values become `null` in JSON and
//! `nan`/`inf` in CSV.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "isoheat-report/1";

struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Single-line JSON with fixed float formatting and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser).expect("reports serialize to memory");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Wraps a command payload with the schema version, command name and the
/// resolved configuration.
pub fn envelope(command: &str, config: &impl Serialize, payload: Value) -> Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "status": "ok",
        "config": config,
        "result": payload,
    })
}

pub fn error_body(command: &str, kind: &str, message: &str) -> Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "status": "error",
        "kind": kind,
        "message": message,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0:?}")]
    Schema(Option<String>),
    #[error("CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Parses a JSON report and checks its schema version.
pub fn read_report(text: &str) -> Result<Value, ReadError> {
    let v: Value = serde_json::from_str(text)?;
    match v.get("schema_version").and_then(Value::as_str) {
        Some(SCHEMA_VERSION) => Ok(v),
        other => Err(ReadError::Schema(other.map(str::to_string))),
    }
}

/// A numeric table with a mandatory header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format_csv(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ReadError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(ReadError::Csv {
            line: 1,
            reason: "missing header row".into(),
        })?;
        let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (no, line) in lines {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ReadError::Csv {
                    line: no + 1,
                    reason: e.to_string(),
                })?;
            if row.len() != header.len() {
                return Err(ReadError::Csv {
                    line: no + 1,
                    reason: format!("expected {} fields, got {}", header.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(CsvTable { header, rows })
    }
}

fn format_csv(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
