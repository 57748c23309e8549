//! Report envelope, JSON writer with 17 significant digits, and aligned tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use yhmm::{Matrix, Settings, Vector};

#[derive(Debug, Serialize)]
pub struct ErrorInfo {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: Vec<String>,
    pub inputs: BTreeMap<String, String>,
    pub settings: Settings,
    pub results: Value,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn matrix_json(m: &Matrix) -> Value {
    Value::Array(m.row_iter().map(|r| Value::Array(r.iter().map(|x| float(*x)).collect())).collect())
}

pub fn vector_json(v: &Vector) -> Value {
    Value::Array(v.iter().map(|x| float(*x)).collect())
}

/// Non-finite values have no JSON form and are written as strings.
pub fn float(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(x.to_string()))
}

fn format_number(n: &serde_json::Number) -> String {
    if n.is_f64() {
        format!("{:.16e}", n.as_f64().unwrap_or(f64::NAN))
    } else {
        n.to_string()
    }
}

fn write_value(out: &mut String, v: &Value, indent: Option<usize>, level: usize) {
    let newline = |out: &mut String, level: usize| {
        if let Some(step) = indent {
            out.push('\n');
            out.push_str(&" ".repeat(step * level));
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&format_number(n)),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            // Arrays of scalars stay on one line.
            let flat = items.iter().all(|x| !x.is_array() && !x.is_object());
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if flat && indent.is_some() {
                        out.push(' ');
                    }
                }
                if !flat {
                    newline(out, level + 1);
                }
                write_value(out, item, indent, level + 1);
            }
            if !flat {
                newline(out, level);
            }
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, level + 1);
                out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                out.push(':');
                if indent.is_some() {
                    out.push(' ');
                }
                write_value(out, item, indent, level + 1);
            }
            newline(out, level);
            out.push('}');
        }
    }
}

pub fn to_json(v: &Value, pretty: bool) -> String {
    let mut out = String::new();
    write_value(&mut out, v, pretty.then_some(2), 0);
    out.push('\n');
    out
}

fn short(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format!("{:.6e}", n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => format!("[{}]", items.iter().map(short).collect::<Vec<_>>().join(", ")),
        Value::Object(_) => "{..}".into(),
    }
}

fn is_matrix(v: &Value) -> bool {
    matches!(v, Value::Array(rows) if !rows.is_empty()
        && rows.iter().all(|r| matches!(r, Value::Array(c) if c.iter().all(Value::is_number))))
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, Vec<String>)>) {
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, item, rows);
            }
        }
        Value::Array(items) if is_matrix(v) => {
            let cells: Vec<Vec<String>> = items
                .iter()
                .map(|r| r.as_array().map(|c| c.iter().map(short).collect()).unwrap_or_default())
                .collect();
            let width = cells.iter().flatten().map(|c| c.len()).max().unwrap_or(0);
            let lines = cells
                .iter()
                .map(|r| r.iter().map(|c| format!("{c:>width$}")).collect::<Vec<_>>().join("  "))
                .collect();
            rows.push((prefix.to_string(), lines));
        }
        Value::Array(items) if items.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), item, rows);
            }
        }
        _ => rows.push((prefix.to_string(), vec![short(v)])),
    }
}

/// Two-column rendering of the results and warnings.
pub fn table(report: &Report) -> String {
    let mut rows = Vec::new();
    flatten("", &report.results, &mut rows);
    for w in &report.warnings {
        rows.push(("warning".into(), vec![w.clone()]));
    }
    if let Some(e) = &report.error {
        rows.push(("error".into(), vec![format!("{} (exit {}): {}", e.kind, e.exit_code, e.message)]));
    }
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (key, lines) in rows {
        for (i, line) in lines.iter().enumerate() {
            let label = if i == 0 { key.as_str() } else { "" };
            let _ = writeln!(out, "{label:<width$}  {line}");
        }
    }
    out
}

/// Builds an object from key/value pairs, keeping insertion order out of the
/// output (keys are sorted) so that reports are byte-stable.
pub fn object<const N: usize>(pairs: [(&str, Value); N]) -> Value {
    let mut map = Map::new();
    for (k, v) in pairs {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}
