//! Dataset files.
//!
//! JSONL: one object per line, `{"id": str, "text": str | "features": [num],
//! "label": str | int}`. CSV: header `id,label,text` or
//! `id,label,f0,...,f{d-1}`.
//!
//! Labels are re-indexed densely. Without declared classes the label map is
//! the sorted set of observed labels (integers numerically, strings
//! lexicographically); with declared classes it is the declared order and any
//! other label is an error.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{Dataset, Payload, Sample};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Format> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl") | Some("json") => Ok(Format::Jsonl),
            Some("csv") => Ok(Format::Csv),
            _ => Err(Error::config(format!("cannot infer dataset format of {}", path.display()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum RawLabel {
    Int(i64),
    Str(String),
}

impl RawLabel {
    fn name(&self) -> String {
        match self {
            RawLabel::Int(i) => i.to_string(),
            RawLabel::Str(s) => s.clone(),
        }
    }
}

struct Row {
    line: usize,
    id: String,
    payload: Payload,
    label: RawLabel,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: PathBuf::from(path), line, msg: msg.into() }
}

fn read_jsonl(path: &Path) -> Result<Vec<Row>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| parse_err(path, line_no, msg);
        let v: Value = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let id = v.get("id").and_then(Value::as_str).ok_or_else(|| err("missing string field `id`".into()))?;
        let payload = match (v.get("text"), v.get("features")) {
            (Some(Value::String(t)), None) => Payload::Text(t.clone()),
            (None, Some(Value::Array(xs))) => Payload::Features(
                xs.iter()
                    .map(|x| x.as_f64().ok_or_else(|| err("non-numeric feature".into())))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(err("expected exactly one of `text` (string) or `features` (array)".into())),
        };
        let label = match v.get("label") {
            Some(Value::String(s)) => RawLabel::Str(s.clone()),
            Some(Value::Number(n)) => RawLabel::Int(n.as_i64().ok_or_else(|| err(format!("unknown label type: {n}")))?),
            Some(other) => return Err(err(format!("unknown label type: {other}"))),
            None => return Err(err("missing field `label`".into())),
        };
        rows.push(Row { line: line_no, id: id.to_owned(), payload, label });
    }
    Ok(rows)
}

fn read_csv(path: &Path) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "label" {
        return Err(parse_err(path, 1, "header must start with `id,label`"));
    }
    let text = cols.len() == 3 && cols[2] == "text";
    if !text {
        for (j, c) in cols[2..].iter().enumerate() {
            if *c != format!("f{j}") {
                return Err(parse_err(path, 1, format!("expected column `f{j}`, found `{c}`")));
            }
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let err = |msg: String| parse_err(path, line, msg);
        let raw = record.get(1).unwrap_or_default();
        let label = match raw.parse::<i64>() {
            Ok(i) => RawLabel::Int(i),
            Err(_) => RawLabel::Str(raw.to_owned()),
        };
        let payload = if text {
            Payload::Text(record.get(2).unwrap_or_default().to_owned())
        } else {
            Payload::Features(
                record
                    .iter()
                    .skip(2)
                    .map(|f| f.trim().parse::<f64>().map_err(|e| err(format!("bad feature `{f}`: {e}"))))
                    .collect::<Result<_>>()?,
            )
        };
        rows.push(Row { line, id: record.get(0).unwrap_or_default().to_owned(), payload, label });
    }
    Ok(rows)
}

/// Parse a dataset file. `classes`, when given, fixes the label map.
pub fn load_dataset(path: &Path, format: Format, classes: Option<&[String]>) -> Result<Dataset> {
    let rows = match format {
        Format::Jsonl => read_jsonl(path)?,
        Format::Csv => read_csv(path)?,
    };
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no rows", path.display())));
    }
    let names: Vec<String> = match classes {
        Some(declared) => declared.to_vec(),
        None => {
            let first_is_int = matches!(rows[0].label, RawLabel::Int(_));
            if let Some(r) = rows.iter().find(|r| matches!(r.label, RawLabel::Int(_)) != first_is_int) {
                return Err(parse_err(path, r.line, "unknown label type: integer and string labels are mixed"));
            }
            let set: BTreeSet<&RawLabel> = rows.iter().map(|r| &r.label).collect();
            set.into_iter().map(RawLabel::name).collect()
        }
    };
    let mut samples = Vec::with_capacity(rows.len());
    for r in rows {
        let name = r.label.name();
        let label = names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| parse_err(path, r.line, format!("label `{name}` is not a declared class")))?;
        samples.push(Sample { id: r.id, payload: r.payload, label });
    }
    Dataset::new(samples, names)
}

/// Write `ds` as JSONL; labels that look like integers are written as
/// numbers so that reloading reproduces the same label map.
pub fn write_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in ds.samples() {
        let name = &ds.label_names()[s.label];
        let label = match name.parse::<i64>() {
            Ok(i) => json!(i),
            Err(_) => json!(name),
        };
        let row = match &s.payload {
            Payload::Text(t) => json!({"id": s.id, "text": t, "label": label}),
            Payload::Features(f) => json!({"id": s.id, "features": f, "label": label}),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
