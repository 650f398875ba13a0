//! Dataset files: labeled-frame NDJSON, encoding CSV and encoding NDJSON.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use serde_json::{json, Value};

use super::PipelineError;
use crate::encoder::{encode, PoseEncoding, NUM_FEATURES};
use crate::level::Level;
use crate::preprocess::{LabeledDataset, LabeledRow};
use crate::skeleton::{parse_record, KeypointFrame};

/// A rejected input line (1-based line number).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Opens a file, or standard input for `-`.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead + Send>, PipelineError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| PipelineError::UnreadableInput(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    let mut s = String::new();
    open_input(path)?
        .read_to_string(&mut s)
        .map_err(|e| PipelineError::UnreadableInput(format!("{}: {e}", path.display())))?;
    Ok(s)
}

pub fn csv_header(labeled: bool) -> String {
    let mut cols: Vec<String> = (1..=NUM_FEATURES).map(|i| format!("f{i:02}")).collect();
    if labeled {
        cols.push("label".into());
    }
    cols.join(",")
}

fn fmt_angle(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "NaN".into(),
    }
}

/// One CSV row; invalid entries are written as `NaN`.
pub fn csv_row(enc: &PoseEncoding, label: Option<Level>) -> String {
    let mut cols: Vec<String> = enc.values().iter().map(|&v| fmt_angle(v)).collect();
    if let Some(l) = label {
        cols.push(l.number().to_string());
    }
    cols.join(",")
}

/// NDJSON encoding record; invalid entries are `null`.
pub fn encoding_json(frame: &KeypointFrame, enc: &PoseEncoding, label: Option<Level>) -> String {
    let angles: Vec<Value> = enc.values().iter().map(|v| v.map_or(Value::Null, Value::from)).collect();
    let mut v = json!({"frame_id": frame.frame_id, "person_id": frame.person_id, "angles": angles});
    if let Some(l) = label {
        v["label"] = l.number().into();
    }
    v.to_string()
}

pub fn parse_csv_row(line: &str, labeled: bool) -> Result<(PoseEncoding, Option<Level>), String> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    let expected = NUM_FEATURES + usize::from(labeled);
    if cols.len() != expected {
        return Err(format!("expected {expected} columns, got {}", cols.len()));
    }
    let mut vals = [f64::NAN; NUM_FEATURES];
    for (i, c) in cols[..NUM_FEATURES].iter().enumerate() {
        vals[i] = if c.eq_ignore_ascii_case("nan") || c.is_empty() {
            f64::NAN
        } else {
            c.parse::<f64>().map_err(|_| format!("column {}: bad number {c:?}", i + 1))?
        };
    }
    let label = if labeled {
        let raw: i64 = cols[NUM_FEATURES]
            .parse()
            .map_err(|_| format!("bad label {:?}", cols[NUM_FEATURES]))?;
        Some(Level::try_from(raw).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok((PoseEncoding::from_raw(vals), label))
}

fn is_csv(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with("f01"))
}

/// Loads labeled rows from either encoding CSV (with a `label` column) or
/// labeled-frame NDJSON. Bad lines are skipped and returned.
pub fn parse_labeled(text: &str) -> (LabeledDataset, Vec<LineError>) {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let csv = is_csv(text);
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let parsed = if csv {
            if !header_seen {
                header_seen = true;
                if !line.trim().ends_with(",label") {
                    errors.push(LineError {
                        line: n,
                        message: "CSV header has no label column".into(),
                    });
                    return (LabeledDataset::default(), errors);
                }
                continue;
            }
            parse_csv_row(line, true).map(|(enc, l)| (enc, l.expect("labeled row")))
        } else {
            labeled_frame(line).map(|(f, l)| (encode(&f), l))
        };
        match parsed {
            Ok((encoding, label)) => rows.push(LabeledRow { encoding, label }),
            Err(message) => errors.push(LineError { line: n, message }),
        }
    }
    (LabeledDataset::new(rows), errors)
}

fn labeled_frame(line: &str) -> Result<(KeypointFrame, Level), String> {
    let rec = parse_record(line).map_err(|e| e.to_string())?;
    let raw = rec.label.ok_or_else(|| "record has no label".to_string())?;
    let label = Level::try_from(raw).map_err(|e| e.to_string())?;
    let frame = rec.into_frame().map_err(|e| e.to_string())?;
    Ok((frame, label))
}

pub fn load_labeled(path: &Path) -> Result<(LabeledDataset, Vec<LineError>), PipelineError> {
    Ok(parse_labeled(&read_text(path)?))
}

/// Writes a frame as an NDJSON line, with an optional label.
pub fn write_frame(out: &mut impl Write, frame: &KeypointFrame, label: Option<Level>) -> io::Result<()> {
    let mut rec = frame.to_record();
    rec.label = label.map(Level::number);
    serde_json::to_writer(&mut *out, &rec)?;
    out.write_all(b"\n")
}
