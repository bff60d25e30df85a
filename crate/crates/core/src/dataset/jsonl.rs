//! Newline-delimited JSON records.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::DatasetError;

pub fn to_jsonl_string<T: Serialize>(records: &[T]) -> Result<String, DatasetError> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| DatasetError::Json {
            path: None,
            message: e.to_string(),
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| DatasetError::Json {
            path: Some(path.display().to_string()),
            message: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

/// Parses records from a reader; blank lines are skipped. Line numbers in
/// errors are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::Parse {
            path: None,
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            path: None,
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    parse_jsonl(BufReader::new(file)).map_err(|e| e.with_path(path))
}
