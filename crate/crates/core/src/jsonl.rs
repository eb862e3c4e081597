//! Versioned JSON-lines persistence shared by every record type.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid record: {source}")]
    Decode {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { path: String, line: usize, found: u32 },
}

#[derive(Serialize)]
struct Outgoing<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a T,
}

#[derive(Deserialize)]
struct Incoming<T> {
    schema_version: u32,
    #[serde(flatten)]
    record: T,
}

/// Encodes one record as a single JSON line (no trailing newline).
pub fn encode_line<T: Serialize>(record: &T) -> String {
    serde_json::to_string(&Outgoing {
        schema_version: SCHEMA_VERSION,
        record,
    })
    .expect("records are always representable as JSON")
}

pub fn decode_line<T: DeserializeOwned>(line: &str) -> Result<T, serde_json::Error> {
    let incoming: Incoming<T> = serde_json::from_str(line)?;
    if incoming.schema_version != SCHEMA_VERSION {
        return Err(serde::de::Error::custom(format!(
            "unsupported schema_version {}",
            incoming.schema_version
        )));
    }
    Ok(incoming.record)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> JsonlError + '_ {
    move |source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let decode = |source| JsonlError::Decode {
            path: path.display().to_string(),
            line: i + 1,
            source,
        };
        let raw: serde_json::Value = serde_json::from_str(&line).map_err(decode)?;
        let version = raw
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as u32;
        if version != SCHEMA_VERSION {
            return Err(JsonlError::Version {
                path: path.display().to_string(),
                line: i + 1,
                found: version,
            });
        }
        let incoming: Incoming<T> = serde_json::from_value(raw).map_err(|source| {
            JsonlError::Decode {
                path: path.display().to_string(),
                line: i + 1,
                source,
            }
        })?;
        out.push(incoming.record);
    }
    Ok(out)
}

/// Writes all records, replacing the file atomically.
pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), JsonlError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        for r in records {
            writeln!(w, "{}", encode_line(r)).map_err(io_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Appends records to a shard, creating it if needed.
pub fn append_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), JsonlError> {
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}", encode_line(r)).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
