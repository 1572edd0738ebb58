//! JSON-lines datasets: one `{"id", "document", "summary"}` object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Document;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    #[serde(default)]
    pub id: Option<String>,
    pub document: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        if rec.id.is_none() {
            rec.id = Some(format!("line-{}", n + 1));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Documents only. Reference summaries are dropped at the loader so nothing
/// downstream of training can see them.
pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    Ok(read_records(path.as_ref())?
        .into_iter()
        .map(|r| Document::new(r.id.unwrap_or_default(), r.document))
        .collect())
}

/// Documents with their reference summaries. Every record must carry one.
pub fn load_reference_dataset(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let records = read_records(path)?;
    if records.is_empty() || records.iter().any(|r| r.summary.is_none()) {
        return Err(Error::MissingReferences(path.to_path_buf()));
    }
    Ok(records
        .into_iter()
        .map(|r| {
            Document::new(r.id.unwrap_or_default(), r.document)
                .with_summary(r.summary.unwrap_or_default())
        })
        .collect())
}

pub fn write_records(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        serde_json::to_writer(&mut file, r)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
