//! Line-delimited record files, provenance headers and atomic writes.
//!
//! Every artifact written by the pipeline carries an [`ArtifactMeta`]: JSONL
//! files lead with a `{"_meta": ...}` line, CSV files with a `# meta ...`
//! comment, and JSON documents with a top-level `_meta` key. Readers skip
//! these headers, so files produced elsewhere (without a header) load too.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("radprm ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
}

impl ArtifactMeta {
    pub fn new(config_hash: impl Into<String>, seeds: BTreeMap<String, u64>) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
            seeds,
        }
    }

    /// Header used by library callers that have no pipeline config.
    pub fn detached() -> Self {
        Self::new("none", BTreeMap::new())
    }

    pub fn csv_comment(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "# meta tool_version={} config_hash={} seeds={}",
            self.tool_version,
            self.config_hash,
            seeds.join(",")
        )
    }
}

#[derive(Serialize)]
struct MetaLine<'a> {
    #[serde(rename = "_meta")]
    meta: &'a ArtifactMeta,
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Serializes records as JSONL, header line first.
pub fn jsonl_bytes<T: Serialize>(meta: Option<&ArtifactMeta>, records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    if let Some(meta) = meta {
        serde_json::to_writer(&mut out, &MetaLine { meta }).expect("meta serializes");
        out.push(b'\n');
    }
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, meta: &ArtifactMeta, records: &[T]) -> Result<()> {
    write_atomic(path, &jsonl_bytes(Some(meta), records))
}

pub fn write_json<T: Serialize>(path: &Path, meta: &ArtifactMeta, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Render(e.to_string()))?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert(
            "_meta".into(),
            serde_json::to_value(meta).expect("meta serializes"),
        );
    }
    let mut bytes = serde_json::to_vec_pretty(&v).expect("value serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_artifact(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Malformed {
        line: e.line(),
        message: e.to_string(),
    })
}

/// Reads a JSON document written by [`write_json`], dropping its `_meta` key.
pub fn read_json_body<T: DeserializeOwned>(path: &Path) -> Result<(Option<ArtifactMeta>, T)> {
    let mut v: serde_json::Value = read_json(path)?;
    let meta = v
        .as_object_mut()
        .and_then(|m| m.remove("_meta"))
        .and_then(|m| serde_json::from_value(m).ok());
    let body = serde_json::from_value(v).map_err(|e| Error::Schema {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok((meta, body))
}

pub(crate) fn read_artifact(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn is_meta_line(line: &str) -> bool {
    line.trim_start().starts_with("{\"_meta\"")
}

/// Parses one JSONL stream into `(line_number, record)` pairs.
///
/// Syntax errors become [`Error::Malformed`]; well-formed JSON that does not
/// match the record type becomes [`Error::Schema`]. Blank lines and meta
/// headers are skipped.
pub fn parse_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() || is_meta_line(&line) {
            continue;
        }
        let rec = serde_json::from_str::<T>(&line).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Data => Error::Schema {
                    line: lineno,
                    message: e.to_string(),
                },
                _ => Error::Malformed {
                    line: lineno,
                    message: e.to_string(),
                },
            }
        })?;
        out.push((lineno, rec));
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(f))
}

/// Reads only the `_meta` header of a JSONL artifact, if it has one.
pub fn read_jsonl_meta(path: &Path) -> Result<Option<ArtifactMeta>> {
    #[derive(Deserialize)]
    struct Wrapper {
        #[serde(rename = "_meta")]
        meta: ArtifactMeta,
    }
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(f)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    if !is_meta_line(&first) {
        return Ok(None);
    }
    Ok(serde_json::from_str::<Wrapper>(&first).ok().map(|w| w.meta))
}

/// Renders a long-format CSV table with a meta comment line.
pub fn csv_bytes(meta: &ArtifactMeta, header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{}", meta.csv_comment()).unwrap();
    writeln!(out, "{}", header.join(",")).unwrap();
    for row in rows {
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Rec {
        a: u32,
    }

    #[test]
    fn meta_header_is_skipped_on_read() {
        let bytes = jsonl_bytes(Some(&ArtifactMeta::detached()), &[Rec { a: 1 }, Rec { a: 2 }]);
        let recs: Vec<(usize, Rec)> = parse_jsonl(&bytes[..]).unwrap();
        assert_eq!(recs, vec![(2, Rec { a: 1 }), (3, Rec { a: 2 })]);
    }

    #[test]
    fn syntax_and_schema_errors_are_distinct() {
        let bad = b"{\"a\": 1}\n{\"a\": \n";
        match parse_jsonl::<Rec, _>(&bad[..]) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let wrong = b"{\"b\": 1}\n";
        match parse_jsonl::<Rec, _>(&wrong[..]) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert!(!dir.path().join("sub/x.txt.tmp").exists());
    }
}
