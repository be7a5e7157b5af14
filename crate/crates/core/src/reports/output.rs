//! Run artifacts: fixed-precision JSON and CSV, and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// 17 significant digits in scientific notation.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A JSON value whose floats are written with [`f17`].
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Bool(bool),
    Str(String),
    List(Vec<Field>),
    Map(Record),
    Null,
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Num(x)
    }
}
impl From<usize> for Field {
    fn from(x: usize) -> Self {
        Field::Int(x as i64)
    }
}
impl From<u64> for Field {
    fn from(x: u64) -> Self {
        Field::Int(x as i64)
    }
}
impl From<i32> for Field {
    fn from(x: i32) -> Self {
        Field::Int(x as i64)
    }
}
impl From<bool> for Field {
    fn from(x: bool) -> Self {
        Field::Bool(x)
    }
}
impl From<&str> for Field {
    fn from(x: &str) -> Self {
        Field::Str(x.to_string())
    }
}
impl From<String> for Field {
    fn from(x: String) -> Self {
        Field::Str(x)
    }
}
impl From<Record> for Field {
    fn from(x: Record) -> Self {
        Field::Map(x)
    }
}
impl<T: Into<Field>> From<Vec<T>> for Field {
    fn from(x: Vec<T>) -> Self {
        Field::List(x.into_iter().map(Into::into).collect())
    }
}
impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(x: Option<T>) -> Self {
        x.map_or(Field::Null, Into::into)
    }
}

impl Serialize for Field {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Field::Num(x) if x.is_finite() => {
                RawValue::from_string(f17(*x)).map_err(serde::ser::Error::custom)?.serialize(s)
            }
            Field::Num(_) | Field::Null => s.serialize_none(),
            Field::Int(i) => s.serialize_i64(*i),
            Field::Bool(b) => s.serialize_bool(*b),
            Field::Str(t) => s.serialize_str(t),
            Field::List(v) => {
                let mut seq = s.serialize_seq(Some(v.len()))?;
                for f in v {
                    seq.serialize_element(f)?;
                }
                seq.end()
            }
            Field::Map(r) => r.serialize(s),
        }
    }
}

/// Insertion-ordered JSON object.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Record(Vec<(String, Field)>);

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<Field>) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<Field>) {
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&Field> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}

impl Serialize for Record {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// CSV with a fixed header; floats through [`f17`].
#[derive(Clone, Debug)]
pub struct Table {
    header: Vec<String>,
    body: String,
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), body: String::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        let line: Vec<String> = row
            .into_iter()
            .map(|c| match c {
                Cell::Num(x) => f17(x),
                Cell::Int(i) => i.to_string(),
                Cell::Text(t) => t,
            })
            .collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }
}

/// Files produced by one command, in creation order.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub diagnostics: Record,
    pub warnings: Vec<String>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), contents));
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

pub fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Everything the manifest records besides the file list.
#[derive(Clone, Debug)]
pub struct RunInfo {
    pub command: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub started_unix: u64,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// Writes the artifacts and `manifest.json` into `dir`; returns the written paths.
pub fn write_run(dir: &Path, artifacts: &Artifacts, info: &RunInfo) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    for (name, contents) in &artifacts.files {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        files.push(Field::Map(
            Record::new()
                .with("name", name.as_str())
                .with("bytes", contents.len())
                .with("sha256", hex::encode(Sha256::digest(contents.as_bytes()))),
        ));
        written.push(path);
    }
    let manifest = Record::new()
        .with("tool", env!("CARGO_PKG_NAME"))
        .with("version", env!("CARGO_PKG_VERSION"))
        .with("command", info.command.as_str())
        .with("scenario_sha256", info.scenario_sha256.as_str())
        .with("seed", info.seed)
        .with("exit_code", info.exit_code)
        .with("error", info.error.clone())
        .with("files", Field::List(files))
        .with("diagnostics", artifacts.diagnostics.clone())
        .with("warnings", artifacts.warnings.clone())
        .with(
            "timestamps",
            Record::new().with("started_unix", info.started_unix).with("finished_unix", unix_seconds()),
        );
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json())?;
    written.push(path);
    Ok(written)
}
