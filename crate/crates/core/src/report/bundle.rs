//! CSV tables with JSON schema sidecars, and the manifest-keeping writer.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    String,
    Number,
    Integer,
    Boolean,
    Date,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Num(f64),
    Int(i64),
    Bool(bool),
    Date(NaiveDate),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Date(d) => d.format("%Y-%m-%d").to_string(),
            Cell::Empty => String::new(),
        }
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{}", v + 0.0)
    } else {
        format!("{v:e}")
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<NaiveDate> for Cell {
    fn from(d: NaiveDate) -> Self {
        Cell::Date(d)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem; the table is written to `<name>.csv`.
    pub name: String,
    pub description: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, description: &str, columns: &[(&str, ColumnType, &str)]) -> Self {
        Self {
            name: name.to_owned(),
            description: description.to_owned(),
            columns: columns
                .iter()
                .map(|(n, k, d)| Column {
                    name: (*n).to_owned(),
                    kind: *k,
                    description: (*d).to_owned(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    /// Long-format plot data: `date, series, value`.
    pub fn long_format(name: &str, description: &str) -> Self {
        Self::new(
            name,
            description,
            &[
                ("date", ColumnType::Date, "observation date"),
                ("series", ColumnType::String, "series label"),
                ("value", ColumnType::Number, "observation value"),
            ],
        )
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn schema_json(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Schema<'a> {
            table: &'a str,
            file: String,
            description: &'a str,
            columns: &'a [Column],
        }
        let mut out = serde_json::to_vec_pretty(&Schema {
            table: &self.name,
            file: format!("{}.csv", self.name),
            description: &self.description,
            columns: &self.columns,
        })
        .expect("schema serializes");
        out.push(b'\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub stage: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageState {
    Ok,
    /// Some outputs were written, some items failed.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub status: StageState,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub config_sha256: String,
    pub data_sha256: String,
    pub seed: u64,
    pub partial: bool,
    pub stages: BTreeMap<String, StageStatus>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Option<Manifest> {
        let text = std::fs::read(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_slice(&text).ok()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The only component that writes into the output directory.
#[derive(Debug)]
pub struct BundleWriter {
    dir: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl BundleWriter {
    /// Removes every file listed by a previous manifest in `dir`, then the manifest itself.
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        if let Some(old) = Manifest::read(dir) {
            for f in old.files {
                let p = dir.join(&f.path);
                if p.is_file() && !f.path.contains("..") {
                    std::fs::remove_file(p)?;
                }
            }
            std::fs::remove_file(dir.join(MANIFEST_FILE))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_file(&mut self, name: &str, bytes: &[u8], stage: &str) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.insert(
            name.to_owned(),
            FileEntry {
                path: name.to_owned(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
                stage: stage.to_owned(),
            },
        );
        Ok(())
    }

    pub fn write_table(&mut self, table: &Table, stage: &str) -> std::io::Result<()> {
        self.write_file(&format!("{}.csv", table.name), &table.to_csv(), stage)?;
        self.write_file(&format!("{}.schema.json", table.name), &table.schema_json(), stage)
    }

    /// Writes `manifest.json` listing every file written through this writer.
    pub fn finish(self, mut manifest: Manifest) -> std::io::Result<Manifest> {
        manifest.files = self.files.into_values().collect();
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        std::fs::write(self.dir.join(MANIFEST_FILE), bytes)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rendering() {
        let mut t = Table::new(
            "t",
            "demo",
            &[
                ("a", ColumnType::String, ""),
                ("b", ColumnType::Number, ""),
                ("c", ColumnType::Date, ""),
            ],
        );
        t.push(vec!["x,y".into(), 0.1.into(), Cell::Empty]);
        t.push(vec![
            "z".into(),
            (-2.5e-20).into(),
            NaiveDate::from_ymd_opt(2020, 3, 17).unwrap().into(),
        ]);
        let text = String::from_utf8(t.to_csv()).unwrap();
        assert_eq!(text, "a,b,c\n\"x,y\",0.1,\nz,-2.5e-20,2020-03-17\n");
        assert_eq!(format_number(1234.5), "1234.5");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(3.4e-166), "3.4e-166");
        assert_eq!(format_number(0.00012), "0.00012");
        let schema: serde_json::Value = serde_json::from_slice(&t.schema_json()).unwrap();
        assert_eq!(schema["columns"][1]["type"], "number");
    }

    #[test]
    fn writer_replaces_previous_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let blank = Manifest {
            software: "x".into(),
            version: "0".into(),
            config_sha256: String::new(),
            data_sha256: String::new(),
            seed: 0,
            partial: false,
            stages: BTreeMap::new(),
            files: Vec::new(),
        };
        let mut w = BundleWriter::open(dir.path()).unwrap();
        w.write_file("old.csv", b"1\n", "s").unwrap();
        let m = w.finish(blank.clone()).unwrap();
        assert_eq!(m.files[0].sha256, sha256_hex(b"1\n"));

        let mut w = BundleWriter::open(dir.path()).unwrap();
        assert!(!dir.path().join("old.csv").exists());
        w.write_file("new.csv", b"2\n", "s").unwrap();
        w.finish(blank).unwrap();
        let read = Manifest::read(dir.path()).unwrap();
        assert_eq!(read.files.len(), 1);
        assert_eq!(read.files[0].path, "new.csv");
    }
}
