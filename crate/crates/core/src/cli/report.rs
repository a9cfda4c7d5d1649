use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::linalg::{Mat, Vector};

/// `17` significant digits.
pub fn fmt_f64(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Wide table of a matrix with labelled rows and columns.
    pub fn from_matrix(name: &str, corner: &str, row_labels: &[String], col_labels: &[String], m: &Mat) -> Self {
        let mut header = vec![corner.to_string()];
        header.extend(col_labels.iter().cloned());
        let mut t = Self {
            name: name.to_string(),
            header,
            rows: Vec::new(),
        };
        for (r, label) in row_labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(m.row(r).iter().map(|&v| fmt_f64(v)));
            t.rows.push(row);
        }
        t
    }

    /// Two-column `index, value` table, indices from 1.
    pub fn from_vector(name: &str, index: &str, value: &str, v: &Vector) -> Self {
        let mut t = Self::new(name, &[index, value]);
        for (i, &x) in v.iter().enumerate() {
            t.push(vec![(i + 1).to_string(), fmt_f64(x)]);
        }
        t
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
    }
}

fn csv_error(e: csv::Error) -> crate::Error {
    std::io::Error::other(e.to_string()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub input_digest: String,
    pub seed: u64,
    pub tables: Vec<Table>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    pub wall_time_ms: f64,
}

impl RunReport {
    pub fn new(command: &str, input: &[u8], seed: u64) -> Self {
        Self {
            command: command.to_string(),
            input_digest: digest(input),
            seed,
            tables: Vec::new(),
            diagnostics: BTreeMap::new(),
            wall_time_ms: 0.0,
        }
    }

    pub fn diag(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.diagnostics.insert(key.to_string(), v);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<command>_<table>.csv` per table and/or `<command>_report.json`.
    pub fn write(&self, dir: &Path, csv: bool, json: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let stem = self.command.replace('-', "_");
        if csv {
            for t in &self.tables {
                std::fs::write(dir.join(format!("{stem}_{}.csv", t.name)), t.to_csv()?)?;
            }
        }
        if json {
            let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
            std::fs::write(dir.join(format!("{stem}_report.json")), text + "\n")?;
        }
        Ok(())
    }
}

pub fn digest(input: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(input)))
}
