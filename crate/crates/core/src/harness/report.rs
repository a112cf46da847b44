//! Report emission: line-delimited records for machines, aligned tables and
//! CSV for humans. Reports are byte-deterministic: rows are ordered, fields
//! are sorted maps, and nothing here reads the clock.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

pub type Row = BTreeMap<String, String>;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: String,
    /// The fully resolved configuration this report was produced under.
    pub config: serde_json::Value,
    pub rows: Vec<Row>,
    pub claims: Vec<Claim>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let meta = serde_json::json!({
            "record": "meta",
            "kind": self.kind,
            "config": self.config,
        });
        out.push_str(&meta.to_string());
        out.push('\n');
        for row in &self.rows {
            let mut obj = serde_json::Map::new();
            obj.insert("record".into(), "row".into());
            for (k, v) in row {
                obj.insert(k.clone(), serde_json::Value::String(v.clone()));
            }
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        for claim in &self.claims {
            let line = serde_json::json!({
                "record": "claim",
                "name": claim.name,
                "pass": claim.pass,
                "detail": claim.detail,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for row in &self.rows {
            for k in row.keys() {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
        cols.sort();
        cols
    }

    pub fn to_csv(&self) -> Result<String> {
        let cols = self.columns();
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(&cols)
            .map_err(|e| crate::error::Error::Config(e.to_string()))?;
        for row in &self.rows {
            let record: Vec<&str> = cols
                .iter()
                .map(|c| row.get(c).map(|s| s.as_str()).unwrap_or(""))
                .collect();
            writer
                .write_record(&record)
                .map_err(|e| crate::error::Error::Config(e.to_string()))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| crate::error::Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned text table plus one pass/fail line per claim.
    pub fn to_text(&self) -> String {
        let cols = self.columns();
        let mut widths: Vec<usize> = cols.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (i, c) in cols.iter().enumerate() {
                if let Some(v) = row.get(c) {
                    widths[i] = widths[i].max(v.len());
                }
            }
        }
        let mut out = String::new();
        out.push_str(&format!("experiment: {}\n", self.kind));
        if !cols.is_empty() {
            let header: Vec<String> = cols
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{:w$}", c, w = widths[i]))
                .collect();
            out.push_str(&header.join("  "));
            out.push('\n');
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
            for row in &self.rows {
                let line: Vec<String> = cols
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        format!("{:w$}", row.get(c).map(|s| s.as_str()).unwrap_or(""), w = widths[i])
                    })
                    .collect();
                out.push_str(&line.join("  "));
                out.push('\n');
            }
        }
        out.push('\n');
        for claim in &self.claims {
            let mark = if claim.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{mark}] {}: {}\n", claim.name, claim.detail));
        }
        out
    }

    /// Writes `<stem>.jsonl`, `<stem>.csv`, and `<stem>.txt` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let jsonl = dir.join(format!("{stem}.jsonl"));
        let csv_path = dir.join(format!("{stem}.csv"));
        let txt = dir.join(format!("{stem}.txt"));
        fs::write(&jsonl, self.to_jsonl())?;
        fs::write(&csv_path, self.to_csv()?)?;
        fs::write(&txt, self.to_text())?;
        Ok(vec![jsonl, csv_path, txt])
    }
}
