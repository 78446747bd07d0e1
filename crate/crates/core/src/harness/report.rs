use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One machine-readable result line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub domain: String,
    pub metric: String,
    pub value: f64,
}

/// Rows are methods, columns are domains, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub title: String,
    pub methods: Vec<String>,
    pub domains: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
}

impl ResultTable {
    pub fn new(title: impl Into<String>) -> Self {
        ResultTable {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn set(&mut self, method: &str, domain: &str, value: f64) {
        let r = position_or_push(&mut self.methods, method);
        let c = position_or_push(&mut self.domains, domain);
        if self.values.len() <= r {
            self.values.resize(r + 1, Vec::new());
        }
        for row in &mut self.values {
            row.resize(self.domains.len(), None);
        }
        self.values[r][c] = Some(value);
    }

    pub fn get(&self, method: &str, domain: &str) -> Option<f64> {
        let r = self.methods.iter().position(|m| m == method)?;
        let c = self.domains.iter().position(|d| d == domain)?;
        self.values.get(r)?.get(c).copied().flatten()
    }

    pub fn records(&self, metric: &str) -> Vec<ResultRecord> {
        let mut out = Vec::new();
        for (r, method) in self.methods.iter().enumerate() {
            for (c, domain) in self.domains.iter().enumerate() {
                if let Some(value) = self.values[r][c] {
                    out.push(ResultRecord {
                        method: method.clone(),
                        domain: domain.clone(),
                        metric: metric.to_owned(),
                        value,
                    });
                }
            }
        }
        out
    }

    /// Fixed-width text table with three decimals.
    pub fn render(&self) -> String {
        let first = self
            .methods
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(6)
            + 2;
        let widths: Vec<usize> = self.domains.iter().map(|d| d.len().max(5) + 2).collect();
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let _ = write!(out, "{:<first$}", "method");
        for (d, w) in self.domains.iter().zip(&widths) {
            let _ = write!(out, "{d:>w$}");
        }
        out.push('\n');
        let total = first + widths.iter().sum::<usize>();
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for (r, m) in self.methods.iter().enumerate() {
            let _ = write!(out, "{m:<first$}");
            for (c, w) in widths.iter().enumerate() {
                match self.values[r][c] {
                    Some(v) => {
                        let _ = write!(out, "{v:>w$.3}");
                    }
                    None => {
                        let _ = write!(out, "{:>w$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.jsonl` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str, metric: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let jsonl = dir.join(format!("{stem}.jsonl"));
        fs::write(&jsonl, to_jsonl(&self.records(metric))).map_err(|e| Error::io(&jsonl, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        fs::write(&txt, self.render()).map_err(|e| Error::io(&txt, e))
    }
}

fn position_or_push(list: &mut Vec<String>, key: &str) -> usize {
    list.iter().position(|k| k == key).unwrap_or_else(|| {
        list.push(key.to_owned());
        list.len() - 1
    })
}

pub(crate) fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}
