use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,n,m,replicate,error,selection_norm,status";

/// One `(method, n, replicate)` measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub replicate: usize,
    /// Averaged relative L2 error; `None` for failed cells.
    pub error: Option<f64>,
    pub selection_norm: Option<f64>,
    /// `ok` or `failed: <reason>`.
    pub status: String,
    /// Noiseless runs only: whether every per-parameter error met the a-priori bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_holds: Option<bool>,
}

impl ErrorRow {
    pub fn ok(method: &str, n: usize, m: usize, replicate: usize, error: f64, selection_norm: f64) -> Self {
        Self {
            method: method.to_string(),
            n,
            m,
            replicate,
            error: Some(error),
            selection_norm: Some(selection_norm),
            status: "ok".into(),
            bound_holds: None,
        }
    }

    pub fn failed(method: &str, n: usize, m: usize, replicate: usize, reason: &Error) -> Self {
        Self {
            method: method.to_string(),
            n,
            m,
            replicate,
            error: None,
            selection_norm: None,
            status: format!("failed: {reason}").replace('\n', " "),
            bound_holds: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Replicate aggregate of one `(method, n)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Over successful replicates; `None` if all failed.
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub selection_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    /// Free-form remarks, e.g. parameters dropped from the sweep.
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TableDocument {
    rows: Vec<ErrorRow>,
    cells: Vec<CellSummary>,
    #[serde(default)]
    notes: Vec<String>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    method: &'a str,
    n: usize,
    m: usize,
    replicate: usize,
    error: Option<f64>,
    selection_norm: Option<f64>,
    status: &'a str,
}

#[derive(Deserialize)]
struct OwnedCsvRow {
    method: String,
    n: usize,
    m: usize,
    replicate: usize,
    error: Option<f64>,
    selection_norm: Option<f64>,
    status: String,
}

impl ErrorTable {
    pub fn push(&mut self, row: ErrorRow) {
        self.rows.push(row);
    }

    /// Rows sorted by method order of first appearance, then `n`, then replicate.
    pub fn sort(&mut self) {
        let mut order: Vec<String> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.method) {
                order.push(r.method.clone());
            }
        }
        self.rows.sort_by_key(|r| {
            (
                order.iter().position(|m| *m == r.method).unwrap_or(usize::MAX),
                r.n,
                r.replicate,
            )
        });
    }

    pub fn cells(&self) -> Vec<CellSummary> {
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<(usize, usize), Vec<&ErrorRow>> = BTreeMap::new();
        for r in &self.rows {
            let pos = match order.iter().position(|m| *m == r.method) {
                Some(p) => p,
                None => {
                    order.push(r.method.clone());
                    order.len() - 1
                }
            };
            groups.entry((pos, r.n)).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|((pos, n), rows)| {
                let errors: Vec<f64> = rows.iter().filter_map(|r| r.error).collect();
                let norms: Vec<f64> = rows.iter().filter_map(|r| r.selection_norm).collect();
                let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
                CellSummary {
                    method: order[pos].clone(),
                    n,
                    m: rows[0].m,
                    succeeded: errors.len(),
                    failed: rows.len() - errors.len(),
                    mean: mean(&errors),
                    min: errors.iter().copied().reduce(f64::min),
                    max: errors.iter().copied().reduce(f64::max),
                    selection_norm: mean(&norms),
                }
            })
            .collect()
    }

    /// Cells of one method ordered by `n`.
    pub fn method_cells(&self, method: &str) -> Vec<CellSummary> {
        self.cells().into_iter().filter(|c| c.method == method).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            writer
                .serialize(CsvRow {
                    method: &r.method,
                    n: r.n,
                    m: r.m,
                    replicate: r.replicate,
                    error: r.error,
                    selection_norm: r.selection_norm,
                    status: &r.status,
                })
                .expect("in-memory CSV write");
        }
        if self.rows.is_empty() {
            return format!("{CSV_HEADER}\n");
        }
        String::from_utf8(writer.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
            return Err(Error::Parse(format!("expected CSV header {CSV_HEADER:?}")));
        }
        let mut table = ErrorTable::default();
        for record in reader.deserialize::<OwnedCsvRow>() {
            let r = record.map_err(|e| Error::Parse(e.to_string()))?;
            table.push(ErrorRow {
                method: r.method,
                n: r.n,
                m: r.m,
                replicate: r.replicate,
                error: r.error,
                selection_norm: r.selection_norm,
                status: r.status,
                bound_holds: None,
            });
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let doc = TableDocument {
            rows: self.rows.clone(),
            cells: self.cells(),
            notes: self.notes.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("error table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TableDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self {
            rows: doc.rows,
            notes: doc.notes,
        })
    }
}
