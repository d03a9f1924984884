use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense slice-by-node matrix of observations.
///
/// Row `r` holds the observations at absolute slice index
/// `start_index + r`; column `n` is node `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    values: Vec<f64>,
    rows: usize,
    node_ids: Vec<String>,
    pub start_index: usize,
    pub slices_per_day: usize,
}

impl SeriesTable {
    pub fn new(
        values: Vec<f64>,
        rows: usize,
        node_ids: Vec<String>,
        start_index: usize,
        slices_per_day: usize,
    ) -> Result<Self> {
        if node_ids.is_empty() || rows == 0 {
            return Err(Error::Input("series table needs at least one row and one node".into()));
        }
        if values.len() != rows * node_ids.len() {
            return Err(Error::dim("SeriesTable::new", &[rows, node_ids.len()], &[values.len()]));
        }
        if slices_per_day == 0 {
            return Err(Error::Config("slices_per_day must be positive".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value at row {}, node {}",
                pos / node_ids.len(),
                pos % node_ids.len()
            )));
        }
        Ok(Self {
            values,
            rows,
            node_ids,
            start_index,
            slices_per_day,
        })
    }

    /// Table from a function of (row, node), with nodes named `0..m`.
    pub fn from_fn(rows: usize, m: usize, slices_per_day: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * m);
        for r in 0..rows {
            for n in 0..m {
                values.push(f(r, n));
            }
        }
        Self::new(values, rows, (0..m).map(|i| i.to_string()).collect(), 0, slices_per_day)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, node: usize) -> f64 {
        self.values[row * self.nodes() + node]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let m = self.nodes();
        &self.values[row * m..(row + 1) * m]
    }

    /// Absolute slice index of `row`.
    pub fn slice_index(&self, row: usize) -> usize {
        self.start_index + row
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            values,
            self.rows,
            self.node_ids.clone(),
            self.start_index,
            self.slices_per_day,
        )
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Population standard deviation over every cell.
    pub fn std(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        (self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Reads `slice_index,node_<id>,...` CSV. Lines starting with `#` are ignored.
pub fn load_series_csv(path: impl AsRef<Path>, slices_per_day: usize) -> Result<SeriesTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };

    let headers = reader
        .headers()
        .map_err(|e| ingest(format!("unreadable header: {e}")))?
        .clone();
    if headers.get(0) != Some("slice_index") {
        return Err(ingest("header must start with 'slice_index'".into()));
    }
    let mut node_ids = Vec::with_capacity(headers.len().saturating_sub(1));
    for h in headers.iter().skip(1) {
        let id = h
            .strip_prefix("node_")
            .ok_or_else(|| ingest(format!("column '{h}' is not of the form node_<id>")))?;
        node_ids.push(id.to_string());
    }
    if node_ids.is_empty() {
        return Err(ingest("no node columns".into()));
    }

    let m = node_ids.len();
    let mut values = Vec::new();
    let mut start = None;
    let mut expected = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| ingest(e.to_string()))?;
        // `row` is the 1-based line number in the file
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != m + 1 {
            return Err(ingest(format!("row {row} has {} fields, expected {}", record.len(), m + 1)));
        }
        let idx: usize = record[0].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: 1,
            message: format!("invalid slice index '{}'", &record[0]),
        })?;
        match start {
            None => {
                start = Some(idx);
                expected = idx + 1;
            }
            Some(_) => {
                if idx != expected {
                    return Err(ingest(if idx > expected {
                        format!("missing slice {expected}")
                    } else {
                        format!("slice {idx} out of order at row {row}")
                    }));
                }
                expected += 1;
            }
        }
        for (col, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: col + 1,
                message: format!("non-numeric value '{cell}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: col + 1,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            values.push(v);
        }
    }
    let start = start.ok_or_else(|| ingest("no data rows".into()))?;
    let rows = values.len() / m;
    SeriesTable::new(values, rows, node_ids, start, slices_per_day)
}

/// Writes a table in the format read by [`load_series_csv`], after the
/// verbatim `header` (comment lines or empty). Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_series_csv(table: &SeriesTable, path: impl AsRef<Path>, header: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(header.as_bytes()).map_err(io)?;
    write!(w, "slice_index").map_err(io)?;
    for id in table.node_ids() {
        write!(w, ",node_{id}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for r in 0..table.rows() {
        write!(w, "{}", table.slice_index(r)).map_err(io)?;
        for v in table.row(r) {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
