//! Observation matrices and CSV ingestion.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Rows are observations, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    /// Wraps a matrix, rejecting empty shapes and non-finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::Dimension("data matrix has no columns".into()));
        }
        if values.nrows() == 0 {
            return Err(Error::Dimension("data matrix has no rows".into()));
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self {
            values,
            column_names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                self.ncols()
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Names for every column, generating `prefix1..prefixd` when none were given.
    pub fn names_or(&self, prefix: &str) -> Vec<String> {
        match &self.column_names {
            Some(n) => n.clone(),
            None => (1..=self.ncols()).map(|j| format!("{prefix}{j}")).collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if self.nrows() != other.nrows() {
            return Err(Error::Alignment {
                x_rows: self.nrows(),
                y_rows: other.nrows(),
            });
        }
        let (n, p, q) = (self.nrows(), self.ncols(), other.ncols());
        let mut m = DMatrix::zeros(n, p + q);
        m.view_mut((0, 0), (n, p)).copy_from(&self.values);
        m.view_mut((0, p), (n, q)).copy_from(&other.values);
        let names = match (&self.column_names, &other.column_names) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        Ok(DataMatrix {
            values: m,
            column_names: names,
        })
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix {
            values: self.values.select_rows(rows),
            column_names: self.column_names.clone(),
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    /// Parses comma-separated numeric data. The first record is treated as a
    /// header when any of its fields fails to parse as a number.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut names = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if line == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
                names = Some(record.iter().map(str::to_owned).collect::<Vec<_>>());
                continue;
            }
            let mut row = Vec::with_capacity(record.len());
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line: line + 1,
                    col: col + 1,
                    msg: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: line + 1,
                        col: col + 1,
                        msg: format!("non-finite value {field:?}"),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Dimension("CSV contains no data rows".into()));
        }
        let d = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            let line = i + 1 + usize::from(names.is_some());
            return Err(Error::Parse {
                line,
                col: rows[i].len(),
                msg: format!("expected {d} fields"),
            });
        }
        let dm = Self::from_rows(&rows)?;
        match names {
            Some(n) => dm.with_names(n),
            None => Ok(dm),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if let Some(names) = &self.column_names {
            w.write_record(names)?;
        }
        for i in 0..self.nrows() {
            w.write_record(self.values.row(i).iter().map(|v| format!("{v}")))?;
        }
        w.flush()?;
        Ok(())
    }
}
