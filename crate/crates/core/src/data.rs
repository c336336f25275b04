//! Headered CSV datasets.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Inputs `x` (n x l) with targets `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub columns: Vec<String>,
    pub target: String,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, columns: Vec<String>, target: String) -> Result<Self> {
        let ds = Dataset {
            x,
            y,
            columns,
            target,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::invalid("dataset has no rows"));
        }
        if self.x.nrows() != self.y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.nrows(),
                found: self.y.len(),
            });
        }
        if self.columns.len() != self.x.ncols() {
            return Err(Error::invalid("column names do not match input width"));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: DMatrix::from_fn(rows.len(), self.x.ncols(), |i, j| self.x[(rows[i], j)]),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            columns: self.columns.clone(),
            target: self.target.clone(),
        }
    }

    /// Load a CSV whose header names every column. The target defaults to the last column.
    pub fn from_csv_path(path: impl AsRef<Path>, target: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file, target)
    }

    pub fn from_csv_reader<R: Read>(reader: R, target: Option<&str>) -> Result<Self> {
        let table = read_table(reader)?;
        if table.header.is_empty() {
            return Err(Error::invalid("CSV has no header"));
        }
        let t = match target {
            Some(name) => table
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("target column `{name}` not found")))?,
            None => table.header.len() - 1,
        };
        if table.header.len() < 2 {
            return Err(Error::invalid("CSV needs at least one input column and a target"));
        }
        let inputs: Vec<usize> = (0..table.header.len()).filter(|&j| j != t).collect();
        let n = table.rows.len();
        let x = DMatrix::from_fn(n, inputs.len(), |i, j| table.rows[i][inputs[j]]);
        let y = table.rows.iter().map(|r| r[t]).collect();
        Dataset::new(
            x,
            y,
            inputs.iter().map(|&j| table.header[j].clone()).collect(),
            table.header[t].clone(),
        )
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.columns.clone();
        header.push(self.target.clone());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.y[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A parsed numeric CSV.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Read a numeric CSV with a header row. A completely empty input yields an empty table.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() == 1 && header[0].is_empty() {
        return Ok(Table::default());
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("row {}: `{s}` is not a number", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::invalid(format!("row {} has {} fields, header has {}", line + 1, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Select `columns` (by name) from a table as an input matrix; rows may be zero.
pub fn select_inputs(table: &Table, columns: &[String]) -> Result<DMatrix<f64>> {
    let idx = columns
        .iter()
        .map(|c| {
            table
                .header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Error::invalid(format!("input column `{c}` missing from CSV")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(table.rows.len(), idx.len(), |i, j| table.rows[i][idx[j]]))
}

/// Seeded split of `0..n` into (train, test) with `train_fraction` of rows in train.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }
    let n_train = ((n as f64) * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(format!("{n} rows are too few to split")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::tagged_stream(seed, "split", 0));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
