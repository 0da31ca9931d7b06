//! Observation matrices and their (optional) ground truth.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Dag;

/// Known generating model attached to simulated data.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub dag: Option<Dag>,
}

/// `n x p` observations, rows are samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Self {
        Self { x, truth: None }
    }

    pub fn with_truth(x: DMatrix<f64>, truth: GroundTruth) -> Self {
        Self {
            x,
            truth: Some(truth),
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }

    pub fn column_means(&self) -> DVector<f64> {
        let n = self.n().max(1) as f64;
        DVector::from_fn(self.p(), |j, _| self.x.column(j).sum() / n)
    }

    /// Subtracts `means` from every row.
    pub fn centered_by(&self, means: &DVector<f64>) -> Dataset {
        let x = DMatrix::from_fn(self.n(), self.p(), |i, j| self.x[(i, j)] - means[j]);
        Dataset {
            x,
            truth: self.truth.clone(),
        }
    }

    pub fn centered(&self) -> Dataset {
        self.centered_by(&self.column_means())
    }

    /// Dataset made of the given rows (in that order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.x[(rows[i], j)]);
        Dataset {
            x,
            truth: self.truth.clone(),
        }
    }

    /// Reads headerless comma-separated values, one observation per line.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = Vec::new();
        let mut p = None;
        let mut n = 0;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Input(format!("csv: {e}")))?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            match p {
                None => p = Some(rec.len()),
                Some(p) if p != rec.len() => {
                    return Err(Error::Input(format!(
                        "ragged csv: row {} has {} fields, expected {p}",
                        line + 1,
                        rec.len()
                    )))
                }
                _ => {}
            }
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Input(format!(
                        "row {}: cannot parse {field:?} as a number",
                        line + 1
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Input(format!("row {}: non-finite value", line + 1)));
                }
                values.push(v);
            }
            n += 1;
        }
        let p = p.ok_or_else(|| Error::Input("empty csv".into()))?;
        Ok(Self::new(DMatrix::from_row_slice(n, p, &values)))
    }

    /// Writes headerless CSV using shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.p())
                .map(|j| format!("{:?}", self.x[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
