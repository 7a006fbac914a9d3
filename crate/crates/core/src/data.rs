//! Sample ingestion and evaluation grids: loading and validating CSV
//! observational data, and building the outcome / treatment-effect grids on
//! which all curves are evaluated.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Column names for the outcome, treatment, and covariates in a CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMap {
    pub y: String,
    pub d: String,
    pub x: Vec<String>,
}

/// A validated observational sample `(Y_i, D_i, X_i)`, immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct ObservationTable {
    y: Vec<f64>,
    d: Vec<u8>,
    x: Vec<f64>, // row-major, n * d_x
    d_x: usize,
}

impl ObservationTable {
    /// Validates and builds a table. Requires n >= 2, both treatment arms
    /// present, and finite outcome/covariate values.
    pub fn new(y: Vec<f64>, d: Vec<u8>, x_rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if d.len() != n || x_rows.len() != n {
            return Err(Error::LengthMismatch(format!(
                "y has {n} rows, d has {}, x has {}",
                d.len(),
                x_rows.len()
            )));
        }
        if n < 2 {
            return Err(Error::InsufficientSample(n));
        }
        let d_x = x_rows[0].len();
        if d_x == 0 {
            return Err(Error::InvalidParam("need at least one covariate".into()));
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    column: "y".into(),
                    row: i,
                });
            }
        }
        let mut x = Vec::with_capacity(n * d_x);
        for (i, row) in x_rows.iter().enumerate() {
            if row.len() != d_x {
                return Err(Error::LengthMismatch(format!(
                    "x row {i} has {} entries, expected {d_x}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        column: "x".into(),
                        row: i,
                    });
                }
                x.push(v);
            }
        }
        if !d.contains(&1) {
            return Err(Error::MissingArm(1));
        }
        if !d.contains(&0) {
            return Err(Error::MissingArm(0));
        }
        if d.iter().any(|&v| v > 1) {
            return Err(Error::NonBinaryTreatment {
                row: d.iter().position(|&v| v > 1).unwrap(),
                value: d[d.iter().position(|&v| v > 1).unwrap()].to_string(),
            });
        }
        Ok(Self { y, d, x, d_x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d_x(&self) -> usize {
        self.d_x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    /// Covariate row `i`, length `d_x`.
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d_x..(i + 1) * self.d_x]
    }

    /// Covariate column `j`, length `n`.
    pub fn x_col(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.x[i * self.d_x + j]).collect()
    }
}

/// Report accompanying a loaded table: how many raw rows were read and how
/// many were dropped for missing fields.
#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || matches!(
            c.to_ascii_lowercase().as_str(),
            "na" | "nan" | "n/a" | "null" | "."
        )
}

/// Loads a CSV file with a header row into an [`ObservationTable`]. Rows with
/// missing fields are dropped and counted in the report; non-numeric cells and
/// non-binary treatment values are errors.
pub fn load_csv<P: AsRef<Path>>(path: P, map: &ColumnMap) -> Result<(ObservationTable, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_idx = find(&map.y)?;
    let d_idx = find(&map.d)?;
    let x_idx: Vec<usize> = map.x.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut d = Vec::new();
    let mut x_rows = Vec::new();
    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        rows_read += 1;

        let parse = |idx: usize, column: &str| -> Result<Option<f64>> {
            let cell = record.get(idx).unwrap_or("");
            if is_missing(cell) {
                return Ok(None);
            }
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                Ok(_) => Ok(None), // parsed infinities count as missing
                Err(_) => Err(Error::NonNumericCell {
                    column: column.to_string(),
                    row,
                    value: cell.to_string(),
                }),
            }
        };

        let yv = parse(y_idx, &map.y)?;
        let dv = parse(d_idx, &map.d)?;
        let mut xs = Vec::with_capacity(x_idx.len());
        let mut x_missing = false;
        for (j, &idx) in x_idx.iter().enumerate() {
            match parse(idx, &map.x[j])? {
                Some(v) => xs.push(v),
                None => x_missing = true,
            }
        }

        match (yv, dv, x_missing) {
            (Some(yv), Some(dv), false) => {
                if dv == 0.0 {
                    d.push(0u8);
                } else if dv == 1.0 {
                    d.push(1u8);
                } else {
                    return Err(Error::NonBinaryTreatment {
                        row,
                        value: format!("{dv}"),
                    });
                }
                y.push(yv);
                x_rows.push(xs);
            }
            _ => rows_dropped += 1,
        }
    }

    let table = ObservationTable::new(y, d, x_rows)?;
    Ok((table, IngestReport { rows_read, rows_dropped }))
}

/// Writes a table back to CSV with the same column names. Values use the
/// shortest representation that round-trips exactly, so load/write/load is
/// lossless.
pub fn write_csv<W: Write>(table: &ObservationTable, map: &ColumnMap, mut w: W) -> Result<()> {
    let mut header = vec![map.y.clone(), map.d.clone()];
    header.extend(map.x.iter().cloned());
    writeln!(w, "{}", header.join(","))?;
    for i in 0..table.n() {
        let mut cells = vec![format!("{}", table.y()[i]), format!("{}", table.d()[i])];
        for v in table.x_row(i) {
            cells.push(format!("{v}"));
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Evaluation grids for the outcome support, the treatment-effect support,
/// and the conditioning point. Immutable and shared across workers.
#[derive(Debug, Clone)]
pub struct EvalGrids {
    pub y_grid: Arc<[f64]>,
    pub delta_grid: Arc<[f64]>,
    pub x0: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .collect()
}

/// Builds equally spaced evaluation grids. The outcome grid spans the sample
/// range padded by `pad * range(y)` on each side; the treatment-effect grid
/// spans `[-(1 + 2 pad) range(y), +(1 + 2 pad) range(y)]`.
pub fn make_grids(
    table: &ObservationTable,
    x0: Vec<f64>,
    m_y: usize,
    m_delta: usize,
    pad: f64,
) -> Result<EvalGrids> {
    make_grids_custom(table, x0, m_y, m_delta, pad, None)
}

/// Like [`make_grids`] but with an explicit override for the
/// treatment-effect range.
pub fn make_grids_custom(
    table: &ObservationTable,
    x0: Vec<f64>,
    m_y: usize,
    m_delta: usize,
    pad: f64,
    delta_range: Option<(f64, f64)>,
) -> Result<EvalGrids> {
    if m_y < 3 || m_delta < 3 {
        return Err(Error::InvalidGrid("grid sizes must be at least 3".into()));
    }
    if !pad.is_finite() || pad < 0.0 {
        return Err(Error::InvalidGrid("pad must be nonnegative".into()));
    }
    if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("x0 must be finite and nonempty".into()));
    }
    let y_min = table.y().iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = table.y().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = y_max - y_min;
    if range <= 0.0 {
        return Err(Error::DegenerateOutcome);
    }
    let y_grid = linspace(y_min - pad * range, y_max + pad * range, m_y);
    let (d_lo, d_hi) = match delta_range {
        Some((lo, hi)) => {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidGrid("delta range must satisfy lo < hi".into()));
            }
            (lo, hi)
        }
        None => {
            let span = (1.0 + 2.0 * pad) * range;
            (-span, span)
        }
    };
    let delta_grid = linspace(d_lo, d_hi, m_delta);
    Ok(EvalGrids {
        y_grid: Arc::from(y_grid.into_boxed_slice()),
        delta_grid: Arc::from(delta_grid.into_boxed_slice()),
        x0,
    })
}
