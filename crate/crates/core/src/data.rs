//! Sample containers, discrete probability measures and CSV ingestion.
//!
//! Sample files carry a header `x1,..,x{dx},y1,..,y{dy}` followed by one
//! decimal row per observation. Return tables carry `date,<name>,..` with
//! `YYYYMM` dates and returns quoted in percent.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights this far below zero are treated as round-off and clamped.
pub const NEGATIVE_WEIGHT_CLAMP: f64 = 1e-15;

/// Paired observations `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    covariates: Vec<Vec<f64>>,
    outcomes: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(covariates: Vec<Vec<f64>>, outcomes: Vec<Vec<f64>>) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::invalid("dataset needs at least one row"));
        }
        if covariates.len() != outcomes.len() {
            return Err(Error::invalid(format!(
                "covariates have {} rows but outcomes have {}",
                covariates.len(),
                outcomes.len()
            )));
        }
        check_rectangular(&covariates, "covariates")?;
        check_rectangular(&outcomes, "outcomes")?;
        if outcomes[0].is_empty() {
            return Err(Error::invalid("outcomes need at least one column"));
        }
        Ok(Dataset {
            covariates,
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn dim_x(&self) -> usize {
        self.covariates[0].len()
    }

    pub fn dim_y(&self) -> usize {
        self.outcomes[0].len()
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn outcomes(&self) -> &[Vec<f64>] {
        &self.outcomes
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        Dataset::new(
            self.covariates[range.clone()].to_vec(),
            self.outcomes[range].to_vec(),
        )
    }

    /// Uniformly weighted empirical measure of the outcomes.
    pub fn empirical_outcomes(&self) -> DiscreteMeasure {
        DiscreteMeasure::uniform(self.outcomes.clone())
            .expect("dataset invariants guarantee a valid measure")
    }
}

fn check_rectangular(rows: &[Vec<f64>], what: &str) -> Result<()> {
    let width = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::invalid(format!(
                "{what} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{what} row {i} has a non-finite entry")));
        }
    }
    Ok(())
}

/// Finitely supported probability measure `sum_i w_i delta_{support_i}`.
///
/// Zero-weight atoms are kept so callers can rely on atom positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    support: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates, clamps tiny negative weights and renormalizes to unit mass.
    pub fn new(support: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("measure needs at least one atom"));
        }
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                found: weights.len(),
            });
        }
        if support[0].is_empty() {
            return Err(Error::invalid("support points need at least one coordinate"));
        }
        check_rectangular(&support, "support")?;
        let mut weights = weights;
        for (i, w) in weights.iter_mut().enumerate() {
            if w.is_nan() || w.is_infinite() {
                return Err(Error::invalid(format!("weight {i} is not finite")));
            }
            if *w < 0.0 {
                if *w < -NEGATIVE_WEIGHT_CLAMP {
                    return Err(Error::invalid(format!("weight {i} is negative ({w})")));
                }
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("all weights are zero"));
        }
        // Already-normalized vectors are left untouched so construction is idempotent.
        if (total - 1.0).abs() > 1e-14 {
            for w in &mut weights {
                *w /= total;
            }
        }
        Ok(DiscreteMeasure { support, weights })
    }

    pub fn uniform(support: Vec<Vec<f64>>) -> Result<Self> {
        let n = support.len();
        DiscreteMeasure::new(support, vec![1.0 / n.max(1) as f64; n])
    }

    /// Scalar atoms.
    pub fn from_scalars(points: &[f64], weights: &[f64]) -> Result<Self> {
        DiscreteMeasure::new(points.iter().map(|&p| vec![p]).collect(), weights.to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.support
            .iter()
            .map(Vec::as_slice)
            .zip(self.weights.iter().copied())
    }

    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms().map(|(y, w)| w * f(y)).sum()
    }
}

/// Builds a measure from raw atoms; see [`DiscreteMeasure::new`].
pub fn make_measure(support: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(support, weights)
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(text)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let value: f64 = cell.parse().map_err(|_| Error::Parse {
        row,
        message: format!("column {}: cannot parse {cell:?} as a number", col + 1),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column {}: non-finite value {cell:?}", col + 1),
        });
    }
    Ok(value)
}

fn csv_row(record: csv::Result<csv::StringRecord>) -> Result<(usize, csv::StringRecord)> {
    let record = record.map_err(|e| Error::Parse {
        row: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    })?;
    let row = record.position().map_or(0, |p| p.line() as usize);
    Ok((row, record))
}

/// Reads a sample file whose first `dim_x` columns are covariates.
pub fn load_samples_csv(path: impl AsRef<Path>, dim_x: usize) -> Result<Dataset> {
    parse_samples_csv(&read_to_string(path.as_ref())?, dim_x)
}

pub fn parse_samples_csv(text: &str, dim_x: usize) -> Result<Dataset> {
    let mut records = reader(text).into_records();
    let (header_row, header) = match records.next() {
        Some(r) => csv_row(r)?,
        None => return Err(Error::invalid("empty file: missing header")),
    };
    let columns = header.len();
    if dim_x >= columns {
        return Err(Error::invalid(format!(
            "dim_x = {dim_x} leaves no outcome column (file has {columns} columns)"
        )));
    }
    let dim_y = columns - dim_x;
    for (j, name) in header.iter().enumerate() {
        let expected = if j < dim_x {
            format!("x{}", j + 1)
        } else {
            format!("y{}", j - dim_x + 1)
        };
        if name != expected {
            return Err(Error::Parse {
                row: header_row,
                message: format!("header column {} is {name:?}, expected {expected:?}", j + 1),
            });
        }
    }

    let mut covariates = Vec::new();
    let mut outcomes = Vec::new();
    for record in records {
        let (row, record) = csv_row(record)?;
        if record.len() != columns {
            return Err(Error::Parse {
                row,
                message: format!("expected {columns} columns, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(j, cell)| parse_cell(cell, row, j))
            .collect::<Result<Vec<_>>>()?;
        covariates.push(values[..dim_x].to_vec());
        outcomes.push(values[dim_x..].to_vec());
    }
    if outcomes.is_empty() {
        return Err(Error::invalid("no data rows"));
    }
    debug_assert!(outcomes.iter().all(|o| o.len() == dim_y));
    Dataset::new(covariates, outcomes)
}

/// Reads a discrete measure with header `w,y1,...,yd`: one atom per row, the
/// mass first. Masses are normalized.
pub fn load_measure_csv(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    parse_measure_csv(&read_to_string(path.as_ref())?)
}

pub fn parse_measure_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut records = reader(text).into_records();
    let (header_row, header) = match records.next() {
        Some(r) => csv_row(r)?,
        None => return Err(Error::invalid("empty file: missing header")),
    };
    let columns = header.len();
    let expected = |j: usize| if j == 0 { "w".to_string() } else { format!("y{j}") };
    if columns < 2 {
        return Err(Error::Parse {
            row: header_row,
            message: "header must be `w,y1,...`".into(),
        });
    }
    for (j, name) in header.iter().enumerate() {
        if name != expected(j) {
            return Err(Error::Parse {
                row: header_row,
                message: format!("header column {} is {name:?}, expected {:?}", j + 1, expected(j)),
            });
        }
    }
    let (mut support, mut weights) = (Vec::new(), Vec::new());
    for record in records {
        let (row, record) = csv_row(record)?;
        if record.len() != columns {
            return Err(Error::Parse {
                row,
                message: format!("expected {columns} columns, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(j, cell)| parse_cell(cell, row, j))
            .collect::<Result<Vec<_>>>()?;
        weights.push(values[0]);
        support.push(values[1..].to_vec());
    }
    if support.is_empty() {
        return Err(Error::invalid("no data rows"));
    }
    DiscreteMeasure::new(support, weights)
}

/// Lossless decimal form (17 significant digits).
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_samples_csv(data: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    let header: Vec<String> = (1..=data.dim_x())
        .map(|j| format!("x{j}"))
        .chain((1..=data.dim_y()).map(|j| format!("y{j}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (x, y) in data.covariates().iter().zip(data.outcomes()) {
        let cells: Vec<String> = x.iter().chain(y).map(|&v| format_real(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Monthly return table: dates as `YYYYMM`, returns already in decimal form.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsTable {
    pub dates: Vec<u32>,
    pub names: Vec<String>,
    pub returns: Vec<Vec<f64>>,
}

impl ReturnsTable {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Dataset whose covariates are the same-month returns. Lagging is left to
    /// the consumer.
    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.returns.clone(), self.returns.clone())
    }

    /// Dataset whose covariates are taken from `factors`, matched by date.
    pub fn with_factors(&self, factors: &ReturnsTable) -> Result<Dataset> {
        let mut covariates = Vec::with_capacity(self.len());
        for date in &self.dates {
            let k = factors
                .dates
                .binary_search(date)
                .map_err(|_| Error::invalid(format!("factor table has no row for {date}")))?;
            covariates.push(factors.returns[k].clone());
        }
        Dataset::new(covariates, self.returns.clone())
    }
}

pub fn load_returns_table(path: impl AsRef<Path>) -> Result<ReturnsTable> {
    parse_returns_csv(&read_to_string(path.as_ref())?)
}

/// Reads a percent-return table; covariates mirror the outcomes.
pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_returns_table(path)?.to_dataset()
}

pub fn parse_returns_csv(text: &str) -> Result<ReturnsTable> {
    let mut records = reader(text).into_records();
    let (header_row, header) = match records.next() {
        Some(r) => csv_row(r)?,
        None => return Err(Error::invalid("empty file: missing header")),
    };
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Parse {
            row: header_row,
            message: "header must be `date,<name>,...`".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let columns = header.len();

    let mut dates: Vec<u32> = Vec::new();
    let mut returns = Vec::new();
    for record in records {
        let (row, record) = csv_row(record)?;
        if record.len() != columns {
            return Err(Error::Parse {
                row,
                message: format!("expected {columns} columns, found {}", record.len()),
            });
        }
        let date = parse_date(&record[0]).ok_or_else(|| Error::Parse {
            row,
            message: format!("bad date {:?}, expected YYYYMM", &record[0]),
        })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::Parse {
                    row,
                    message: format!("dates not increasing ({prev} then {date})"),
                });
            }
        }
        let values = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, cell)| parse_cell(cell, row, j).map(|v| v / 100.0))
            .collect::<Result<Vec<_>>>()?;
        dates.push(date);
        returns.push(values);
    }
    if dates.is_empty() {
        return Err(Error::invalid("no data rows"));
    }
    Ok(ReturnsTable {
        dates,
        names,
        returns,
    })
}

fn parse_date(cell: &str) -> Option<u32> {
    if cell.len() != 6 || !cell.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let value: u32 = cell.parse().ok()?;
    let month = value % 100;
    (1..=12).contains(&month).then_some(value)
}
