//! Datasets, reproducible index splits and CSV ingestion.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Random generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Returns the generator for `stream` under `seed`.
///
/// ChaCha is counter based, so distinct streams are independent and a given
/// `(seed, stream)` pair yields the same sequence on every platform and for
/// every worker count.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Covariates stored row-major plus one response per row.
///
/// Unsupervised data (density level sets) keeps the observation in `x` and
/// ignores `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from row-major covariates. Requires at least one row
    /// and finite entries everywhere.
    pub fn new(x: Vec<f64>, d: usize, y: Vec<f64>) -> Result<Self> {
        let data = Self::from_parts(x, d, y)?;
        if data.is_empty() {
            return Err(Error::config("dataset needs at least one observation"));
        }
        Ok(data)
    }

    /// Builds a dataset from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::config(format!(
                "row {bad} has {} entries, expected {d}",
                rows[bad].len()
            )));
        }
        Self::new(rows.concat(), d, y)
    }

    /// Unsupervised points (responses set to zero).
    pub fn from_points(x: Vec<f64>, d: usize) -> Result<Self> {
        let n = if d == 0 { 0 } else { x.len() / d };
        Self::new(x, d, vec![0.0; n])
    }

    /// Like [`Dataset::new`] but allows zero rows.
    pub(crate) fn from_parts(x: Vec<f64>, d: usize, y: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::config("dataset needs at least one covariate column"));
        }
        if x.len() != y.len() * d {
            return Err(Error::config(format!(
                "covariate buffer has {} entries, expected {} rows x {d} columns",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "non-finite covariate at row {}, column {}",
                i / d,
                i % d
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("non-finite response at row {i}")));
        }
        Ok(Self { x, y, d })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of covariate columns.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.d)
    }

    pub fn response(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Row-major covariate buffer.
    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    /// `(row, response)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.rows().zip(self.y.iter().copied())
    }

    /// Rows picked by `indices`, in that order. The result may be empty.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset { x, y, d: self.d }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.d != other.d {
            return Err(Error::config("cannot concatenate datasets of different dimension"));
        }
        let mut x = self.x.clone();
        x.extend_from_slice(&other.x);
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        Ok(Dataset { x, y, d: self.d })
    }

    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.d, &self.x)
    }

    pub fn response_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }

    /// Replaces the responses, keeping the covariates.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.len() {
            return Err(Error::config("response count does not match row count"));
        }
        Self::from_parts(self.x.clone(), self.d, y)
    }
}

/// A partition of `0..n` into ordered, disjoint parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub parts: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn part(&self, i: usize) -> &[usize] {
        &self.parts[i]
    }

    /// Applies the plan to `data`, one dataset per part.
    pub fn apply(&self, data: &Dataset) -> Vec<Dataset> {
        self.parts.iter().map(|p| data.subset(p)).collect()
    }
}

/// Uniformly random partition of `0..n` into parts of the given sizes.
/// Indices are zero based.
pub fn split(n: usize, sizes: &[usize], seed: u64) -> Result<SplitPlan> {
    split_with(n, sizes, seed, &mut stream_rng(seed, 0))
}

/// [`split`] drawing from an existing generator; `seed` is only recorded.
pub fn split_with(n: usize, sizes: &[usize], seed: u64, rng: &mut StreamRng) -> Result<SplitPlan> {
    let total: usize = sizes.iter().sum();
    if total != n {
        return Err(Error::config(format!(
            "split sizes {sizes:?} sum to {total}, expected {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &size in sizes {
        let mut part = order[start..start + size].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += size;
    }
    Ok(SplitPlan { parts, seed })
}

/// Splits `n` into `parts` sizes that differ by at most one, larger first.
pub fn even_sizes(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Loads a numeric CSV with a header row. `response_column` becomes `y`;
/// every other column becomes a covariate, in file order.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, response_column)
}

/// Reader-based variant of [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, response_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: 0,
            message: e.to_string(),
        })?
        .clone();
    let target = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::Parse {
            row: 0,
            column: 0,
            message: format!("response column `{response_column}` not found"),
        })?;
    let width = headers.len();
    if width < 2 {
        return Err(Error::Parse {
            row: 0,
            column: 0,
            message: "need at least one covariate column besides the response".into(),
        });
    }

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // header is row 1 in file coordinates
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("`{field}` is not finite"),
                });
            }
            if j == target {
                y.push(value);
            } else {
                x.push(value);
            }
        }
    }
    Dataset::new(x, width - 1, y)
}
