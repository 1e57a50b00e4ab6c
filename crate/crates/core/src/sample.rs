use crate::{Error, Result};

/// `n` observations in `[0,1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    data: Vec<f64>,
}

impl Sample {
    /// Builds a sample from row-major data. Every coordinate must lie in `[0,1]`.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSample("dimension must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::InvalidSample("sample is empty".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidSample(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidSample(format!(
                "row {} column {} = {} is outside [0,1]",
                pos / dim + 1,
                pos % dim + 1,
                data[pos]
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidSample(format!(
                    "row {} has {} columns, expected {dim}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// One-dimensional sample from scalar observations.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Contiguous rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "row range {start}..{end} invalid for {} rows",
                self.len()
            )));
        }
        Ok(Self {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        })
    }

    /// Coordinate `axis` (0-based) of rows `start..end` as a one-dimensional sample.
    pub fn axis_sample(&self, axis: usize, start: usize, end: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange {
                axis: axis + 1,
                dim: self.dim,
            });
        }
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "row range {start}..{end} invalid for {} rows",
                self.len()
            )));
        }
        Ok(Self {
            dim: 1,
            data: (start..end).map(|i| self.row(i)[axis]).collect(),
        })
    }

    /// Sample with rows reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in perm {
            data.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            data,
        }
    }
}
