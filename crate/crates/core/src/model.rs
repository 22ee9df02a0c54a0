//! Model dimensions and the per-batch design matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Shape of a mediation model: `p` mediators, `q` confounders and whether the
/// outcome and mediator regressions carry an intercept column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub p: usize,
    pub q: usize,
    pub intercept_outcome: bool,
    pub intercept_mediator: bool,
}

impl ModelDims {
    pub fn new(p: usize, q: usize) -> Self {
        ModelDims {
            p,
            q,
            intercept_outcome: false,
            intercept_mediator: false,
        }
    }

    pub fn with_intercepts(mut self, outcome: bool, mediator: bool) -> Self {
        self.intercept_outcome = outcome;
        self.intercept_mediator = mediator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("a mediation model needs at least one mediator (p >= 1)".into()));
        }
        Ok(())
    }

    /// Columns of the outcome design `[1?, X, M_1..M_p, Z_1..Z_q]`.
    pub fn outcome_dim(&self) -> usize {
        self.intercept_outcome as usize + 1 + self.p + self.q
    }

    /// Columns of the mediator design `[1?, X, Z_1..Z_q]`.
    pub fn mediator_dim(&self) -> usize {
        self.intercept_mediator as usize + 1 + self.q
    }

    /// Position of the exposure coefficient `γ` in the outcome coefficients.
    pub fn exposure_slot(&self) -> usize {
        self.intercept_outcome as usize
    }

    /// Position of `β_j` (0-based `j`) in the outcome coefficients.
    pub fn mediator_slot(&self, j: usize) -> usize {
        self.exposure_slot() + 1 + j
    }

    /// Position of `α_j` in each mediator regression's coefficients.
    pub fn alpha_slot(&self) -> usize {
        self.intercept_mediator as usize
    }

    /// Number of raw values in one observation: `Y, X, M_1..M_p, Z_1..Z_q`.
    pub fn raw_width(&self) -> usize {
        2 + self.p + self.q
    }
}

/// One batch of observations laid out as the design matrices both regressions need.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchData {
    /// Outcome vector.
    pub y: Vec<f64>,
    /// Outcome design, `n × outcome_dim`.
    pub w: Matrix,
    /// Mediator design, `n × mediator_dim`.
    pub s: Matrix,
    /// Mediator values, `n × p`.
    pub m: Matrix,
}

impl BatchData {
    /// Builds a batch from raw rows `[Y, X, M_1..M_p, Z_1..Z_q]`.
    pub fn from_rows<'a, I>(dims: &ModelDims, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let width = dims.raw_width();
        let mut flat = Vec::new();
        let mut n = 0;
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Input(format!(
                    "row {} has {} values, expected {width}",
                    i + 1,
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
            n += 1;
        }
        Self::from_flat(dims, n, &flat)
    }

    /// Builds a batch from column vectors.
    pub fn from_columns(dims: &ModelDims, y: &[f64], x: &[f64], m: &[Vec<f64>], z: &[Vec<f64>]) -> Result<Self> {
        let n = y.len();
        if m.len() != dims.p || z.len() != dims.q {
            return Err(Error::Input(format!(
                "got {} mediator and {} confounder columns, expected {} and {}",
                m.len(),
                z.len(),
                dims.p,
                dims.q
            )));
        }
        if x.len() != n || m.iter().chain(z).any(|c| c.len() != n) {
            return Err(Error::Input("all columns must have the same length".into()));
        }
        let width = dims.raw_width();
        let mut flat = Vec::with_capacity(n * width);
        for i in 0..n {
            flat.push(y[i]);
            flat.push(x[i]);
            flat.extend(m.iter().map(|c| c[i]));
            flat.extend(z.iter().map(|c| c[i]));
        }
        Self::from_flat(dims, n, &flat)
    }

    /// `flat` holds `n` raw rows back to back.
    pub fn from_flat(dims: &ModelDims, n: usize, flat: &[f64]) -> Result<Self> {
        dims.validate()?;
        let width = dims.raw_width();
        if n == 0 {
            return Err(Error::Input("a batch needs at least one observation".into()));
        }
        if flat.len() != n * width {
            return Err(Error::Input(format!(
                "raw buffer holds {} values, expected {n} rows of {width}",
                flat.len()
            )));
        }
        if let Some(pos) = flat.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite value in row {}, column {}",
                pos / width + 1,
                pos % width + 1
            )));
        }

        let (p, q) = (dims.p, dims.q);
        let d_out = dims.outcome_dim();
        let d_med = dims.mediator_dim();
        let mut y = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n * d_out);
        let mut s = Vec::with_capacity(n * d_med);
        let mut m = Vec::with_capacity(n * p);
        for row in flat.chunks_exact(width) {
            let x = row[1];
            let meds = &row[2..2 + p];
            let conf = &row[2 + p..2 + p + q];
            y.push(row[0]);
            if dims.intercept_outcome {
                w.push(1.0);
            }
            w.push(x);
            w.extend_from_slice(meds);
            w.extend_from_slice(conf);
            if dims.intercept_mediator {
                s.push(1.0);
            }
            s.push(x);
            s.extend_from_slice(conf);
            m.extend_from_slice(meds);
        }
        Ok(BatchData {
            y,
            w: Matrix::from_row_major(n, d_out, w)?,
            s: Matrix::from_row_major(n, d_med, s)?,
            m: Matrix::from_row_major(n, p, m)?,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Checks that the batch was built for `dims`.
    pub fn check_dims(&self, dims: &ModelDims) -> Result<()> {
        let n = self.y.len();
        let ok = n >= 1
            && self.w.rows() == n
            && self.s.rows() == n
            && self.m.rows() == n
            && self.w.cols() == dims.outcome_dim()
            && self.s.cols() == dims.mediator_dim()
            && self.m.cols() == dims.p;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "batch shape (n={n}, outcome {}x{}, mediator {}x{}, mediators {}x{}) does not match the model \
                 (p={}, q={}, outcome dim {}, mediator dim {})",
                self.w.rows(),
                self.w.cols(),
                self.s.rows(),
                self.s.cols(),
                self.m.rows(),
                self.m.cols(),
                dims.p,
                dims.q,
                dims.outcome_dim(),
                dims.mediator_dim()
            )))
        }
    }

    /// Concatenates batches built with the same dims.
    pub fn concat(batches: &[BatchData]) -> Result<BatchData> {
        let first = batches
            .first()
            .ok_or_else(|| Error::Input("nothing to concatenate".into()))?;
        let stack = |pick: fn(&BatchData) -> &Matrix| -> Result<Matrix> {
            let cols = pick(first).cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for b in batches {
                let mat = pick(b);
                if mat.cols() != cols {
                    return Err(Error::Input("cannot concatenate batches of different widths".into()));
                }
                data.extend_from_slice(mat.as_slice());
                rows += mat.rows();
            }
            Matrix::from_row_major(rows, cols, data)
        };
        Ok(BatchData {
            y: batches.iter().flat_map(|b| b.y.iter().copied()).collect(),
            w: stack(|b| &b.w)?,
            s: stack(|b| &b.s)?,
            m: stack(|b| &b.m)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_arithmetic() {
        let dims = ModelDims::new(2, 1).with_intercepts(true, true);
        assert_eq!(dims.outcome_dim(), 5);
        assert_eq!(dims.mediator_dim(), 3);
        assert_eq!(dims.exposure_slot(), 1);
        assert_eq!(dims.mediator_slot(0), 2);
        assert_eq!(dims.alpha_slot(), 1);

        let bare = ModelDims::new(5, 2);
        assert_eq!(bare.outcome_dim(), 8);
        assert_eq!(bare.mediator_dim(), 3);
        assert_eq!(bare.mediator_slot(4), 5);
    }

    #[test]
    fn zero_mediators_is_a_config_error() {
        assert!(matches!(ModelDims::new(0, 1).validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rows_are_split_into_both_designs() {
        let dims = ModelDims::new(2, 1).with_intercepts(true, false);
        let rows: [&[f64]; 2] = [&[1.0, 2.0, 3.0, 4.0, 5.0], &[6.0, 7.0, 8.0, 9.0, 10.0]];
        let b = BatchData::from_rows(&dims, rows).unwrap();
        assert_eq!(b.y, vec![1.0, 6.0]);
        assert_eq!(b.w.row(0), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(b.s.row(1), &[7.0, 10.0]);
        assert_eq!(b.m.row(1), &[8.0, 9.0]);
        b.check_dims(&dims).unwrap();
        assert!(b.check_dims(&ModelDims::new(2, 1)).is_err());
    }

    #[test]
    fn columns_and_rows_agree() {
        let dims = ModelDims::new(1, 1);
        let a = BatchData::from_columns(&dims, &[1.0, 2.0], &[3.0, 4.0], &[vec![5.0, 6.0]], &[vec![7.0, 8.0]]).unwrap();
        let rows: [&[f64]; 2] = [&[1.0, 3.0, 5.0, 7.0], &[2.0, 4.0, 6.0, 8.0]];
        assert_eq!(a, BatchData::from_rows(&dims, rows).unwrap());
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let dims = ModelDims::new(1, 0);
        assert!(BatchData::from_flat(&dims, 0, &[]).is_err());
        let err = BatchData::from_flat(&dims, 2, &[1.0, 2.0, 3.0, 1.0, f64::NAN, 1.0]).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }
}
