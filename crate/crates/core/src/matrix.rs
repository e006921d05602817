//! Dense complex matrix used for frames, sub-frames and decoding operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Dense complex matrix with at least one row and one column and only finite
/// entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<Complex64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return invalid(format!(
                "matrix must be non-empty, got {}x{}",
                inner.nrows(),
                inner.ncols()
            ));
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("matrix contains non-finite entries");
        }
        Ok(Self(inner))
    }

    /// Builds a `rows x cols` matrix from a function of `(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        Self::new(DMatrix::from_fn(rows, cols, f))
    }

    /// Row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[Complex64]) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn as_inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Euclidean norm of column `col`.
    pub fn column_norm(&self, col: usize) -> f64 {
        self.0.column(col).norm()
    }

    /// Matrix keeping only `cols`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols()) {
            return invalid(format!(
                "column index {bad} out of range for {} columns",
                self.cols()
            ));
        }
        Self::new(self.0.select_columns(cols.iter()))
    }

    /// `self * self^*`, the frame operator of the columns.
    pub fn frame_operator(&self) -> DMatrix<Complex64> {
        &self.0 * self.0.adjoint()
    }

    /// Largest entrywise modulus of `self - other`; `inf` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.0.shape() != other.0.shape() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(ComplexMatrix::new(DMatrix::zeros(0, 3)).is_err());
        let mut m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        m[(1, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(ComplexMatrix::new(m).is_err());
    }

    #[test]
    fn select_columns_checks_range() {
        let m = ComplexMatrix::from_fn(2, 4, |r, c| Complex64::new((r * 4 + c) as f64, 0.0))
            .unwrap();
        let s = m.select_columns(&[0, 2]).unwrap();
        assert_eq!(s.get(1, 1), Complex64::new(6.0, 0.0));
        assert!(m.select_columns(&[0, 5]).is_err());
    }
}
