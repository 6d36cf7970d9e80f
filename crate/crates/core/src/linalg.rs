//! Dense square matrices and LU solves with a relative pivot test.

use std::ops::{Index, IndexMut};

use thiserror::Error;

/// A pivot smaller than this fraction of the largest input entry marks the
/// matrix as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    size: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size);
        for i in 0..size {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let size = rows.len();
        let mut m = Self::zeros(size);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), size, "row {i} has the wrong length");
            m.data[i * size..(i + 1) * size].copy_from_slice(row);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.size)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.size + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.size + j]
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("dimension mismatch: {rows}x{rows} matrix with right-hand side of length {rhs}")]
pub struct DimensionMismatch {
    pub rows: usize,
    pub rhs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// `None` exactly when `singular`.
    pub solution: Option<Vec<f64>>,
    pub singular: bool,
    /// Smallest |pivot| over the largest initial |entry|.
    pub pivot_ratio: f64,
}

/// Solves `a·x = rhs` by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Matrix, rhs: &[f64]) -> Result<SolveReport, DimensionMismatch> {
    let n = a.size();
    if rhs.len() != n {
        return Err(DimensionMismatch {
            rows: n,
            rhs: rhs.len(),
        });
    }
    let scale = a.max_abs();
    if n == 0 {
        return Ok(SolveReport {
            solution: Some(Vec::new()),
            singular: false,
            pivot_ratio: 1.0,
        });
    }
    if scale == 0.0 || !scale.is_finite() {
        return Ok(SolveReport {
            solution: None,
            singular: true,
            pivot_ratio: 0.0,
        });
    }

    let mut lu = a.clone();
    let mut x = rhs.to_vec();
    let mut min_pivot = f64::INFINITY;

    for col in 0..n {
        let (pivot_row, pivot_mag) =
            (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        min_pivot = min_pivot.min(pivot_mag);
        if pivot_mag < SINGULAR_PIVOT_RATIO * scale {
            return Ok(SolveReport {
                solution: None,
                singular: true,
                pivot_ratio: pivot_mag / scale,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                lu.data.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
        }
        let pivot = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            lu[(r, col)] = factor;
            for j in col + 1..n {
                lu[(r, j)] -= factor * lu[(col, j)];
            }
            x[r] -= factor * x[col];
        }
    }

    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|j| lu[(i, j)] * x[j]).sum();
        x[i] = (x[i] - tail) / lu[(i, i)];
    }

    Ok(SolveReport {
        solution: Some(x),
        singular: false,
        pivot_ratio: min_pivot / scale,
    })
}
