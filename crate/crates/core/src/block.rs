//! Block shapes, dense blocks and the spectral data of their Gram matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which negative Gram eigenvalues are treated as round-off.
pub const EIGEN_CLAMP_REL: f64 = 1e-10;

impl TryFrom<Vec<Vec<f64>>> for MatrixBlock {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<MatrixBlock> for Vec<Vec<f64>> {
    fn from(b: MatrixBlock) -> Self {
        b.entries.chunks(b.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Ambient dimension `n` and the `m x k` shape of the upper-left block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockDims {
    pub n: u64,
    pub m: usize,
    pub k: usize,
}

impl BlockDims {
    /// Checked constructor: `m, k >= 1` and `n >= m + k`.
    pub fn new(n: u64, m: usize, k: usize) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::Dimension(format!(
                "block must be at least 1x1, got {m}x{k}"
            )));
        }
        if n < (m + k) as u64 {
            return Err(Error::Dimension(format!(
                "ambient dimension N={n} must be at least m+k={}",
                m + k
            )));
        }
        Ok(Self { n, m, k })
    }

    /// Number of entries `p = m k`.
    pub fn p(&self) -> usize {
        self.m * self.k
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }
}

/// Dense real `rows x cols` matrix stored row-major.
///
/// Serializes as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MatrixBlock {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl MatrixBlock {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "block must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} block needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite block entry {bad}")));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "block must be at least 1x1");
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut b = Self::zeros(n, n);
        for i in 0..n {
            b.entries[i * n + i] = 1.0;
        }
        b
    }

    /// Builds a block from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries: out,
        }
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &MatrixBlock) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            for (l, a) in self.row(i).iter().enumerate() {
                let rrow = rhs.row(l);
                let orow = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            entries: out,
        })
    }

    /// Pads with zero rows and columns up to `rows x cols`.
    pub fn padded(&self, rows: usize, cols: usize) -> Self {
        assert!(rows >= self.rows && cols >= self.cols);
        let mut out = vec![0.0; rows * cols];
        for i in 0..self.rows {
            out[i * cols..i * cols + self.cols].copy_from_slice(self.row(i));
        }
        Self {
            rows,
            cols,
            entries: out,
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    /// `B Bᵀ` as an `m x m` matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.rows;
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// Eigen-data of the Gram matrix `B Bᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Non-increasing, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    pub trace_of_square: f64,
    pub op_norm: f64,
}

impl SpectralSummary {
    fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let trace = eigenvalues.iter().sum();
        let trace_of_square = eigenvalues.iter().map(|l| l * l).sum();
        let op_norm = eigenvalues.first().copied().unwrap_or(0.0);
        Self {
            eigenvalues,
            trace,
            trace_of_square,
            op_norm,
        }
    }

    /// `Σ λ_i^r`.
    pub fn power_trace(&self, r: i32) -> f64 {
        self.eigenvalues.iter().map(|l| l.powi(r)).sum()
    }
}

/// Eigenvalues of `B Bᵀ` from a symmetric eigensolver on the `m x m` Gram matrix.
pub fn gram_spectrum(b: &MatrixBlock) -> Result<SpectralSummary> {
    let g = b.gram();
    symmetric_spectrum(g)
}

pub(crate) fn symmetric_spectrum(g: DMatrix<f64>) -> Result<SpectralSummary> {
    let rows = g.nrows();
    if rows == 1 {
        return Ok(SpectralSummary::from_eigenvalues(vec![g[(0, 0)].max(0.0)]));
    }
    let max_abs = g.amax();
    let eig = SymmetricEigen::try_new(g, f64::EPSILON, 10_000)
        .ok_or(Error::Eigensolver { rows, max_abs })?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    let floor = -EIGEN_CLAMP_REL * top.max(max_abs);
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < floor {
                return Err(Error::Eigensolver { rows, max_abs });
            }
            *v = 0.0;
        }
    }
    Ok(SpectralSummary::from_eigenvalues(values))
}

/// `Σ b_ij²`.
pub fn frobenius_sq(b: &MatrixBlock) -> f64 {
    b.entries.iter().map(|v| v * v).sum()
}
