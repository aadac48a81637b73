//! Haar-distributed Stiefel frames and orthogonal matrices, and the scaled
//! upper-left blocks cut from them.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::block::{BlockDims, MatrixBlock};
use crate::error::{Error, Result};
use crate::seed::Seed;

/// `m x n` matrix with orthonormal rows, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiefelFrame {
    m: usize,
    n: usize,
    entries: Vec<f64>,
}

impl StiefelFrame {
    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn to_block(&self) -> MatrixBlock {
        MatrixBlock::new(self.m, self.n, self.entries.clone()).expect("frame entries are finite")
    }

    /// `max |V Vᵀ - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.to_block().gram();
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Determinant of a square frame via LU.
    pub fn determinant(&self) -> Result<f64> {
        if self.m != self.n {
            return Err(Error::Dimension(format!(
                "determinant of non-square {}x{} frame",
                self.m, self.n
            )));
        }
        Ok(DMatrix::from_row_slice(self.m, self.n, &self.entries).determinant())
    }
}

/// Sorted scaled block entries: the empirical measure of the block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl EmpiricalSample {
    /// Wraps arbitrary values as a `1 x len` sample.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let cols = values.len();
        Self {
            values,
            rows: 1,
            cols,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `m x k` block of independent standard normals.
pub fn sample_gaussian_block(m: usize, k: usize, seed: Seed) -> Result<MatrixBlock> {
    if m == 0 || k == 0 {
        return Err(Error::Dimension(format!("empty gaussian block {m}x{k}")));
    }
    let mut rng = seed.rng();
    MatrixBlock::new(m, k, gaussian_vec(&mut rng, m * k))
}

/// Haar-distributed `m x n` frame: QR of an `n x m` Gaussian matrix with the
/// columns of `Q` multiplied by `sign(R_ii)`, then transposed.
pub fn sample_stiefel(m: usize, n: usize, seed: Seed) -> Result<StiefelFrame> {
    if m == 0 || m > n {
        return Err(Error::Dimension(format!(
            "Stiefel frame needs 1 <= m <= N, got m={m}, N={n}"
        )));
    }
    let mut rng = seed.rng();
    let rows = gaussian_vec(&mut rng, m * n);
    if m == 1 {
        let norm = rows.iter().map(|v| v * v).sum::<f64>().sqrt();
        return Ok(StiefelFrame {
            m,
            n,
            entries: rows.into_iter().map(|v| v / norm).collect(),
        });
    }
    // rows of the Gaussian matrix are the columns of `g`
    let g = DMatrix::from_column_slice(n, m, &rows);
    let qr = g.qr();
    let r = qr.r();
    let q = qr.q();
    let mut entries = Vec::with_capacity(m * n);
    for i in 0..m {
        let sign = if r[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        entries.extend(q.column(i).iter().map(|v| sign * v));
    }
    Ok(StiefelFrame { m, n, entries })
}

/// Haar-distributed `n x n` orthogonal matrix.
pub fn sample_haar_orthogonal(n: usize, seed: Seed) -> Result<StiefelFrame> {
    sample_stiefel(n, n, seed)
}

/// `sqrt(N)` times the upper-left `m x k` block of a frame with `N` columns.
pub fn scaled_block(v: &StiefelFrame, m: usize, k: usize) -> Result<MatrixBlock> {
    if m == 0 || k == 0 {
        return Err(Error::Dimension(format!("empty block request {m}x{k}")));
    }
    if m > v.m || k > v.n {
        return Err(Error::Dimension(format!(
            "{m}x{k} block exceeds {}x{} frame",
            v.m, v.n
        )));
    }
    let s = (v.n as f64).sqrt();
    let mut entries = Vec::with_capacity(m * k);
    for i in 0..m {
        entries.extend(v.entries[i * v.n..i * v.n + k].iter().map(|x| s * x));
    }
    MatrixBlock::new(m, k, entries)
}

/// Sorted entries of a (scaled) block.
pub fn empirical_sample(b: &MatrixBlock) -> EmpiricalSample {
    let mut values = b.entries().to_vec();
    values.sort_by(f64::total_cmp);
    EmpiricalSample {
        values,
        rows: b.rows(),
        cols: b.cols(),
    }
}

/// Upper-left `m x k` block of a Haar frame in `O(m²k + m³)` work.
///
/// Writing the frame's Gaussian rows as `[G₁ | G₂]`, the Gram–Schmidt frame
/// is `L⁻¹ [G₁ | G₂]` with `L = chol(G₁G₁ᵀ + G₂G₂ᵀ)`. Only `G₂G₂ᵀ` is needed
/// from the trailing columns and it is Wishart(`N-k`), which is drawn by the
/// Bartlett decomposition instead of materialising `G₂`.
pub fn sample_block(dims: BlockDims, seed: Seed) -> MatrixBlock {
    let BlockDims { n, m, k } = dims;
    let mut rng = seed.rng();
    let g1 = gaussian_vec(&mut rng, m * k);
    let dof = (n - k as u64) as f64;

    // Bartlett factor A (lower triangular), W = A Aᵀ
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        let chi = ChiSquared::new(dof - i as f64).expect("N >= m + k keeps dof positive");
        a[i * m + i] = chi.sample(&mut rng).sqrt();
        for j in 0..i {
            a[i * m + j] = rng.sample(StandardNormal);
        }
    }

    // S = G₁G₁ᵀ + A Aᵀ
    let mut s = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut v = 0.0;
            for l in 0..k {
                v += g1[i * k + l] * g1[j * k + l];
            }
            for l in 0..=j {
                v += a[i * m + l] * a[j * m + l];
            }
            s[i * m + j] = v;
        }
    }

    // in-place Cholesky of the lower triangle
    for j in 0..m {
        let mut d = s[j * m + j];
        for l in 0..j {
            d -= s[j * m + l] * s[j * m + l];
        }
        let d = d.sqrt();
        s[j * m + j] = d;
        for i in (j + 1)..m {
            let mut v = s[i * m + j];
            for l in 0..j {
                v -= s[i * m + l] * s[j * m + l];
            }
            s[i * m + j] = v / d;
        }
    }

    // forward substitution L X = G₁, column by column
    let mut x = g1;
    for c in 0..k {
        for i in 0..m {
            let mut v = x[i * k + c];
            for l in 0..i {
                v -= s[i * m + l] * x[l * k + c];
            }
            x[i * k + c] = v / s[i * m + i];
        }
    }
    MatrixBlock::new(m, k, x).expect("finite block")
}

/// `sqrt(N)` times [`sample_block`].
pub fn sample_scaled_block(dims: BlockDims, seed: Seed) -> MatrixBlock {
    sample_block(dims, seed).scaled(dims.n_f64().sqrt())
}
