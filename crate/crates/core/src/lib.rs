//! Exact densities, asymptotic audits, rate functions and Monte Carlo
//! experiments for blocks of Haar-distributed orthogonal and Stiefel matrices.

pub mod asymptotics;
pub mod block;
pub mod density;
pub mod error;
pub mod experiments;
pub mod parallel;
pub mod quadrature;
pub mod rates;
pub mod sampling;
pub mod seed;
pub mod special;
pub mod stats;

pub use block::{frobenius_sq, gram_spectrum, BlockDims, MatrixBlock, SpectralSummary};
pub use error::{Error, Result};
pub use parallel::Execution;
pub use seed::{derive_replica_seed, Seed};
