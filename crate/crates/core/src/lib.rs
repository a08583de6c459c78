//! Temporal Gaussian copula imputation for `N x T x F` multivariate
//! time-series tensors.
//!
//! Each sample is unfolded into one row of length `T*F`; every column gets
//! its own empirical (or ordinal) marginal, the latent correlation is fitted
//! by EM on the observed cells, and missing cells are filled with latent
//! conditional means mapped back through the marginals.
//!
//! ```
//! use tgc::{fit_impute, EmConfig, Layout, MtsTensor64};
//!
//! let mut x = MtsTensor64::from_fn(20, 3, 2, |i, t, f| (i + t * 2 + f) as f64).unwrap();
//! x.set(0, 1, 0, None);
//! let (_, out) = fit_impute(&x, &[], &EmConfig::default(), Layout::PatientRows).unwrap();
//! assert!(out.completed.is_complete());
//! ```

pub mod benchmark;
pub mod copula;
pub mod data;
pub mod error;
pub mod impute;
pub mod linalg;
pub mod marginals;
pub mod normal;
pub mod scalar;

pub use copula::{fit_em, CorrelationModel, EmConfig, FitDiagnostics, SecondMoment};
pub use data::{
    load_csv_long, mask_mcar, save_csv_long, unfold, unfold_timewise, unfold_with, ColumnKind,
    ColumnSpec, HeldOutCell, Layout, MaskedMatrix, MtsTensor, StandardizationParams,
    UnfoldedMatrix,
};
pub use error::{Error, Result};
pub use impute::{fit, fit_impute, impute, ImputationResult, ModelBundle, TgcModel};
pub use linalg::Matrix;
pub use marginals::{Marginal, MarginalSet};
pub use scalar::Scalar;

pub type MtsTensor64 = MtsTensor<f64>;
pub type MtsTensor32 = MtsTensor<f32>;
pub type Matrix64 = Matrix<f64>;
pub type CorrelationModel64 = CorrelationModel<f64>;
pub type TgcModel64 = TgcModel<f64>;
pub type TgcModel32 = TgcModel<f32>;
