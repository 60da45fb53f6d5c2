//! Gaussian-process emulation for computer experiments with quantitative
//! and qualitative inputs, built on additive, level-indicated covariance.

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod inference;
pub mod kernels;
pub mod lezgp;
pub mod linalg;
pub mod model_io;
pub mod predict;

pub use data::{
    load_dataset, load_inputs, normalize_quantitative, read_dataset, read_inputs, save_dataset,
    scan_schema, write_dataset, ColumnScaling, Dataset, MixedInput, ProblemSchema,
};
pub use error::{Error, Result};
pub use inference::{fit, FitConfig, FittedModel};
pub use kernels::{
    assemble_cov_matrix, baseline_cov, eezgp_cov, ezgp_cov, phi_star, BaselineParams, CovMatrix,
    EezgpParams, EzgpParams, ModelKind, ModelParams, ParamFamily,
};
pub use lezgp::{
    count_matching_levels, full_factorial_subset_size, lezgp_predict, recommend_ns,
    select_key_subset,
};
pub use model_io::{load_model, read_model, save_model, write_model};
pub use predict::{predict_batch, predict_one, PredictionResult};
