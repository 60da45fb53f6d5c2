//! Maximum-likelihood fitting.

mod fit;
pub mod gradcheck;
mod likelihood;
pub mod optim;
mod param_space;

pub use fit::{fit, FitConfig, FittedModel, ProfileObjective, ResponseScaling, StartSummary};
pub use likelihood::{grad_neg_profile_loglik, mu_hat, neg_profile_loglik, ProfileValue};
pub use param_space::{Bounds, ParamSpace, Transform};
