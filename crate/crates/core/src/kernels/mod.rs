//! Covariance functions for mixed quantitative/qualitative inputs.
//!
//! Two additive-indicator families ([`EzgpParams`], [`EezgpParams`]) start
//! from a base Gaussian process over the quantitative inputs and add one
//! adjustment process per qualitative factor that is active only between
//! inputs sharing that factor's level. Six baselines ([`BaselineParams`])
//! instead correlate qualitative levels through a per-factor correlation
//! matrix, combined multiplicatively or additively with a Gaussian kernel.

mod assemble;
mod baseline;
mod ezgp;
mod phistar;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{MixedInput, ProblemSchema};
use crate::error::{Error, Result};

pub use assemble::{
    assemble_cov_matrix, assemble_elementwise, assemble_schur_dense, expansion_matrix,
    level_selector, CovMatrix,
};
pub use baseline::{
    baseline_cov, tau_qual, uc_lower_factor, BaselineParams, QualCorr, QuantStructure,
};
pub use ezgp::{eezgp_cov, ezgp_cov, EezgpParams, EzgpParams};
pub use phistar::{compare_orderings, example_inputs, phi_star, PairOrdering};

pub(crate) use assemble::assemble_prepared;

/// Smallest correlation parameter accepted anywhere.
pub const THETA_MIN: f64 = 1e-6;
/// Guard keeping hypersphere angles strictly inside `(0, pi)`.
pub const ANGLE_EPS: f64 = 1e-6;

/// Gaussian correlation `exp{-sum_k theta_k (x_ik - x_jk)^2}`.
pub fn gauss_corr(xi: &[f64], xj: &[f64], theta: &[f64]) -> Result<f64> {
    if xi.len() != xj.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            got: xj.len(),
        });
    }
    if theta.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            got: theta.len(),
        });
    }
    if let Some(t) = theta.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "correlation parameter {t} is not positive"
        )));
    }
    Ok(gauss(xi, xj, theta))
}

#[inline]
pub(crate) fn gauss(xi: &[f64], xj: &[f64], theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..theta.len() {
        let d = xi[k] - xj[k];
        s += theta[k] * d * d;
    }
    (-s).exp()
}

#[inline]
pub(crate) fn weighted_sq(sq: &[f64], theta: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..theta.len() {
        s += theta[k] * sq[k];
    }
    s
}

#[inline]
pub(crate) fn sq_dist_into(xi: &[f64], xj: &[f64], out: &mut [f64]) {
    for k in 0..out.len() {
        let d = xi[k] - xj[k];
        out[k] = d * d;
    }
}

/// The eight fit-able covariance models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ezgp,
    Eezgp,
    Ec,
    Mc,
    Uc,
    AdEc,
    AdMc,
    AdUc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Ezgp,
        ModelKind::Eezgp,
        ModelKind::Ec,
        ModelKind::Mc,
        ModelKind::Uc,
        ModelKind::AdEc,
        ModelKind::AdMc,
        ModelKind::AdUc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ezgp => "ezgp",
            ModelKind::Eezgp => "eezgp",
            ModelKind::Ec => "ec",
            ModelKind::Mc => "mc",
            ModelKind::Uc => "uc",
            ModelKind::AdEc => "ad_ec",
            ModelKind::AdMc => "ad_mc",
            ModelKind::AdUc => "ad_uc",
        }
    }

    pub fn is_indicator(self) -> bool {
        matches!(self, ModelKind::Ezgp | ModelKind::Eezgp)
    }

    pub fn is_additive_baseline(self) -> bool {
        matches!(self, ModelKind::AdEc | ModelKind::AdMc | ModelKind::AdUc)
    }

    /// Number of scalar parameters including the constant mean.
    pub fn param_count(self, schema: &ProblemSchema) -> usize {
        self.free_param_count(schema) + 1
    }

    /// Number of covariance parameters the optimizer sees (mean profiled out).
    pub fn free_param_count(self, schema: &ProblemSchema) -> usize {
        let p = schema.p();
        let q = schema.q();
        let sum_m = schema.total_levels();
        let uc_angles: usize = schema.levels().iter().map(|m| m * (m - 1) / 2).sum();
        match self {
            ModelKind::Ezgp => 1 + p + q + p * sum_m,
            ModelKind::Eezgp => 1 + p + sum_m,
            ModelKind::Ec => 1 + p + q,
            ModelKind::Mc => 1 + p + sum_m,
            ModelKind::Uc => 1 + p + uc_angles,
            ModelKind::AdEc => q + q * p + q,
            ModelKind::AdMc => q + q * p + sum_m,
            ModelKind::AdUc => q + q * p + uc_angles,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| {
                let valid: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidParameter(format!(
                    "unknown model '{s}'; valid kinds: {}",
                    valid.join(", ")
                ))
            })
    }
}

/// Grouping of free parameters used for reporting gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamFamily {
    /// Process variances.
    Sigma2,
    /// Base-process correlation parameters.
    Theta0,
    /// Level-specific adjustment correlation parameters.
    ThetaAdjust,
    /// Quantitative correlation parameters of the baselines.
    Theta,
    /// Exchangeable level correlation `c`.
    EcCorrelation,
    /// Per-level parameters of the multiplicative level correlation.
    McLevel,
    /// Hypersphere angles of the unrestrictive level correlation.
    UcAngle,
}

impl ParamFamily {
    pub fn name(self) -> &'static str {
        match self {
            ParamFamily::Sigma2 => "sigma2",
            ParamFamily::Theta0 => "theta0",
            ParamFamily::ThetaAdjust => "theta_adjust",
            ParamFamily::Theta => "theta",
            ParamFamily::EcCorrelation => "ec_c",
            ParamFamily::McLevel => "mc_level",
            ParamFamily::UcAngle => "uc_angle",
        }
    }
}

/// Hyperparameters of any fit-able model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Ezgp(EzgpParams),
    Eezgp(EezgpParams),
    Baseline(BaselineParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Ezgp(_) => ModelKind::Ezgp,
            ModelParams::Eezgp(_) => ModelKind::Eezgp,
            ModelParams::Baseline(b) => b.kind(),
        }
    }

    pub fn mu(&self) -> f64 {
        match self {
            ModelParams::Ezgp(p) => p.mu,
            ModelParams::Eezgp(p) => p.mu,
            ModelParams::Baseline(p) => p.mu,
        }
    }

    pub fn set_mu(&mut self, mu: f64) {
        match self {
            ModelParams::Ezgp(p) => p.mu = mu,
            ModelParams::Eezgp(p) => p.mu = mu,
            ModelParams::Baseline(p) => p.mu = mu,
        }
    }

    pub fn validate(&self, schema: &ProblemSchema) -> Result<()> {
        match self {
            ModelParams::Ezgp(p) => p.validate(schema),
            ModelParams::Eezgp(p) => p.validate(schema),
            ModelParams::Baseline(p) => p.validate(schema),
        }
    }

    /// Prior variance `cov(w, w)`, identical for every input.
    pub fn variance(&self) -> f64 {
        match self {
            ModelParams::Ezgp(p) => p.sigma2.iter().sum(),
            ModelParams::Eezgp(p) => p.sigma2.iter().sum(),
            ModelParams::Baseline(p) => p.variance(),
        }
    }

    /// Pairwise covariance; inputs must already satisfy the schema.
    pub fn cov(&self, a: &MixedInput, b: &MixedInput) -> f64 {
        match self {
            ModelParams::Ezgp(p) => p.cov_unchecked(a, b),
            ModelParams::Eezgp(p) => p.cov_unchecked(a, b),
            ModelParams::Baseline(p) => p.prepare().cov(a, b),
        }
    }

    /// Free covariance parameters in layout order (natural scale).
    pub fn natural(&self) -> Vec<f64> {
        match self {
            ModelParams::Ezgp(p) => p.natural(),
            ModelParams::Eezgp(p) => p.natural(),
            ModelParams::Baseline(p) => p.natural(),
        }
    }

    /// Same shape with free parameters replaced from `v` (natural scale).
    pub fn with_natural(&self, v: &[f64]) -> ModelParams {
        match self {
            ModelParams::Ezgp(p) => ModelParams::Ezgp(p.with_natural(v)),
            ModelParams::Eezgp(p) => ModelParams::Eezgp(p.with_natural(v)),
            ModelParams::Baseline(p) => ModelParams::Baseline(p.with_natural(v)),
        }
    }

    pub fn families(&self) -> Vec<ParamFamily> {
        match self {
            ModelParams::Ezgp(p) => p.families(),
            ModelParams::Eezgp(p) => p.families(),
            ModelParams::Baseline(p) => p.families(),
        }
    }

    /// Canonical starting point for `kind`: unit correlation parameters,
    /// variances splitting `total_var` evenly, neutral level correlations.
    pub fn canonical(kind: ModelKind, schema: &ProblemSchema, total_var: f64) -> ModelParams {
        match kind {
            ModelKind::Ezgp => ModelParams::Ezgp(EzgpParams::uniform(schema, total_var, 1.0)),
            ModelKind::Eezgp => ModelParams::Eezgp(EezgpParams::uniform(schema, total_var, 1.0)),
            _ => ModelParams::Baseline(BaselineParams::canonical(kind, schema, total_var)),
        }
    }

    pub(crate) fn prepare(&self) -> Prepared<'_> {
        match self {
            ModelParams::Ezgp(p) => Prepared::Ezgp(p),
            ModelParams::Eezgp(p) => Prepared::Eezgp(p),
            ModelParams::Baseline(p) => Prepared::Baseline(p.prepare()),
        }
    }
}

/// A covariance ready for repeated pairwise evaluation.
pub(crate) enum Prepared<'a> {
    Ezgp(&'a EzgpParams),
    Eezgp(&'a EezgpParams),
    Baseline(baseline::PreparedBaseline),
}

impl Prepared<'_> {
    #[inline]
    pub fn cov(&self, a: &MixedInput, b: &MixedInput) -> f64 {
        match self {
            Prepared::Ezgp(p) => p.cov_unchecked(a, b),
            Prepared::Eezgp(p) => p.cov_unchecked(a, b),
            Prepared::Baseline(p) => p.cov(a, b),
        }
    }

    /// Adds `weight * d cov(a, b) / d param` to `grad` for every free
    /// parameter (natural scale). `sq` is scratch space of length `p`.
    #[inline]
    pub fn accumulate_grad(
        &self,
        a: &MixedInput,
        b: &MixedInput,
        weight: f64,
        sq: &mut [f64],
        grad: &mut [f64],
    ) {
        match self {
            Prepared::Ezgp(p) => p.accumulate_grad(a, b, weight, sq, grad),
            Prepared::Eezgp(p) => p.accumulate_grad(a, b, weight, sq, grad),
            Prepared::Baseline(p) => p.accumulate_grad(a, b, weight, sq, grad),
        }
    }
}

pub(crate) fn check_schema_match(schema: &ProblemSchema, a: &MixedInput, b: &MixedInput) -> Result<()> {
    schema
        .validate(a)
        .and_then(|_| schema.validate(b))
        .map_err(|e| Error::SchemaMismatch(e.to_string()))
}

pub(crate) fn check_theta(label: &str, theta: &[f64]) -> Result<()> {
    match theta.iter().find(|t| !(**t >= THETA_MIN) || !t.is_finite()) {
        Some(t) => Err(Error::InvalidParameter(format!(
            "{label} entry {t} below the lower bound {THETA_MIN:e}"
        ))),
        None => Ok(()),
    }
}

pub(crate) fn check_sigma2(sigma2: &[f64]) -> Result<()> {
    if sigma2.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter("variances must be finite and nonnegative".into()));
    }
    if !sigma2.iter().any(|s| *s > 0.0) {
        return Err(Error::InvalidParameter("at least one variance must be positive".into()));
    }
    Ok(())
}
