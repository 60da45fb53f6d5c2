//! Multi-start maximum-likelihood fitting.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::evaluate;
use super::optim::{minimize, LbfgsConfig, StopReason};
use super::param_space::{Bounds, ParamSpace};
use crate::data::{normalize_quantitative, Dataset};
use crate::error::{Error, Result};
use crate::kernels::{assemble_prepared, CovMatrix, ModelKind, ModelParams};
use crate::linalg::{cholesky_exact, cholesky_with_nugget, log_det, solve_refined, CholeskyFactor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub starts: usize,
    pub max_iter: usize,
    /// Relative objective-improvement tolerance.
    pub tol: f64,
    pub bounds: Bounds,
    pub seed: u64,
    /// Fit on the centred and scaled response; predictions are mapped back.
    pub standardize_response: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iter: 200,
            tol: 1e-8,
            bounds: Bounds::default(),
            seed: 0,
            standardize_response: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::InvalidParameter("starts must be at least 1".into()));
        }
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi.is_finite() && lo < hi;
        if !ok(self.bounds.theta) || !ok(self.bounds.sigma2_rel) {
            return Err(Error::InvalidParameter(format!(
                "bounds must be positive, finite and ordered: {:?}",
                self.bounds
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be nonnegative", self.tol)));
        }
        Ok(())
    }
}

/// Affine map between the original response and the units the model is fitted in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseScaling {
    pub shift: f64,
    pub scale: f64,
}

impl ResponseScaling {
    pub const IDENTITY: ResponseScaling = ResponseScaling {
        shift: 0.0,
        scale: 1.0,
    };

    pub fn to_model(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }

    pub fn to_original(&self, y: f64) -> f64 {
        self.shift + self.scale * y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub index: usize,
    /// `None` when the point could not be evaluated.
    pub initial_objective: Option<f64>,
    pub final_objective: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub stop: String,
}

fn stop_name(r: StopReason) -> &'static str {
    match r {
        StopReason::SmallImprovement => "small-improvement",
        StopReason::SmallGradient => "small-gradient",
        StopReason::MaxIterations => "max-iterations",
        StopReason::LineSearchFailed => "line-search-failed",
        StopReason::InitialEvaluationFailed => "initial-evaluation-failed",
    }
}

/// Negative profile log-likelihood over the optimizer's transformed
/// coordinates.
#[derive(Debug, Clone)]
pub struct ProfileObjective<'a> {
    data: &'a Dataset,
    space: ParamSpace,
}

impl<'a> ProfileObjective<'a> {
    pub fn new(data: &'a Dataset, template: ModelParams, bounds: Bounds) -> Result<Self> {
        template.validate(data.schema())?;
        let var = data.response_variance();
        let var = if var > 0.0 { var } else { 1.0 };
        Ok(Self {
            data,
            space: ParamSpace::new(template, bounds, var),
        })
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn value(&self, u: &[f64]) -> Result<f64> {
        let p = self.space.decode(u);
        Ok(evaluate(self.data.inputs(), self.data.y(), &p, false)?.objective)
    }

    pub fn value_and_grad(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.space.decode(u);
        let e = evaluate(self.data.inputs(), self.data.y(), &p, true)?;
        let g = self.space.chain(u, e.grad.as_deref().expect("gradient requested"));
        Ok((e.objective, g))
    }
}

/// A fitted emulator with its factorization and cached solves.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub(crate) params: ModelParams,
    pub(crate) training: Dataset,
    pub(crate) response: ResponseScaling,
    pub(crate) objective: f64,
    pub(crate) seed: u64,
    pub(crate) starts: Vec<StartSummary>,
    pub(crate) chol: CholeskyFactor,
    pub(crate) weights: DVector<f64>,
    pub(crate) inv_one: DVector<f64>,
    pub(crate) one_inv_one: f64,
}

impl FittedModel {
    /// Builds the predictor for fixed covariance parameters. `training` must
    /// already be in model units; `nugget` forces an exact nugget instead of
    /// the ladder.
    pub(crate) fn assemble(
        training: Dataset,
        params: &ModelParams,
        nugget: Option<f64>,
        response: ResponseScaling,
        seed: u64,
        starts: Vec<StartSummary>,
    ) -> Result<Self> {
        params.validate(training.schema())?;
        let prepared = params.prepare();
        let phi = assemble_prepared(training.inputs(), params, &prepared);
        let chol = match nugget {
            Some(v) => cholesky_exact(&phi, v)?,
            None => cholesky_with_nugget(&CovMatrix::new(phi.clone()))?,
        };
        let n = training.len();
        let y = DVector::from_column_slice(training.y());
        let inv_one = solve_refined(&chol, &phi, &DVector::from_element(n, 1.0))?;
        let one_inv_one = inv_one.sum();
        let mu = inv_one.dot(&y) / one_inv_one;
        let r = y.add_scalar(-mu);
        let weights = solve_refined(&chol, &phi, &r)?;
        let objective = log_det(&chol) + r.dot(&weights);
        let mut params = params.clone();
        params.set_mu(mu);
        Ok(Self {
            params,
            training,
            response,
            objective,
            seed,
            starts,
            chol,
            weights,
            inv_one,
            one_inv_one,
        })
    }

    /// Predictor for given parameters without optimization. The dataset is
    /// normalized first; the response is used as is.
    pub fn from_params(d: &Dataset, params: &ModelParams) -> Result<Self> {
        Self::assemble(
            normalize_quantitative(d),
            params,
            None,
            ResponseScaling::IDENTITY,
            0,
            Vec::new(),
        )
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    /// Optimized parameters; `mu` is the profile estimate in model units.
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Normalized training data, response in model units.
    pub fn training(&self) -> &Dataset {
        &self.training
    }

    pub fn response_scaling(&self) -> ResponseScaling {
        self.response
    }

    /// Negative profile log-likelihood at the optimum (model units).
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn nugget(&self) -> f64 {
        self.chol.nugget()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mu_hat(&self) -> f64 {
        self.params.mu()
    }

    pub fn start_summaries(&self) -> &[StartSummary] {
        &self.starts
    }

    pub fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    /// `Phi^-1 (y - mu_hat 1)`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn free_param_count(&self) -> usize {
        self.kind().free_param_count(self.training.schema())
    }
}

/// Fits `kind` to `d` by multi-start bounded quasi-Newton descent on the
/// negative profile log-likelihood.
pub fn fit(d: &Dataset, kind: ModelKind, cfg: &FitConfig) -> Result<FittedModel> {
    cfg.validate()?;
    if d.len() < 2 {
        return Err(Error::FitFailed(format!("need at least 2 runs, got {}", d.len())));
    }
    let normalized = normalize_quantitative(d);
    let response = if cfg.standardize_response {
        let sd = d.response_variance().sqrt();
        ResponseScaling {
            shift: d.response_mean(),
            scale: if sd > 0.0 { sd } else { 1.0 },
        }
    } else {
        ResponseScaling::IDENTITY
    };
    let training = normalized.with_response(d.y().iter().map(|&v| response.to_model(v)).collect())?;
    let var = training.response_variance();
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::FitFailed("response is constant".into()));
    }

    let template = ModelParams::canonical(kind, training.schema(), var);
    let space = ParamSpace::new(template.clone(), cfg.bounds, var);
    let opt_cfg = LbfgsConfig {
        max_iter: cfg.max_iter,
        f_tol: cfg.tol,
        ..LbfgsConfig::default()
    };
    let inputs = training.inputs();
    let y = training.y();

    let results: Vec<_> = (0..cfg.starts)
        .into_par_iter()
        .map(|s| {
            let u0 = if s == 0 {
                space.encode(&template)
            } else {
                let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
                rng.set_stream(s as u64);
                space.random_start(&mut rng, var)
            };
            let objective = |u: &[f64]| {
                let p = space.decode(u);
                let e = evaluate(inputs, y, &p, true).ok()?;
                let g = space.chain(u, e.grad.as_deref()?);
                Some((e.objective, g))
            };
            minimize(objective, &u0, space.lower(), space.upper(), &opt_cfg)
        })
        .collect();

    let summaries: Vec<StartSummary> = results
        .iter()
        .enumerate()
        .map(|(index, r)| StartSummary {
            index,
            initial_objective: r.f_initial.is_finite().then_some(r.f_initial),
            final_objective: r.f.is_finite().then_some(r.f),
            iterations: r.iterations,
            evaluations: r.evaluations,
            converged: r.reason.converged(),
            stop: stop_name(r.reason).to_string(),
        })
        .collect();
    for s in &summaries {
        log::debug!(
            "{kind} start {}: {:?} -> {:?} in {} iterations ({})",
            s.index,
            s.initial_objective,
            s.final_objective,
            s.iterations,
            s.stop
        );
    }

    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if r.f.is_finite() && best.is_none_or(|b| r.f < results[b].f) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        let diag: Vec<String> = summaries
            .iter()
            .map(|s| format!("start {}: {}", s.index, s.stop))
            .collect();
        return Err(Error::FitFailed(format!(
            "every start failed to factorize the covariance ({})",
            diag.join("; ")
        )));
    };
    let params = space.decode(&results[best].x);
    let mut model = FittedModel::assemble(training, &params, None, response, cfg.seed, summaries)?;
    model.objective = results[best].f;
    Ok(model)
}
