//! Profile likelihood with the constant mean concentrated out, and its
//! analytical gradient.

use nalgebra::DVector;

use crate::data::{Dataset, MixedInput};
use crate::error::{Error, Result};
use crate::kernels::{assemble_prepared, CovMatrix, ModelParams, ParamFamily};
use crate::linalg::{cholesky_with_nugget, log_det, solve, CholeskyFactor};

/// Generalized-least-squares mean `(1' Phi^-1 1)^-1 1' Phi^-1 y`.
pub fn mu_hat(f: &CholeskyFactor, y: &[f64]) -> Result<f64> {
    let n = f.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let inv_one = solve(f, &DVector::from_element(n, 1.0))?;
    let yv = DVector::from_column_slice(y);
    Ok(inv_one.dot(&yv) / inv_one.sum())
}

/// Value of the profile objective and the nugget used to evaluate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileValue {
    pub value: f64,
    pub nugget: f64,
}

/// `log|Phi| + y' Phi^-1 y - (1' Phi^-1 1)^-1 (1' Phi^-1 y)^2`, from a
/// single factorization of the dataset's covariance matrix.
pub fn neg_profile_loglik(params: &ModelParams, d: &Dataset) -> Result<ProfileValue> {
    params.validate(d.schema())?;
    let prepared = params.prepare();
    let phi = assemble_prepared(d.inputs(), params, &prepared);
    let f = cholesky_with_nugget(&CovMatrix::new(phi))?;
    let n = d.len();
    let y = DVector::from_column_slice(d.y());
    let inv_y = solve(&f, &y)?;
    let inv_one = solve(&f, &DVector::from_element(n, 1.0))?;
    let one_inv_y = inv_one.dot(&y);
    let value = log_det(&f) + y.dot(&inv_y) - one_inv_y * one_inv_y / inv_one.sum();
    Ok(ProfileValue {
        value,
        nugget: f.nugget(),
    })
}

/// Gradient of [`neg_profile_loglik`] with respect to the free covariance
/// parameters in natural units, in the layout of [`ModelParams::natural`].
///
/// Each coordinate is `tr(Phi^-1 dPhi) - r' Phi^-1 dPhi Phi^-1 r` with
/// `r = y - mu_hat 1`; the mean sits at its profile optimum so its own
/// derivative term vanishes.
pub fn grad_neg_profile_loglik(params: &ModelParams, d: &Dataset) -> Result<Vec<f64>> {
    params.validate(d.schema())?;
    Ok(evaluate(d.inputs(), d.y(), params, true)?
        .grad
        .expect("gradient requested"))
}

/// Everything one objective evaluation produces.
pub(crate) struct Evaluation {
    #[cfg_attr(not(test), allow(dead_code))]
    pub mu_hat: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub nugget: f64,
    /// `log|Phi| + r' Phi^-1 r`.
    pub objective: f64,
    /// Natural-scale gradient, when requested.
    pub grad: Option<Vec<f64>>,
}

pub(crate) fn evaluate(
    inputs: &[MixedInput],
    y: &[f64],
    params: &ModelParams,
    want_grad: bool,
) -> Result<Evaluation> {
    let n = inputs.len();
    let prepared = params.prepare();
    let phi = assemble_prepared(inputs, params, &prepared);
    let cov = CovMatrix::new(phi);
    let chol = cholesky_with_nugget(&cov)?;

    // The objective is invariant to shifting y, so centre it first to keep
    // the quadratic form well scaled.
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let inv_one = solve(&chol, &DVector::from_element(n, 1.0))?;
    let shift = inv_one.dot(&yc) / inv_one.sum();
    let r = yc.add_scalar(-shift);
    let alpha = solve(&chol, &r)?;
    let objective = log_det(&chol) + r.dot(&alpha);
    if !objective.is_finite() {
        return Err(Error::NotPositiveDefinite { cap: chol.nugget() });
    }

    let grad = if want_grad {
        let mut w = chol.inverse();
        w.ger(-1.0, &alpha, &alpha, 1.0);
        let np = params.natural().len();
        let mut g = vec![0.0; np];
        let mut sq = vec![0.0; inputs.first().map_or(0, |w| w.x.len())];
        for j in 0..n {
            for i in 0..=j {
                let weight = if i == j { w[(i, j)] } else { 2.0 * w[(i, j)] };
                prepared.accumulate_grad(&inputs[i], &inputs[j], weight, &mut sq, &mut g);
            }
        }
        // The ladder nugget scales with the (constant) prior variance.
        if chol.nugget() > 0.0 {
            let rung = chol.nugget() / params.variance();
            let trace = w.trace();
            for (gi, fam) in g.iter_mut().zip(params.families()) {
                if fam == ParamFamily::Sigma2 {
                    *gi += rung * trace;
                }
            }
        }
        Some(g)
    } else {
        None
    };

    Ok(Evaluation {
        mu_hat: ybar + shift,
        nugget: chol.nugget(),
        objective,
        grad,
    })
}
