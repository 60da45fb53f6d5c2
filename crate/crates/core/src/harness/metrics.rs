//! Prediction-accuracy metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which mean sits in the NSE denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NseForm {
    /// Mean of the predictions.
    #[default]
    PredictionMean,
    /// Mean of the observations (the conventional Nash-Sutcliffe form).
    ObservedMean,
}

fn check(pred: &[f64], actual: &[f64], min: usize) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: pred.len(),
        });
    }
    if pred.len() < min {
        return Err(Error::MetricUndefined(format!(
            "need at least {min} points, got {}",
            pred.len()
        )));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check(pred, actual, 1)?;
    let ss: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// `1 - sum (pred - actual)^2 / sum (v - mean)^2`, where `v` and `mean`
/// come from the predictions or the observations according to `form`.
pub fn nse(pred: &[f64], actual: &[f64], form: NseForm) -> Result<f64> {
    check(pred, actual, 2)?;
    let base = match form {
        NseForm::PredictionMean => pred,
        NseForm::ObservedMean => actual,
    };
    let mean = base.iter().sum::<f64>() / base.len() as f64;
    let den: f64 = base.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(den > 0.0) {
        return Err(Error::MetricUndefined(match form {
            NseForm::PredictionMean => "all predictions are equal".into(),
            NseForm::ObservedMean => "all observations are equal".into(),
        }));
    }
    let num: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok(1.0 - num / den)
}
