//! Conditional-mean prediction and predictive mean squared error.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{with_row, MixedInput};
use crate::error::{Error, Result};
use crate::inference::FittedModel;
use crate::kernels::Prepared;
use crate::linalg::solve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub mean: f64,
    pub mse: f64,
}

/// Predicts at one input given in original units.
pub fn predict_one(m: &FittedModel, w: &MixedInput) -> Result<PredictionResult> {
    m.training.schema().validate(w)?;
    warn_extrapolation(m, w, None);
    predict_prepared(m, &m.params.prepare(), w)
}

/// Elementwise [`predict_one`], order preserved. Validation errors carry the
/// 1-based position of the first offending input.
pub fn predict_batch(m: &FittedModel, ws: &[MixedInput]) -> Result<Vec<PredictionResult>> {
    for (i, w) in ws.iter().enumerate() {
        m.training.schema().validate(w).map_err(|e| with_row(e, i + 1))?;
        warn_extrapolation(m, w, Some(i + 1));
    }
    let prepared = m.params.prepare();
    let results: Vec<Result<PredictionResult>> =
        ws.par_iter().map(|w| predict_prepared(m, &prepared, w)).collect();
    results.into_iter().collect()
}

fn warn_extrapolation(m: &FittedModel, w: &MixedInput, row: Option<usize>) {
    for (k, (v, s)) in w.x.iter().zip(m.training.scaling()).enumerate() {
        if !s.in_range(*v) {
            match row {
                Some(r) => log::warn!("target {r}: x{} = {v} outside the training range", k + 1),
                None => log::warn!("x{} = {v} outside the training range", k + 1),
            }
        }
    }
}

fn predict_prepared(m: &FittedModel, prepared: &Prepared<'_>, w: &MixedInput) -> Result<PredictionResult> {
    let w = m.training.to_model_units(w);
    let train = m.training.inputs();
    let gamma = DVector::from_iterator(train.len(), train.iter().map(|t| prepared.cov(&w, t)));
    let mean = m.params.mu() + gamma.dot(&m.weights);
    let var = m.params.variance();
    let inv_gamma = solve(&m.chol, &gamma)?;
    let u = 1.0 - m.inv_one.dot(&gamma);
    let mut mse = var - gamma.dot(&inv_gamma) + u * u / m.one_inv_one;
    if mse < 0.0 {
        if mse < -1e-8 * var {
            return Err(Error::Internal(format!(
                "predictive mse {mse:e} is negative beyond roundoff (prior variance {var:e})"
            )));
        }
        mse = 0.0;
    }
    let r = m.response;
    Ok(PredictionResult {
        mean: r.to_original(mean),
        mse: mse * r.scale * r.scale,
    })
}

/// Writes `x1..xp,z1..zq,mean,mse`.
pub fn write_predictions<W: Write>(
    m_schema: &crate::data::ProblemSchema,
    targets: &[MixedInput],
    preds: &[PredictionResult],
    w: W,
) -> Result<()> {
    if targets.len() != preds.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: preds.len(),
        });
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = m_schema.input_header();
    header.push("mean".into());
    header.push("mse".into());
    wtr.write_record(&header)?;
    for (t, p) in targets.iter().zip(preds) {
        let mut rec: Vec<String> = t.x.iter().map(|v| format!("{v:?}")).collect();
        rec.extend(t.z.iter().map(|l| l.to_string()));
        rec.push(format!("{:?}", p.mean));
        rec.push(format!("{:?}", p.mse));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_predictions(
    schema: &crate::data::ProblemSchema,
    targets: &[MixedInput],
    preds: &[PredictionResult],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_predictions(schema, targets, preds, std::fs::File::create(path)?)
}
