//! JSON persistence for fitted models.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnScaling, Dataset, MixedInput, ProblemSchema};
use crate::error::{Error, Result};
use crate::inference::{FittedModel, ResponseScaling, StartSummary};
use crate::kernels::{ModelKind, ModelParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: ModelKind,
    schema: ProblemSchema,
    params: ModelParams,
    mu_hat: f64,
    nugget: f64,
    objective: f64,
    seed: u64,
    scaling: Vec<ColumnScaling>,
    response: ResponseScaling,
    /// Normalized inputs with responses in model units.
    inputs: Vec<MixedInput>,
    y: Vec<f64>,
    starts: Vec<StartSummary>,
}

pub fn write_model<W: Write>(m: &FittedModel, w: W) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: m.kind(),
        schema: m.training.schema().clone(),
        params: m.params.clone(),
        mu_hat: m.params.mu(),
        nugget: m.nugget(),
        objective: m.objective,
        seed: m.seed,
        scaling: m.training.scaling().to_vec(),
        response: m.response,
        inputs: m.training.inputs().to_vec(),
        y: m.training.y().to_vec(),
        starts: m.starts.clone(),
    };
    serde_json::to_writer_pretty(w, &file)?;
    Ok(())
}

/// Rebuilds the model, re-factorizing with the stored nugget.
pub fn read_model<R: Read>(r: R) -> Result<FittedModel> {
    let file: ModelFile = serde_json::from_reader(r)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::InvalidParameter(format!(
            "unsupported model format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    if file.params.kind() != file.kind {
        return Err(Error::InvalidParameter(format!(
            "kind {} does not match parameters of kind {}",
            file.kind,
            file.params.kind()
        )));
    }
    let training = Dataset::new(file.schema, file.inputs, file.y)?.with_scaling(file.scaling)?;
    let mut m = FittedModel::assemble(
        training,
        &file.params,
        Some(file.nugget),
        file.response,
        file.seed,
        file.starts,
    )?;
    m.objective = file.objective;
    Ok(m)
}

pub fn save_model(m: &FittedModel, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(m, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FittedModel> {
    read_model(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{fit, FitConfig};
    use crate::predict::predict_batch;

    #[test]
    fn round_trip_is_lossless() {
        let s = ProblemSchema::new(1, 1, vec![2]).unwrap();
        let inputs: Vec<MixedInput> = (0..8)
            .map(|i| MixedInput::new(vec![2.0 + 0.37 * i as f64], vec![1 + i % 2]))
            .collect();
        let y: Vec<f64> = inputs.iter().map(|w| (w.x[0]).sin() * w.z[0] as f64).collect();
        let d = Dataset::new(s, inputs.clone(), y).unwrap();
        let cfg = FitConfig {
            starts: 2,
            standardize_response: true,
            ..Default::default()
        };
        let m = fit(&d, ModelKind::Eezgp, &cfg).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(&buf[..]).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.objective(), m.objective());
        assert_eq!(back.training(), m.training());
        assert_eq!(predict_batch(&back, &inputs).unwrap(), predict_batch(&m, &inputs).unwrap());
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_unknown_version() {
        let text = r#"{"format_version": 99}"#;
        assert!(read_model(text.as_bytes()).is_err());
    }
}
