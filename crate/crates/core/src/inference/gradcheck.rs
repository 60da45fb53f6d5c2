//! Analytical versus central finite-difference gradients.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::fit::ProfileObjective;
use super::param_space::Bounds;
use crate::data::{Dataset, MixedInput, ProblemSchema};
use crate::error::Result;
use crate::kernels::{ModelKind, ModelParams, ParamFamily};

/// Step in transformed coordinates.
pub const FD_STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-5;
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub index: usize,
    pub family: ParamFamily,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradEntry {
    pub fn gap(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    /// `|a - fd| / max(|a|, |fd|)`, or 0 when the absolute gap is below the floor.
    pub fn discrepancy(&self) -> f64 {
        let gap = self.gap();
        if gap <= ABS_FLOOR {
            0.0
        } else {
            gap / self.analytic.abs().max(self.numeric.abs())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub entries: Vec<GradEntry>,
}

impl GradReport {
    pub fn worst(&self) -> Option<&GradEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.discrepancy().total_cmp(&b.discrepancy()))
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.worst().map_or(0.0, GradEntry::discrepancy)
    }

    pub fn passed(&self) -> bool {
        self.max_discrepancy() <= REL_TOL
    }

    /// Largest discrepancy and largest absolute gap per parameter family, in
    /// first-appearance order.
    pub fn by_family(&self) -> Vec<(ParamFamily, f64, f64)> {
        let mut out: Vec<(ParamFamily, f64, f64)> = Vec::new();
        for e in &self.entries {
            match out.iter_mut().find(|(f, _, _)| *f == e.family) {
                Some((_, v, g)) => {
                    *v = v.max(e.discrepancy());
                    *g = g.max(e.gap());
                }
                None => out.push((e.family, e.discrepancy(), e.gap())),
            }
        }
        out
    }
}

/// Compares the gradient of the profile objective at `params` with central
/// differences in the optimizer's coordinates.
pub fn check_gradient(d: &Dataset, params: &ModelParams) -> Result<GradReport> {
    let obj = ProfileObjective::new(d, params.clone(), Bounds::default())?;
    let space = obj.space();
    let u = space.encode(params);
    let (_, g) = obj.value_and_grad(&u)?;
    let mut entries = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[i] += FD_STEP;
        dn[i] -= FD_STEP;
        let numeric = (obj.value(&up)? - obj.value(&dn)?) / (2.0 * FD_STEP);
        entries.push(GradEntry {
            index: i,
            family: space.families()[i],
            analytic: g[i],
            numeric,
        });
    }
    Ok(GradReport { entries })
}

/// A small random instance with well-separated quantitative rows and
/// moderate parameters.
pub fn random_instance(kind: ModelKind, schema: &ProblemSchema, n: usize, seed: u64) -> Result<(Dataset, ModelParams)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Centred Latin hypercube keeps the quantitative rows well separated.
    let cols: Vec<Vec<usize>> = (0..schema.p())
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();
    let inputs: Vec<MixedInput> = (0..n)
        .map(|i| {
            let x = cols.iter().map(|c| (c[i] as f64 + 0.5) / n as f64).collect();
            let z = schema.levels().iter().map(|&m| rng.random_range(1..=m)).collect();
            MixedInput::new(x, z)
        })
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let d = Dataset::new(schema.clone(), inputs, y)?;
    let template = ModelParams::canonical(kind, schema, 1.0);
    let natural: Vec<f64> = template
        .families()
        .iter()
        .map(|f| match f {
            ParamFamily::Sigma2 => rng.random_range(0.2..2.0),
            ParamFamily::EcCorrelation => rng.random_range(0.1..0.9),
            ParamFamily::UcAngle => rng.random_range(0.3..2.8),
            ParamFamily::McLevel => rng.random_range(0.05..1.5),
            _ => rng.random_range(10.0..60.0),
        })
        .collect();
    Ok((d, template.with_natural(&natural)))
}
