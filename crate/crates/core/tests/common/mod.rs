#![allow(dead_code)]

use ezgp::{MixedInput, ModelKind, ModelParams, ParamFamily, ProblemSchema};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_schema<R: Rng>(rng: &mut R, max_p: usize, max_q: usize, max_m: usize) -> ProblemSchema {
    let p = rng.random_range(1..=max_p);
    let q = rng.random_range(1..=max_q);
    let levels = (0..q).map(|_| rng.random_range(2..=max_m)).collect();
    ProblemSchema::new(p, q, levels).unwrap()
}

pub fn random_inputs<R: Rng>(rng: &mut R, s: &ProblemSchema, n: usize) -> Vec<MixedInput> {
    (0..n)
        .map(|_| {
            MixedInput::new(
                (0..s.p()).map(|_| rng.random::<f64>()).collect(),
                s.levels().iter().map(|&m| rng.random_range(1..=m)).collect(),
            )
        })
        .collect()
}

/// Centred Latin hypercube rows: every column is a permutation of `(i + 1/2) / n`.
pub fn lhs_inputs<R: Rng>(rng: &mut R, s: &ProblemSchema, n: usize) -> Vec<MixedInput> {
    let cols: Vec<Vec<usize>> = (0..s.p())
        .map(|_| {
            let mut v: Vec<usize> = (0..n).collect();
            v.shuffle(rng);
            v
        })
        .collect();
    (0..n)
        .map(|i| {
            MixedInput::new(
                cols.iter().map(|c| (c[i] as f64 + 0.5) / n as f64).collect(),
                s.levels().iter().map(|&m| rng.random_range(1..=m)).collect(),
            )
        })
        .collect()
}

/// Random parameters of `kind` with ranges drawn log-uniformly from `theta`.
pub fn random_params<R: Rng>(rng: &mut R, kind: ModelKind, s: &ProblemSchema, theta: (f64, f64)) -> ModelParams {
    let template = ModelParams::canonical(kind, s, 1.0);
    let v: Vec<f64> = template
        .families()
        .iter()
        .map(|f| match f {
            ParamFamily::Sigma2 => rng.random_range(0.1..3.0),
            ParamFamily::EcCorrelation => rng.random_range(0.01..0.99),
            ParamFamily::UcAngle => rng.random_range(0.05..3.05),
            _ => rng.random_range(theta.0.ln()..theta.1.ln()).exp(),
        })
        .collect();
    template.with_natural(&v)
}
