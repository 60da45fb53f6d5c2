//! Unconstrained-ish coordinates for the optimizer: log for positive
//! parameters, scaled logit for bounded ones, with box bounds in the
//! transformed space.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kernels::{ModelParams, ParamFamily, ANGLE_EPS};

const EC_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// `v = exp(u)`.
    Log,
    /// `v = scale / (1 + exp(-u))`.
    Logit { scale: f64 },
}

impl Transform {
    pub fn to_natural(self, u: f64) -> f64 {
        match self {
            Transform::Log => u.exp(),
            Transform::Logit { scale } => scale * logistic(u),
        }
    }

    pub fn from_natural(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::Logit { scale } => {
                let s = v / scale;
                (s / (1.0 - s)).ln()
            }
        }
    }

    /// `dv/du` at `u`.
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Log => u.exp(),
            Transform::Logit { scale } => {
                let s = logistic(u);
                scale * s * (1.0 - s)
            }
        }
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Natural-space limits for the positive parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub theta: (f64, f64),
    /// Variance limits relative to the sample variance of the response.
    pub sigma2_rel: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            theta: (1e-3, 1e3),
            sigma2_rel: (1e-6, 10.0),
        }
    }
}

/// Coordinate map between a parameter template and the optimizer's vector.
#[derive(Debug, Clone)]
pub struct ParamSpace {
    template: ModelParams,
    families: Vec<ParamFamily>,
    transforms: Vec<Transform>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamSpace {
    pub fn new(template: ModelParams, bounds: Bounds, response_var: f64) -> Self {
        let families = template.families();
        let mut transforms = Vec::with_capacity(families.len());
        let mut lower = Vec::with_capacity(families.len());
        let mut upper = Vec::with_capacity(families.len());
        for &fam in &families {
            let (t, lo, hi) = match fam {
                ParamFamily::Sigma2 => (
                    Transform::Log,
                    (bounds.sigma2_rel.0 * response_var).ln(),
                    (bounds.sigma2_rel.1 * response_var).ln(),
                ),
                ParamFamily::EcCorrelation => {
                    let t = Transform::Logit { scale: 1.0 };
                    (t, t.from_natural(EC_EPS), t.from_natural(1.0 - EC_EPS))
                }
                ParamFamily::UcAngle => {
                    let t = Transform::Logit { scale: PI };
                    (t, t.from_natural(ANGLE_EPS), t.from_natural(PI - ANGLE_EPS))
                }
                _ => (Transform::Log, bounds.theta.0.ln(), bounds.theta.1.ln()),
            };
            transforms.push(t);
            lower.push(lo);
            upper.push(hi);
        }
        Self {
            template,
            families,
            transforms,
            lower,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.transforms.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn families(&self) -> &[ParamFamily] {
        &self.families
    }

    pub fn decode(&self, u: &[f64]) -> ModelParams {
        let v: Vec<f64> = u
            .iter()
            .zip(&self.transforms)
            .map(|(&ui, t)| t.to_natural(ui))
            .collect();
        self.template.with_natural(&v)
    }

    /// Transformed coordinates of `params`, clamped into the box.
    pub fn encode(&self, params: &ModelParams) -> Vec<f64> {
        params
            .natural()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                self.transforms[i]
                    .from_natural(v)
                    .clamp(self.lower[i], self.upper[i])
            })
            .collect()
    }

    /// Maps a natural-space gradient to transformed coordinates.
    pub fn chain(&self, u: &[f64], natural_grad: &[f64]) -> Vec<f64> {
        natural_grad
            .iter()
            .zip(u)
            .zip(&self.transforms)
            .map(|((g, &ui), t)| g * t.derivative(ui))
            .collect()
    }

    /// A random start: log-uniform variances in `[1e-3, 2] x var(y)` and
    /// ranges in `[1e-2, 1e2]` (both intersected with the box), logit
    /// coordinates uniform on `[-2, 2]`.
    pub fn random_start<R: Rng>(&self, rng: &mut R, response_var: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = match self.families[i] {
                    ParamFamily::Sigma2 => ((1e-3 * response_var).ln(), (2.0 * response_var).ln()),
                    ParamFamily::EcCorrelation | ParamFamily::UcAngle => (-2.0, 2.0),
                    _ => (1e-2f64.ln(), 1e2f64.ln()),
                };
                let lo = lo.max(self.lower[i]);
                let hi = hi.min(self.upper[i]);
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ProblemSchema;
    use crate::kernels::ModelKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn transforms_round_trip() {
        for t in [Transform::Log, Transform::Logit { scale: 1.0 }, Transform::Logit { scale: PI }] {
            for u in [-5.0, -0.3, 0.0, 1.7, 9.0] {
                let v = t.to_natural(u);
                assert!((t.from_natural(v) - u).abs() < 1e-9, "{t:?} {u}");
                let h = 1e-6;
                let fd = (t.to_natural(u + h) - t.to_natural(u - h)) / (2.0 * h);
                assert!((fd - t.derivative(u)).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn logit_bounds_match_clamps() {
        let s = ProblemSchema::symmetric(2, 2, 3).unwrap();
        for kind in [ModelKind::Ec, ModelKind::Uc] {
            let space = ParamSpace::new(ModelParams::canonical(kind, &s, 1.0), Bounds::default(), 1.0);
            let hi = *space.upper().last().unwrap();
            let expected = if kind == ModelKind::Ec { 13.8155 } else { 14.96 };
            assert!((hi - expected).abs() < 0.01, "{kind}: {hi}");
        }
    }

    #[test]
    fn encode_decode_and_random_starts_stay_in_box() {
        let s = ProblemSchema::new(2, 2, vec![2, 4]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for kind in ModelKind::ALL {
            let p = ModelParams::canonical(kind, &s, 2.0);
            let space = ParamSpace::new(p.clone(), Bounds::default(), 2.0);
            assert_eq!(space.dim(), kind.free_param_count(&s));
            let u = space.encode(&p);
            let back = space.decode(&u).natural();
            for (a, b) in back.iter().zip(p.natural()) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{kind}");
            }
            for _ in 0..20 {
                let u = space.random_start(&mut rng, 2.0);
                for (i, v) in u.iter().enumerate() {
                    assert!(*v >= space.lower()[i] && *v <= space.upper()[i]);
                }
            }
        }
    }
}
