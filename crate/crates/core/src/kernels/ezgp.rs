use serde::{Deserialize, Serialize};

use super::{check_schema_match, check_sigma2, check_theta, gauss, sq_dist_into, weighted_sq, ParamFamily};
use crate::data::{MixedInput, ProblemSchema};
use crate::error::{Error, Result};

/// Additive-indicator covariance with per-level anisotropic adjustments.
///
/// `sigma2[0]` is the base variance, `sigma2[h]` the variance of the
/// adjustment for factor `h`. `theta[h][l][k]` is the correlation parameter
/// of quantitative factor `k` in the adjustment process for level `l + 1`
/// of qualitative factor `h + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EzgpParams {
    pub mu: f64,
    pub sigma2: Vec<f64>,
    pub theta0: Vec<f64>,
    pub theta: Vec<Vec<Vec<f64>>>,
}

/// Additive-indicator covariance with one isotropic scalar per level.
///
/// `theta[h][0]` is anchored at 1 and is not a free parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EezgpParams {
    pub mu: f64,
    pub sigma2: Vec<f64>,
    pub theta0: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

impl EzgpParams {
    pub fn uniform(schema: &ProblemSchema, total_var: f64, theta: f64) -> Self {
        let q = schema.q();
        Self {
            mu: 0.0,
            sigma2: vec![total_var / (q + 1) as f64; q + 1],
            theta0: vec![theta; schema.p()],
            theta: schema
                .levels()
                .iter()
                .map(|&m| vec![vec![theta; schema.p()]; m])
                .collect(),
        }
    }

    pub fn validate(&self, schema: &ProblemSchema) -> Result<()> {
        let (p, q) = (schema.p(), schema.q());
        if self.sigma2.len() != q + 1 {
            return Err(Error::DimensionMismatch {
                expected: q + 1,
                got: self.sigma2.len(),
            });
        }
        check_sigma2(&self.sigma2)?;
        if self.theta0.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: self.theta0.len(),
            });
        }
        check_theta("theta0", &self.theta0)?;
        if self.theta.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: self.theta.len(),
            });
        }
        for (h, (block, &m)) in self.theta.iter().zip(schema.levels()).enumerate() {
            if block.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: block.len(),
                });
            }
            for row in block {
                if row.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: row.len(),
                    });
                }
                check_theta(&format!("theta for z{}", h + 1), row)?;
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn cov_unchecked(&self, a: &MixedInput, b: &MixedInput) -> f64 {
        let mut c = self.sigma2[0] * gauss(&a.x, &b.x, &self.theta0);
        for (h, block) in self.theta.iter().enumerate() {
            if a.z[h] == b.z[h] {
                c += self.sigma2[h + 1] * gauss(&a.x, &b.x, &block[a.z[h] - 1]);
            }
        }
        c
    }

    pub fn natural(&self) -> Vec<f64> {
        let mut v = self.sigma2.clone();
        v.extend_from_slice(&self.theta0);
        for block in &self.theta {
            for row in block {
                v.extend_from_slice(row);
            }
        }
        v
    }

    pub fn with_natural(&self, v: &[f64]) -> Self {
        let q = self.sigma2.len() - 1;
        let p = self.theta0.len();
        let mut out = self.clone();
        out.sigma2.copy_from_slice(&v[..=q]);
        out.theta0.copy_from_slice(&v[q + 1..q + 1 + p]);
        let mut off = q + 1 + p;
        for block in &mut out.theta {
            for row in block {
                row.copy_from_slice(&v[off..off + p]);
                off += p;
            }
        }
        out
    }

    pub fn families(&self) -> Vec<ParamFamily> {
        let mut f = vec![ParamFamily::Sigma2; self.sigma2.len()];
        f.extend(std::iter::repeat_n(ParamFamily::Theta0, self.theta0.len()));
        let adj: usize = self.theta.iter().map(|b| b.len() * self.theta0.len()).sum();
        f.extend(std::iter::repeat_n(ParamFamily::ThetaAdjust, adj));
        f
    }

    /// Partial derivatives of one covariance entry: the base-variance and
    /// base-correlation families, then for each factor whose levels match the
    /// adjustment variance and the adjustment correlation parameters of the
    /// shared level. Unmatched factors contribute nothing.
    pub(crate) fn accumulate_grad(
        &self,
        a: &MixedInput,
        b: &MixedInput,
        weight: f64,
        sq: &mut [f64],
        grad: &mut [f64],
    ) {
        let q = self.sigma2.len() - 1;
        let p = self.theta0.len();
        sq_dist_into(&a.x, &b.x, sq);
        let e0 = (-weighted_sq(sq, &self.theta0)).exp();
        grad[0] += weight * e0;
        let s0 = weight * self.sigma2[0] * e0;
        for k in 0..p {
            grad[q + 1 + k] -= s0 * sq[k];
        }
        let mut off = q + 1 + p;
        for (h, block) in self.theta.iter().enumerate() {
            if a.z[h] == b.z[h] {
                let l = a.z[h] - 1;
                let e = (-weighted_sq(sq, &block[l])).exp();
                grad[h + 1] += weight * e;
                let s = weight * self.sigma2[h + 1] * e;
                let base = off + l * p;
                for k in 0..p {
                    grad[base + k] -= s * sq[k];
                }
            }
            off += block.len() * p;
        }
    }
}

impl EezgpParams {
    pub fn uniform(schema: &ProblemSchema, total_var: f64, theta: f64) -> Self {
        let q = schema.q();
        Self {
            mu: 0.0,
            sigma2: vec![total_var / (q + 1) as f64; q + 1],
            theta0: vec![theta; schema.p()],
            theta: schema
                .levels()
                .iter()
                .map(|&m| {
                    let mut v = vec![theta; m];
                    v[0] = 1.0;
                    v
                })
                .collect(),
        }
    }

    pub fn validate(&self, schema: &ProblemSchema) -> Result<()> {
        let (p, q) = (schema.p(), schema.q());
        if self.sigma2.len() != q + 1 {
            return Err(Error::DimensionMismatch {
                expected: q + 1,
                got: self.sigma2.len(),
            });
        }
        check_sigma2(&self.sigma2)?;
        if self.theta0.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: self.theta0.len(),
            });
        }
        check_theta("theta0", &self.theta0)?;
        if self.theta.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: self.theta.len(),
            });
        }
        for (h, (row, &m)) in self.theta.iter().zip(schema.levels()).enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            if row[0] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "first-level parameter of z{} must be anchored at 1, got {}",
                    h + 1,
                    row[0]
                )));
            }
            check_theta(&format!("theta for z{}", h + 1), row)?;
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn cov_unchecked(&self, a: &MixedInput, b: &MixedInput) -> f64 {
        let mut s = 0.0;
        let mut s0 = 0.0;
        for k in 0..self.theta0.len() {
            let d = a.x[k] - b.x[k];
            s += d * d;
            s0 += self.theta0[k] * d * d;
        }
        let mut c = self.sigma2[0] * (-s0).exp();
        for (h, row) in self.theta.iter().enumerate() {
            if a.z[h] == b.z[h] {
                c += self.sigma2[h + 1] * (-row[a.z[h] - 1] * s).exp();
            }
        }
        c
    }

    /// The equivalent anisotropic parameter set, replicating each level's
    /// scalar across the quantitative factors.
    pub fn expand(&self) -> EzgpParams {
        let p = self.theta0.len();
        EzgpParams {
            mu: self.mu,
            sigma2: self.sigma2.clone(),
            theta0: self.theta0.clone(),
            theta: self
                .theta
                .iter()
                .map(|row| row.iter().map(|&t| vec![t; p]).collect())
                .collect(),
        }
    }

    pub fn natural(&self) -> Vec<f64> {
        let mut v = self.sigma2.clone();
        v.extend_from_slice(&self.theta0);
        for row in &self.theta {
            v.extend_from_slice(&row[1..]);
        }
        v
    }

    pub fn with_natural(&self, v: &[f64]) -> Self {
        let q = self.sigma2.len() - 1;
        let p = self.theta0.len();
        let mut out = self.clone();
        out.sigma2.copy_from_slice(&v[..=q]);
        out.theta0.copy_from_slice(&v[q + 1..q + 1 + p]);
        let mut off = q + 1 + p;
        for row in &mut out.theta {
            let m = row.len();
            row[1..].copy_from_slice(&v[off..off + m - 1]);
            off += m - 1;
        }
        out
    }

    pub fn families(&self) -> Vec<ParamFamily> {
        let mut f = vec![ParamFamily::Sigma2; self.sigma2.len()];
        f.extend(std::iter::repeat_n(ParamFamily::Theta0, self.theta0.len()));
        let adj: usize = self.theta.iter().map(|r| r.len() - 1).sum();
        f.extend(std::iter::repeat_n(ParamFamily::ThetaAdjust, adj));
        f
    }

    /// As for the anisotropic model, with the per-factor derivatives of a
    /// level's correlation parameters contracted into one scalar derivative
    /// over the total squared distance. The anchored first level has none.
    pub(crate) fn accumulate_grad(
        &self,
        a: &MixedInput,
        b: &MixedInput,
        weight: f64,
        sq: &mut [f64],
        grad: &mut [f64],
    ) {
        let q = self.sigma2.len() - 1;
        let p = self.theta0.len();
        sq_dist_into(&a.x, &b.x, sq);
        let total: f64 = sq.iter().sum();
        let e0 = (-weighted_sq(sq, &self.theta0)).exp();
        grad[0] += weight * e0;
        let s0 = weight * self.sigma2[0] * e0;
        for k in 0..p {
            grad[q + 1 + k] -= s0 * sq[k];
        }
        let mut off = q + 1 + p;
        for (h, row) in self.theta.iter().enumerate() {
            if a.z[h] == b.z[h] {
                let l = a.z[h] - 1;
                let e = (-row[l] * total).exp();
                grad[h + 1] += weight * e;
                if l > 0 {
                    grad[off + l - 1] -= weight * self.sigma2[h + 1] * total * e;
                }
            }
            off += row.len() - 1;
        }
    }
}

/// Covariance between two inputs under the anisotropic indicator model.
pub fn ezgp_cov(
    schema: &ProblemSchema,
    a: &MixedInput,
    b: &MixedInput,
    params: &EzgpParams,
) -> Result<f64> {
    check_schema_match(schema, a, b)?;
    params.validate(schema)?;
    Ok(params.cov_unchecked(a, b))
}

/// Covariance between two inputs under the isotropic-adjustment model.
pub fn eezgp_cov(
    schema: &ProblemSchema,
    a: &MixedInput,
    b: &MixedInput,
    params: &EezgpParams,
) -> Result<f64> {
    check_schema_match(schema, a, b)?;
    params.validate(schema)?;
    Ok(params.cov_unchecked(a, b))
}
