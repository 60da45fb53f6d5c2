//! Multiplicative-indicator covariance. Not a fit-able model: shared levels
//! multiply in extra Gaussian factors, so inputs agreeing on more qualitative
//! factors can end up *less* correlated. Kept to demonstrate that ordering.

use super::{check_schema_match, ezgp_cov, gauss, EzgpParams};
use crate::data::{MixedInput, ProblemSchema};
use crate::error::{Error, Result};

/// `sigma2 * R(x, x' | theta0) * prod_h R(x, x' | Theta^(h)_{l_h})^{I(z_h = z'_h = l_h)}`.
///
/// Only `theta0` and `theta` of `params` are used; the variance is the
/// single scalar `sigma2`.
pub fn phi_star(
    schema: &ProblemSchema,
    a: &MixedInput,
    b: &MixedInput,
    sigma2: f64,
    params: &EzgpParams,
) -> Result<f64> {
    check_schema_match(schema, a, b)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("variance {sigma2} must be positive")));
    }
    let mut c = sigma2 * gauss(&a.x, &b.x, &params.theta0);
    for (h, block) in params.theta.iter().enumerate() {
        if a.z[h] == b.z[h] {
            c *= gauss(&a.x, &b.x, &block[a.z[h] - 1]);
        }
    }
    Ok(c)
}

/// Correlations of the pairs `(w1, w2)` and `(w1, w3)` under both models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOrdering {
    pub phi_star_12: f64,
    pub phi_star_13: f64,
    pub ezgp_12: f64,
    pub ezgp_13: f64,
}

impl PairOrdering {
    /// `phi_star` strictly ranks `(w1, w3)` above `(w1, w2)` while the
    /// additive model ranks them the other way round (weakly).
    pub fn reversed(&self) -> bool {
        self.phi_star_12 < self.phi_star_13 && self.ezgp_12 >= self.ezgp_13
    }
}

/// The three inputs `w1 = (a, b; 1, 2)`, `w2 = (c, d; 1, 2)`,
/// `w3 = (c, d; 2, 1)` on two quantitative and two two-level factors.
pub fn example_inputs(a: f64, b: f64, c: f64, d: f64) -> [MixedInput; 3] {
    [
        MixedInput::new(vec![a, b], vec![1, 2]),
        MixedInput::new(vec![c, d], vec![1, 2]),
        MixedInput::new(vec![c, d], vec![2, 1]),
    ]
}

/// Compares correlation orderings for [`example_inputs`]. `params` must fit
/// the schema `p = 2, q = 2, m = (2, 2)`.
pub fn compare_orderings(w: &[MixedInput; 3], params: &EzgpParams) -> Result<PairOrdering> {
    let schema = ProblemSchema::new(2, 2, vec![2, 2])?;
    let total: f64 = params.sigma2.iter().sum();
    Ok(PairOrdering {
        phi_star_12: phi_star(&schema, &w[0], &w[1], 1.0, params)?,
        phi_star_13: phi_star(&schema, &w[0], &w[2], 1.0, params)?,
        ezgp_12: ezgp_cov(&schema, &w[0], &w[1], params)? / total,
        ezgp_13: ezgp_cov(&schema, &w[0], &w[2], params)? / total,
    })
}
