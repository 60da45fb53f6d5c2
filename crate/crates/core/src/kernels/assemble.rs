//! Covariance-matrix assembly.
//!
//! For the indicator models the matrix is built as
//! `A_0 + sum_h sum_l (B_hl B_hl^T) o A_hl`, where `B_hl` selects the runs at
//! level `l` of factor `h` and `o` is the elementwise product. Since
//! `B_hl B_hl^T` is the indicator of one block of runs, only that block of
//! `A_hl` is ever evaluated. [`assemble_schur_dense`] spells the same sum out
//! with explicit matrices; [`assemble_elementwise`] evaluates the pairwise
//! covariance entry by entry. Both serve as oracles.

use nalgebra::{DMatrix, DVector};

use super::{gauss, EezgpParams, EzgpParams, ModelParams, Prepared};
use crate::data::{Dataset, MixedInput, ProblemSchema};
use crate::error::Result;

/// Symmetric covariance matrix plus the nugget added to its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub matrix: DMatrix<f64>,
    pub nugget: f64,
}

impl CovMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix, nugget: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Assembles the covariance matrix of the dataset's (stored) inputs.
pub fn assemble_cov_matrix(d: &Dataset, params: &ModelParams) -> Result<CovMatrix> {
    params.validate(d.schema())?;
    Ok(CovMatrix::new(assemble_prepared(d.inputs(), params, &params.prepare())))
}

pub(crate) fn assemble_prepared(
    inputs: &[MixedInput],
    params: &ModelParams,
    prepared: &Prepared<'_>,
) -> DMatrix<f64> {
    match params {
        ModelParams::Ezgp(p) => schur_blocks(inputs, p),
        ModelParams::Eezgp(p) => schur_blocks(inputs, p),
        ModelParams::Baseline(_) => elementwise(inputs, |a, b| prepared.cov(a, b)),
    }
}

/// Entry-by-entry assembly from the pairwise covariance.
pub fn assemble_elementwise(inputs: &[MixedInput], params: &ModelParams) -> DMatrix<f64> {
    let prepared = params.prepare();
    elementwise(inputs, |a, b| prepared.cov(a, b))
}

fn elementwise(inputs: &[MixedInput], cov: impl Fn(&MixedInput, &MixedInput) -> f64) -> DMatrix<f64> {
    let n = inputs.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = cov(&inputs[i], &inputs[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

trait Indicator {
    fn sigma2(&self) -> &[f64];
    fn theta0(&self) -> &[f64];
    /// Correlation of the adjustment process for level `l` (1-based) of
    /// factor `h` (0-based).
    fn adjust(&self, h: usize, l: usize, a: &[f64], b: &[f64]) -> f64;
}

impl Indicator for EzgpParams {
    fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }
    fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    #[inline]
    fn adjust(&self, h: usize, l: usize, a: &[f64], b: &[f64]) -> f64 {
        gauss(a, b, &self.theta[h][l - 1])
    }
}

impl Indicator for EezgpParams {
    fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }
    fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    #[inline]
    fn adjust(&self, h: usize, l: usize, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..a.len() {
            let d = a[k] - b[k];
            s += d * d;
        }
        (-self.theta[h][l - 1] * s).exp()
    }
}

fn schur_blocks<K: Indicator>(inputs: &[MixedInput], k: &K) -> DMatrix<f64> {
    let n = inputs.len();
    let q = k.sigma2().len() - 1;
    let mut m = DMatrix::zeros(n, n);
    let s0 = k.sigma2()[0];
    for j in 0..n {
        for i in 0..=j {
            m[(i, j)] = s0 * gauss(&inputs[i].x, &inputs[j].x, k.theta0());
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for h in 0..q {
        let sh = k.sigma2()[h + 1];
        groups.clear();
        for (i, w) in inputs.iter().enumerate() {
            let l = w.z[h];
            if groups.len() < l {
                groups.resize_with(l, Vec::new);
            }
            groups[l - 1].push(i);
        }
        for (l0, block) in groups.iter().enumerate() {
            for (b, &j) in block.iter().enumerate() {
                for &i in &block[..=b] {
                    m[(i, j)] += sh * k.adjust(h, l0 + 1, &inputs[i].x, &inputs[j].x);
                }
            }
        }
    }
    m.fill_lower_triangle_with_upper_triangle();
    m
}

/// `E_h`: the `n x m_h` dummy coding of one qualitative column.
pub fn expansion_matrix(z_col: &[usize], m: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(z_col.len(), m);
    for (i, &l) in z_col.iter().enumerate() {
        e[(i, l - 1)] = 1.0;
    }
    e
}

/// `B_hl = E_h (I_m)_l`: indicator of the runs at level `l` (1-based).
pub fn level_selector(z_col: &[usize], m: usize, l: usize) -> DVector<f64> {
    let e = expansion_matrix(z_col, m);
    let mut unit = DVector::zeros(m);
    unit[l - 1] = 1.0;
    e * unit
}

/// Literal `A_0 + sum_h sum_l (B_hl B_hl^T) o A_hl` with full `n x n`
/// matrices for every term.
pub fn assemble_schur_dense(
    schema: &ProblemSchema,
    inputs: &[MixedInput],
    params: &EzgpParams,
) -> DMatrix<f64> {
    let n = inputs.len();
    let full = |sigma2: f64, theta: &[f64]| {
        DMatrix::from_fn(n, n, |i, j| sigma2 * gauss(&inputs[i].x, &inputs[j].x, theta))
    };
    let mut phi = full(params.sigma2[0], &params.theta0);
    for (h, &m) in schema.levels().iter().enumerate() {
        let z_col: Vec<usize> = inputs.iter().map(|w| w.z[h]).collect();
        for l in 1..=m {
            let b = level_selector(&z_col, m, l);
            let mask = &b * b.transpose();
            let a_hl = full(params.sigma2[h + 1], &params.theta[h][l - 1]);
            phi += mask.component_mul(&a_hl);
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_for_four_runs() {
        let z = [1, 2, 3, 2];
        let b = level_selector(&z, 3, 2);
        assert_eq!(b.as_slice(), &[0.0, 1.0, 0.0, 1.0]);
        let bbt = &b * b.transpose();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
        ]);
        assert_eq!(bbt, expected);
    }

    #[test]
    fn single_point_matrix() {
        let s = ProblemSchema::new(2, 2, vec![2, 3]).unwrap();
        let params = ModelParams::Ezgp(EzgpParams::uniform(&s, 4.0, 1.0));
        let d = Dataset::new(
            s.clone(),
            vec![MixedInput::new(vec![0.1, 0.2], vec![2, 3])],
            vec![1.0],
        )
        .unwrap();
        let c = assemble_cov_matrix(&d, &params).unwrap();
        assert_eq!(c.dim(), 1);
        assert!((c.matrix[(0, 0)] - 4.0).abs() < 1e-15);
        assert_eq!(c.nugget, 0.0);
    }
}
