//! Baseline covariances that correlate qualitative levels through a
//! per-factor level-correlation matrix `T_j`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_schema_match, check_sigma2, check_theta, gauss, sq_dist_into, weighted_sq, ModelKind, ParamFamily, ANGLE_EPS};
use crate::data::{MixedInput, ProblemSchema};
use crate::error::{Error, Result};

/// How the quantitative Gaussian correlation enters the covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum QuantStructure {
    /// `sigma2 * prod_j tau_j * R(x, x' | theta)`.
    Multiplicative { sigma2: f64, theta: Vec<f64> },
    /// `sum_j sigma2[j] * tau_j * R(x, x' | theta[j])`.
    Additive { sigma2: Vec<f64>, theta: Vec<Vec<f64>> },
}

/// Level-correlation parameterization, one entry per qualitative factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum QualCorr {
    /// Common correlation `c[j]` in `(0, 1)` between distinct levels.
    Exchangeable { c: Vec<f64> },
    /// `exp{-(theta[j][a] + theta[j][b])}` between distinct levels `a`, `b`.
    Multiplicative { theta: Vec<Vec<f64>> },
    /// `T_j = L_j L_j^T` with `L_j` built from hypersphere angles, packed
    /// row by row: row `r` (0-based, `r >= 1`) holds `r` angles.
    Unrestrictive { angles: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub mu: f64,
    pub structure: QuantStructure,
    pub qual: QualCorr,
}

fn packed_index(r: usize, s: usize) -> usize {
    r * (r - 1) / 2 + s
}

/// Lower-triangular `L` (row-major `m x m`) for one factor's angle table.
/// Angles are clamped into `[ANGLE_EPS, pi - ANGLE_EPS]`.
pub fn uc_lower_factor(angles: &[f64], m: usize) -> Vec<f64> {
    let mut l = vec![0.0; m * m];
    l[0] = 1.0;
    for r in 1..m {
        let mut prod = 1.0;
        for s in 0..r {
            let phi = clamp_angle(angles[packed_index(r, s)]);
            l[r * m + s] = prod * phi.cos();
            prod *= phi.sin();
        }
        l[r * m + r] = prod;
    }
    l
}

fn clamp_angle(phi: f64) -> f64 {
    phi.clamp(ANGLE_EPS, PI - ANGLE_EPS)
}

/// Derivative of row `r` of `L` with respect to angle `(r, t)`.
fn uc_row_derivative(angles: &[f64], m: usize, r: usize, t: usize) -> Vec<f64> {
    let phi: Vec<f64> = (0..r).map(|s| clamp_angle(angles[packed_index(r, s)])).collect();
    let mut d = vec![0.0; m];
    for (s, ds) in d.iter_mut().enumerate().take(r + 1) {
        if t > s || (s == r && t >= r) {
            continue;
        }
        let mut v = 1.0;
        for (u, &ph) in phi.iter().enumerate().take(s) {
            v *= if u == t { ph.cos() } else { ph.sin() };
        }
        if s < r {
            v *= if s == t { -phi[s].sin() } else { phi[s].cos() };
        }
        *ds = v;
    }
    d
}

/// Precomputed level-correlation matrix for one factor plus its derivative
/// with respect to each of the factor's own parameters.
#[derive(Debug, Clone)]
struct QualTable {
    m: usize,
    tau: Vec<f64>,
    dtau: Vec<Vec<f64>>,
}

impl QualTable {
    fn exchangeable(c: f64, m: usize) -> Self {
        let mut tau = vec![c; m * m];
        let mut d = vec![1.0; m * m];
        for a in 0..m {
            tau[a * m + a] = 1.0;
            d[a * m + a] = 0.0;
        }
        Self { m, tau, dtau: vec![d] }
    }

    fn multiplicative(theta: &[f64]) -> Self {
        let m = theta.len();
        let mut tau = vec![1.0; m * m];
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    tau[a * m + b] = (-(theta[a] + theta[b])).exp();
                }
            }
        }
        let dtau = (0..m)
            .map(|l| {
                let mut d = vec![0.0; m * m];
                for a in 0..m {
                    for b in 0..m {
                        if a != b && (a == l || b == l) {
                            d[a * m + b] = -tau[a * m + b];
                        }
                    }
                }
                d
            })
            .collect();
        Self { m, tau, dtau }
    }

    fn unrestrictive(angles: &[f64], m: usize) -> Self {
        let l = uc_lower_factor(angles, m);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let row = |i: usize| &l[i * m..(i + 1) * m];
        let mut tau = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                tau[a * m + b] = dot(row(a), row(b));
            }
        }
        let mut dtau = Vec::with_capacity(m * (m - 1) / 2);
        for r in 1..m {
            for t in 0..r {
                let dr = uc_row_derivative(angles, m, r, t);
                let mut d = vec![0.0; m * m];
                for a in 0..m {
                    for b in 0..m {
                        let mut v = 0.0;
                        if a == r {
                            v += dot(&dr, row(b));
                        }
                        if b == r {
                            v += dot(row(a), &dr);
                        }
                        d[a * m + b] = v;
                    }
                }
                dtau.push(d);
            }
        }
        Self { m, tau, dtau }
    }

    #[inline]
    fn at(&self, a: usize, b: usize) -> f64 {
        self.tau[(a - 1) * self.m + (b - 1)]
    }
}

/// Level correlation `tau^{(j)}` between levels `l1` and `l2` (1-based) of
/// factor `j` (0-based).
pub fn tau_qual(j: usize, l1: usize, l2: usize, qual: &QualCorr) -> Result<f64> {
    let table = match qual {
        QualCorr::Exchangeable { c } => {
            let c = *c.get(j).ok_or_else(|| factor_missing(j))?;
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::InvalidParameter(format!("EC correlation {c} outside (0, 1)")));
            }
            let m = l1.max(l2).max(2);
            QualTable::exchangeable(c, m)
        }
        QualCorr::Multiplicative { theta } => {
            let t = theta.get(j).ok_or_else(|| factor_missing(j))?;
            if t.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter("MC level parameters must be positive".into()));
            }
            QualTable::multiplicative(t)
        }
        QualCorr::Unrestrictive { angles } => {
            let a = angles.get(j).ok_or_else(|| factor_missing(j))?;
            let m = levels_from_angles(a.len())?;
            check_angles(a)?;
            QualTable::unrestrictive(a, m)
        }
    };
    for l in [l1, l2] {
        if l == 0 || l > table.m {
            return Err(Error::LevelOutOfRange {
                row: None,
                factor: j + 1,
                level: l,
                max: table.m,
            });
        }
    }
    Ok(table.at(l1, l2))
}

fn factor_missing(j: usize) -> Error {
    Error::InvalidParameter(format!("no level-correlation parameters for factor {}", j + 1))
}

fn levels_from_angles(count: usize) -> Result<usize> {
    (2..64)
        .find(|m| m * (m - 1) / 2 == count)
        .ok_or_else(|| Error::InvalidParameter(format!("{count} angles do not form a lower-triangular table")))
}

fn check_angles(a: &[f64]) -> Result<()> {
    match a.iter().find(|v| !(**v > 0.0 && **v < PI)) {
        Some(v) => Err(Error::InvalidParameter(format!("UC angle {v} outside (0, pi)"))),
        None => Ok(()),
    }
}

impl BaselineParams {
    pub fn kind(&self) -> ModelKind {
        match (&self.structure, &self.qual) {
            (QuantStructure::Multiplicative { .. }, QualCorr::Exchangeable { .. }) => ModelKind::Ec,
            (QuantStructure::Multiplicative { .. }, QualCorr::Multiplicative { .. }) => ModelKind::Mc,
            (QuantStructure::Multiplicative { .. }, QualCorr::Unrestrictive { .. }) => ModelKind::Uc,
            (QuantStructure::Additive { .. }, QualCorr::Exchangeable { .. }) => ModelKind::AdEc,
            (QuantStructure::Additive { .. }, QualCorr::Multiplicative { .. }) => ModelKind::AdMc,
            (QuantStructure::Additive { .. }, QualCorr::Unrestrictive { .. }) => ModelKind::AdUc,
        }
    }

    /// Starting point: unit `theta`, `c = 0.5`, MC level parameters giving
    /// `tau = 0.5`, UC angles of `pi / 3`.
    pub fn canonical(kind: ModelKind, schema: &ProblemSchema, total_var: f64) -> Self {
        let (p, q) = (schema.p(), schema.q());
        let structure = if kind.is_additive_baseline() {
            QuantStructure::Additive {
                sigma2: vec![total_var / q as f64; q],
                theta: vec![vec![1.0; p]; q],
            }
        } else {
            QuantStructure::Multiplicative {
                sigma2: total_var,
                theta: vec![1.0; p],
            }
        };
        let qual = match kind {
            ModelKind::Ec | ModelKind::AdEc => QualCorr::Exchangeable { c: vec![0.5; q] },
            ModelKind::Mc | ModelKind::AdMc => QualCorr::Multiplicative {
                theta: schema
                    .levels()
                    .iter()
                    .map(|&m| vec![0.5 * std::f64::consts::LN_2; m])
                    .collect(),
            },
            ModelKind::Uc | ModelKind::AdUc => QualCorr::Unrestrictive {
                angles: schema
                    .levels()
                    .iter()
                    .map(|&m| vec![PI / 3.0; m * (m - 1) / 2])
                    .collect(),
            },
            ModelKind::Ezgp | ModelKind::Eezgp => {
                unreachable!("indicator models have no baseline parameters")
            }
        };
        Self {
            mu: 0.0,
            structure,
            qual,
        }
    }

    pub fn validate(&self, schema: &ProblemSchema) -> Result<()> {
        let (p, q) = (schema.p(), schema.q());
        let dims = |expected: usize, got: usize| -> Result<()> {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, got })
            }
        };
        match &self.structure {
            QuantStructure::Multiplicative { sigma2, theta } => {
                check_sigma2(std::slice::from_ref(sigma2))?;
                dims(p, theta.len())?;
                check_theta("theta", theta)?;
            }
            QuantStructure::Additive { sigma2, theta } => {
                dims(q, sigma2.len())?;
                check_sigma2(sigma2)?;
                dims(q, theta.len())?;
                for t in theta {
                    dims(p, t.len())?;
                    check_theta("theta", t)?;
                }
            }
        }
        match &self.qual {
            QualCorr::Exchangeable { c } => {
                dims(q, c.len())?;
                if let Some(v) = c.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                    return Err(Error::InvalidParameter(format!("EC correlation {v} outside (0, 1)")));
                }
            }
            QualCorr::Multiplicative { theta } => {
                dims(q, theta.len())?;
                for (t, &m) in theta.iter().zip(schema.levels()) {
                    dims(m, t.len())?;
                    if t.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                        return Err(Error::InvalidParameter("MC level parameters must be positive".into()));
                    }
                }
            }
            QualCorr::Unrestrictive { angles } => {
                dims(q, angles.len())?;
                for (a, &m) in angles.iter().zip(schema.levels()) {
                    dims(m * (m - 1) / 2, a.len())?;
                    check_angles(a)?;
                }
            }
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        match &self.structure {
            QuantStructure::Multiplicative { sigma2, .. } => *sigma2,
            QuantStructure::Additive { sigma2, .. } => sigma2.iter().sum(),
        }
    }

    pub fn natural(&self) -> Vec<f64> {
        let mut v = Vec::new();
        match &self.structure {
            QuantStructure::Multiplicative { sigma2, theta } => {
                v.push(*sigma2);
                v.extend_from_slice(theta);
            }
            QuantStructure::Additive { sigma2, theta } => {
                v.extend_from_slice(sigma2);
                for t in theta {
                    v.extend_from_slice(t);
                }
            }
        }
        match &self.qual {
            QualCorr::Exchangeable { c } => v.extend_from_slice(c),
            QualCorr::Multiplicative { theta } => theta.iter().for_each(|t| v.extend_from_slice(t)),
            QualCorr::Unrestrictive { angles } => angles.iter().for_each(|a| v.extend_from_slice(a)),
        }
        v
    }

    pub fn with_natural(&self, v: &[f64]) -> Self {
        let mut out = self.clone();
        let mut off = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&v[off..off + dst.len()]);
            off += dst.len();
        };
        match &mut out.structure {
            QuantStructure::Multiplicative { sigma2, theta } => {
                take(std::slice::from_mut(sigma2));
                take(theta);
            }
            QuantStructure::Additive { sigma2, theta } => {
                take(sigma2);
                theta.iter_mut().for_each(|t| take(t));
            }
        }
        match &mut out.qual {
            QualCorr::Exchangeable { c } => take(c),
            QualCorr::Multiplicative { theta } => theta.iter_mut().for_each(|t| take(t)),
            QualCorr::Unrestrictive { angles } => angles.iter_mut().for_each(|a| take(a)),
        }
        out
    }

    pub fn families(&self) -> Vec<ParamFamily> {
        let mut f = Vec::new();
        match &self.structure {
            QuantStructure::Multiplicative { theta, .. } => {
                f.push(ParamFamily::Sigma2);
                f.extend(std::iter::repeat_n(ParamFamily::Theta, theta.len()));
            }
            QuantStructure::Additive { sigma2, theta } => {
                f.extend(std::iter::repeat_n(ParamFamily::Sigma2, sigma2.len()));
                let n: usize = theta.iter().map(Vec::len).sum();
                f.extend(std::iter::repeat_n(ParamFamily::Theta, n));
            }
        }
        let (fam, n) = match &self.qual {
            QualCorr::Exchangeable { c } => (ParamFamily::EcCorrelation, c.len()),
            QualCorr::Multiplicative { theta } => {
                (ParamFamily::McLevel, theta.iter().map(Vec::len).sum())
            }
            QualCorr::Unrestrictive { angles } => {
                (ParamFamily::UcAngle, angles.iter().map(Vec::len).sum())
            }
        };
        f.extend(std::iter::repeat_n(fam, n));
        f
    }

    pub(crate) fn prepare(&self) -> PreparedBaseline {
        let tables: Vec<QualTable> = match &self.qual {
            QualCorr::Exchangeable { c } => c
                .iter()
                .map(|&c| QualTable::exchangeable(c, 0))
                .collect(),
            QualCorr::Multiplicative { theta } => {
                theta.iter().map(|t| QualTable::multiplicative(t)).collect()
            }
            QualCorr::Unrestrictive { angles } => angles
                .iter()
                .map(|a| {
                    let m = levels_from_angles(a.len()).unwrap_or(2);
                    QualTable::unrestrictive(a, m)
                })
                .collect(),
        };
        let quant_len = match &self.structure {
            QuantStructure::Multiplicative { theta, .. } => 1 + theta.len(),
            QuantStructure::Additive { sigma2, theta } => {
                sigma2.len() + theta.iter().map(Vec::len).sum::<usize>()
            }
        };
        let mut qual_offsets = Vec::with_capacity(tables.len());
        let mut off = quant_len;
        for t in &tables {
            qual_offsets.push(off);
            off += t.dtau.len();
        }
        PreparedBaseline {
            structure: self.structure.clone(),
            exchangeable: matches!(self.qual, QualCorr::Exchangeable { .. }),
            ec: match &self.qual {
                QualCorr::Exchangeable { c } => c.clone(),
                _ => Vec::new(),
            },
            tables,
            qual_offsets,
        }
    }
}

/// Baseline parameters with level-correlation tables materialized.
pub(crate) struct PreparedBaseline {
    structure: QuantStructure,
    exchangeable: bool,
    ec: Vec<f64>,
    tables: Vec<QualTable>,
    qual_offsets: Vec<usize>,
}

impl PreparedBaseline {
    #[inline]
    fn tau(&self, j: usize, a: usize, b: usize) -> f64 {
        if self.exchangeable {
            if a == b {
                1.0
            } else {
                self.ec[j]
            }
        } else {
            self.tables[j].at(a, b)
        }
    }

    /// Derivative of `tau_j(a, b)` with respect to the factor's `t`-th own
    /// parameter.
    #[inline]
    fn dtau(&self, j: usize, t: usize, a: usize, b: usize) -> f64 {
        if self.exchangeable {
            if a == b {
                0.0
            } else {
                1.0
            }
        } else {
            let tab = &self.tables[j];
            tab.dtau[t][(a - 1) * tab.m + (b - 1)]
        }
    }

    #[inline]
    pub fn cov(&self, a: &MixedInput, b: &MixedInput) -> f64 {
        match &self.structure {
            QuantStructure::Multiplicative { sigma2, theta } => {
                let mut t = 1.0;
                for j in 0..a.z.len() {
                    t *= self.tau(j, a.z[j], b.z[j]);
                }
                sigma2 * t * gauss(&a.x, &b.x, theta)
            }
            QuantStructure::Additive { sigma2, theta } => {
                let mut c = 0.0;
                for j in 0..a.z.len() {
                    c += sigma2[j] * self.tau(j, a.z[j], b.z[j]) * gauss(&a.x, &b.x, &theta[j]);
                }
                c
            }
        }
    }

    pub fn accumulate_grad(
        &self,
        a: &MixedInput,
        b: &MixedInput,
        weight: f64,
        sq: &mut [f64],
        grad: &mut [f64],
    ) {
        let q = a.z.len();
        sq_dist_into(&a.x, &b.x, sq);
        let p = sq.len();
        match &self.structure {
            QuantStructure::Multiplicative { sigma2, theta } => {
                let r = (-weighted_sq(sq, theta)).exp();
                let taus: Vec<f64> = (0..q).map(|j| self.tau(j, a.z[j], b.z[j])).collect();
                let prod: f64 = taus.iter().product();
                grad[0] += weight * prod * r;
                let s = weight * sigma2 * prod * r;
                for k in 0..p {
                    grad[1 + k] -= s * sq[k];
                }
                for j in 0..q {
                    let others: f64 = taus
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != j)
                        .map(|(_, t)| t)
                        .product();
                    let scale = weight * sigma2 * others * r;
                    self.add_qual(j, a.z[j], b.z[j], scale, grad);
                }
            }
            QuantStructure::Additive { sigma2, theta } => {
                for j in 0..q {
                    let r = (-weighted_sq(sq, &theta[j])).exp();
                    let tau = self.tau(j, a.z[j], b.z[j]);
                    grad[j] += weight * tau * r;
                    let s = weight * sigma2[j] * tau * r;
                    let base = q + j * p;
                    for k in 0..p {
                        grad[base + k] -= s * sq[k];
                    }
                    self.add_qual(j, a.z[j], b.z[j], weight * sigma2[j] * r, grad);
                }
            }
        }
    }

    #[inline]
    fn add_qual(&self, j: usize, la: usize, lb: usize, scale: f64, grad: &mut [f64]) {
        if la == lb || scale == 0.0 {
            return;
        }
        let off = self.qual_offsets[j];
        let n = if self.exchangeable { 1 } else { self.tables[j].dtau.len() };
        for t in 0..n {
            grad[off + t] += scale * self.dtau(j, t, la, lb);
        }
    }
}

/// Covariance between two inputs under a baseline model.
pub fn baseline_cov(
    schema: &ProblemSchema,
    a: &MixedInput,
    b: &MixedInput,
    kind: ModelKind,
    params: &BaselineParams,
) -> Result<f64> {
    if params.kind() != kind {
        return Err(Error::InvalidParameter(format!(
            "parameters describe {} but {} was requested",
            params.kind(),
            kind
        )));
    }
    check_schema_match(schema, a, b)?;
    params.validate(schema)?;
    Ok(params.prepare().cov(a, b))
}
