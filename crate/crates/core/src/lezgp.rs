//! Localized fitting: each target is predicted from a model trained only on
//! the runs sharing at least `n_s` qualitative levels with it.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::{normalize_quantitative, Dataset, MixedInput};
use crate::error::{Error, Result};
use crate::inference::{fit, FitConfig};
use crate::kernels::ModelKind;
use crate::predict::{predict_batch, PredictionResult};

/// Number of positions where two level vectors agree.
pub fn count_matching_levels(z: &[usize], z_star: &[usize]) -> Result<usize> {
    if z.len() != z_star.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: z_star.len(),
        });
    }
    Ok(z.iter().zip(z_star).filter(|(a, b)| a == b).count())
}

/// Indices of the rows of `d` sharing at least `n_s` levels with `z_star`.
pub fn key_subset_indices(d: &Dataset, z_star: &[usize], n_s: usize) -> Result<Vec<usize>> {
    let q = d.schema().q();
    if n_s > q {
        return Err(Error::InvalidParameter(format!("n_s = {n_s} exceeds q = {q}")));
    }
    let mut idx = Vec::new();
    for (i, w) in d.inputs().iter().enumerate() {
        if count_matching_levels(&w.z, z_star)? >= n_s {
            idx.push(i);
        }
    }
    Ok(idx)
}

/// The key subset for `w_star`, in the original row order.
pub fn select_key_subset(d: &Dataset, w_star: &MixedInput, n_s: usize) -> Result<Dataset> {
    d.schema().validate(w_star)?;
    let idx = key_subset_indices(d, &w_star.z, n_s)?;
    if idx.is_empty() {
        return Err(Error::EmptyKeySubset {
            n_s,
            levels: w_star.z.clone(),
        });
    }
    d.subset(&idx)
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Key-subset size on a full factorial in `q` factors with `m` levels each:
/// `sum_{i=n_s}^{q} C(q, i) (m - 1)^(q - i)`.
pub fn full_factorial_subset_size(m: usize, q: usize, n_s: usize) -> u128 {
    (n_s..=q)
        .map(|i| binomial(q as u128, i as u128) * ((m - 1) as u128).pow((q - i) as u32))
        .sum()
}

/// Picks `n_s` in `(q/2, q]` whose key subset is closest to `10 (p + q)`
/// rows among those larger than the model's parameter count; ties go to
/// the larger `n_s`.
pub fn recommend_ns(d: &Dataset, w_star: &MixedInput, kind: ModelKind) -> Result<usize> {
    d.schema().validate(w_star)?;
    let (p, q) = (d.schema().p(), d.schema().q());
    let target = 10 * (p + q);
    let n_params = kind.param_count(d.schema());
    let mut best: Option<(usize, usize)> = None;
    for n_s in (q / 2 + 1)..=q {
        let size = key_subset_indices(d, &w_star.z, n_s)?.len();
        if size <= n_params {
            continue;
        }
        let dist = size.abs_diff(target);
        if best.is_none_or(|(_, bd)| dist <= bd) {
            best = Some((n_s, dist));
        }
    }
    best.map(|(n_s, _)| n_s).ok_or_else(|| {
        log::warn!("no n_s in ({}, {q}] leaves more than {n_params} runs; consider a smaller n_s", q / 2);
        Error::NoAdmissibleNs(format!(
            "no n_s in ({}, {q}] gives a key subset larger than the {n_params} parameters of {kind}; try a smaller n_s",
            q / 2
        ))
    })
}

/// Targets sharing one level combination, and the rows they are fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct LezgpGroup {
    pub levels: Vec<usize>,
    pub n_s: usize,
    pub subset: Vec<usize>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LezgpPlan {
    pub groups: Vec<LezgpGroup>,
}

/// Groups targets by level combination (first-appearance order) and selects
/// each group's key subset. With `n_s = None` the rule of thumb picks it per
/// group.
pub fn plan(d: &Dataset, targets: &[MixedInput], n_s: Option<usize>, kind: ModelKind) -> Result<LezgpPlan> {
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    let mut groups: Vec<LezgpGroup> = Vec::new();
    for (t, w) in targets.iter().enumerate() {
        d.schema().validate(w).map_err(|e| crate::data::with_row(e, t + 1))?;
        let g = *index.entry(w.z.as_slice()).or_insert_with(|| {
            groups.push(LezgpGroup {
                levels: w.z.clone(),
                n_s: 0,
                subset: Vec::new(),
                targets: Vec::new(),
            });
            groups.len() - 1
        });
        groups[g].targets.push(t);
    }
    for g in &mut groups {
        let w = &targets[g.targets[0]];
        g.n_s = match n_s {
            Some(v) => v,
            None => recommend_ns(d, w, kind)?,
        };
        g.subset = key_subset_indices(d, &g.levels, g.n_s)?;
        if g.subset.is_empty() {
            return Err(Error::EmptyKeySubset {
                n_s: g.n_s,
                levels: g.levels.clone(),
            });
        }
        log::info!(
            "levels {:?}: n_s={}, |K_s|={}, {} target(s)",
            g.levels,
            g.n_s,
            g.subset.len(),
            g.targets.len()
        );
    }
    Ok(LezgpPlan { groups })
}

/// Fits one model per group of the plan and predicts its targets; results
/// come back in target order.
pub fn execute_plan(
    d: &Dataset,
    targets: &[MixedInput],
    plan: &LezgpPlan,
    kind: ModelKind,
    cfg: &FitConfig,
) -> Result<Vec<PredictionResult>> {
    if !kind.is_indicator() {
        return Err(Error::InvalidParameter(format!(
            "localized fitting supports ezgp and eezgp, not {kind}"
        )));
    }
    let normalized = normalize_quantitative(d);
    let per_group: Vec<Result<Vec<PredictionResult>>> = plan
        .groups
        .par_iter()
        .map(|g| {
            let sub = normalized.subset(&g.subset)?;
            let model = fit(&sub, kind, cfg).map_err(|e| match e {
                Error::FitFailed(msg) => Error::FitFailed(format!("levels {:?}: {msg}", g.levels)),
                other => other,
            })?;
            let ws: Vec<MixedInput> = g.targets.iter().map(|&t| targets[t].clone()).collect();
            predict_batch(&model, &ws)
        })
        .collect();
    let mut out = vec![PredictionResult { mean: f64::NAN, mse: f64::NAN }; targets.len()];
    for (g, preds) in plan.groups.iter().zip(per_group) {
        for (&t, p) in g.targets.iter().zip(preds?) {
            out[t] = p;
        }
    }
    Ok(out)
}

/// Localized prediction with a fixed `n_s` for every group.
pub fn lezgp_predict(
    d: &Dataset,
    targets: &[MixedInput],
    n_s: usize,
    kind: ModelKind,
    cfg: &FitConfig,
) -> Result<Vec<PredictionResult>> {
    if n_s > d.schema().q() {
        return Err(Error::InvalidParameter(format!(
            "n_s = {n_s} exceeds q = {}",
            d.schema().q()
        )));
    }
    let plan = plan(d, targets, Some(n_s), kind)?;
    execute_plan(d, targets, &plan, kind, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ProblemSchema;

    /// Five runs with one quantitative and four qualitative factors.
    fn five_run() -> Dataset {
        let s = ProblemSchema::symmetric(1, 4, 3).unwrap();
        let z = [[1, 3, 3, 1], [1, 2, 1, 3], [2, 2, 3, 1], [2, 2, 3, 2], [1, 2, 3, 1]];
        let x = [0.1, 0.3, 0.2, 0.9, 0.5];
        let inputs = z
            .iter()
            .zip(x)
            .map(|(z, x)| MixedInput::new(vec![x], z.to_vec()))
            .collect();
        Dataset::new(s, inputs, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()
    }

    #[test]
    fn matching_counts() {
        assert_eq!(count_matching_levels(&[1, 2, 3], &[3, 2, 1]).unwrap(), 1);
        assert_eq!(count_matching_levels(&[1, 2, 3], &[1, 2, 3]).unwrap(), 3);
        assert_eq!(count_matching_levels(&[1, 1], &[2, 2]).unwrap(), 0);
        assert!(count_matching_levels(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn key_subset_examples() {
        let d = five_run();
        let w = MixedInput::new(vec![0.3], vec![1, 2, 3, 1]);
        let k = select_key_subset(&d, &w, 3).unwrap();
        assert_eq!(k.y(), &[1.0, 3.0, 5.0]);
        assert_eq!(select_key_subset(&d, &w, 0).unwrap().len(), 5);
        assert_eq!(key_subset_indices(&d, &w.z, 4).unwrap(), vec![4]);
        let far = MixedInput::new(vec![0.3], vec![3, 1, 2, 3]);
        match select_key_subset(&d, &far, 2) {
            Err(Error::EmptyKeySubset { n_s: 2, levels }) => assert_eq!(levels, vec![3, 1, 2, 3]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(key_subset_indices(&d, &w.z, 5).is_err());
    }

    #[test]
    fn factorial_sizes() {
        let got: Vec<u128> = (5..=9).map(|n| full_factorial_subset_size(3, 9, n)).collect();
        assert_eq!(got, vec![2851, 835, 163, 19, 1]);
        assert_eq!(full_factorial_subset_size(3, 9, 0), 19683);
    }

    #[test]
    fn recommend_with_two_factors() {
        let s = ProblemSchema::symmetric(1, 2, 2).unwrap();
        let mut inputs = Vec::new();
        for i in 0..40 {
            inputs.push(MixedInput::new(vec![i as f64 / 40.0], vec![1 + i % 2, 1 + (i / 2) % 2]));
        }
        let d = Dataset::new(s, inputs, (0..40).map(|i| i as f64).collect()).unwrap();
        let w = MixedInput::new(vec![0.5], vec![1, 1]);
        assert_eq!(recommend_ns(&d, &w, ModelKind::Eezgp).unwrap(), 2);
        let small = d.subset(&[0, 1, 2, 3]).unwrap();
        assert!(matches!(
            recommend_ns(&small, &w, ModelKind::Eezgp),
            Err(Error::NoAdmissibleNs(_))
        ));
    }

    #[test]
    fn grouping_by_levels() {
        let d = five_run();
        let t = vec![
            MixedInput::new(vec![0.2], vec![1, 2, 3, 1]),
            MixedInput::new(vec![0.4], vec![2, 2, 3, 1]),
            MixedInput::new(vec![0.6], vec![1, 2, 3, 1]),
        ];
        let plan = plan(&d, &t, Some(1), ModelKind::Eezgp).unwrap();
        assert_eq!(plan.groups.len(), 2);
        assert_eq!(plan.groups[0].targets, vec![0, 2]);
        assert_eq!(plan.groups[1].targets, vec![1]);
    }
}
