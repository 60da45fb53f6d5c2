//! Experimental designs.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Largest design `factorial_design` will build.
pub const MAX_FACTORIAL_ROWS: usize = 1_000_000;

/// Random Latin hypercube: `n` points in `[0, 1]^p`, one per stratum in
/// every column.
pub fn latin_hypercube(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    latin_hypercube_with(n, p, &mut ChaCha20Rng::seed_from_u64(seed))
}

#[allow(clippy::needless_range_loop)]
pub fn latin_hypercube_with<R: Rng>(n: usize, p: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; p]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..p {
        perm.shuffle(rng);
        for (i, &s) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            out[i][k] = (s as f64 + u) / n as f64;
        }
    }
    out
}

/// All level combinations (1-based), first factor slowest, repeated
/// `replicates` times.
pub fn factorial_design(m: &[usize], replicates: usize) -> Result<Vec<Vec<usize>>> {
    if let Some(&bad) = m.iter().find(|&&v| v < 2) {
        return Err(Error::InvalidParameter(format!("factor with {bad} levels; need at least 2")));
    }
    let combos = m
        .iter()
        .try_fold(1usize, |acc, &v| acc.checked_mul(v))
        .and_then(|c| c.checked_mul(replicates))
        .filter(|&rows| rows <= MAX_FACTORIAL_ROWS)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "factorial {m:?} x {replicates} exceeds {MAX_FACTORIAL_ROWS} rows"
            ))
        })?;
    let single = combos / replicates.max(1);
    let mut block = Vec::with_capacity(single);
    for idx in 0..single {
        block.push(combination(m, idx));
    }
    let mut out = Vec::with_capacity(combos);
    for _ in 0..replicates {
        out.extend(block.iter().cloned());
    }
    Ok(out)
}

/// The `idx`-th combination in lexicographic order.
fn combination(m: &[usize], mut idx: usize) -> Vec<usize> {
    let mut z = vec![0; m.len()];
    for h in (0..m.len()).rev() {
        z[h] = idx % m[h] + 1;
        idx /= m[h];
    }
    z
}

/// Regular 243-run fraction of the 3^9 factorial with generators
/// `F = A+B+C+D+E`, `G = A+2B+2C+D`, `H = A+2B+C+2E`, `J = A+B+2D+2E`
/// (mod 3) on the full factorial in `A..E`. Resolution V.
pub fn fractional_factorial_243() -> Vec<Vec<usize>> {
    let gens: [[usize; 5]; 4] = [[1, 1, 1, 1, 1], [1, 2, 2, 1, 0], [1, 2, 1, 0, 2], [1, 1, 0, 2, 2]];
    (0..243)
        .map(|idx| {
            let base: Vec<usize> = combination(&[3; 5], idx).iter().map(|l| l - 1).collect();
            let mut row: Vec<usize> = base.iter().map(|b| b + 1).collect();
            for g in &gens {
                let v: usize = g.iter().zip(&base).map(|(c, b)| c * b).sum();
                row.push(v % 3 + 1);
            }
            row
        })
        .collect()
}

/// `count` distinct level combinations drawn uniformly from the full
/// factorial, in draw order.
pub fn sample_level_combinations<R: Rng>(m: &[usize], count: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    let total = m
        .iter()
        .try_fold(1usize, |acc, &v| acc.checked_mul(v))
        .ok_or_else(|| Error::InvalidParameter("level space too large".into()))?;
    if count > total {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {count} distinct combinations from {total}"
        )));
    }
    Ok(index::sample(rng, total, count)
        .into_iter()
        .map(|i| combination(m, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn lhs_stratification() {
        let d = latin_hypercube(7, 3, 11);
        assert_eq!(d.len(), 7);
        for k in 0..3 {
            let mut col: Vec<f64> = d.iter().map(|r| r[k]).collect();
            col.sort_by(f64::total_cmp);
            for (i, v) in col.iter().enumerate() {
                assert!(*v >= i as f64 / 7.0 && *v < (i + 1) as f64 / 7.0);
            }
        }
        let one = latin_hypercube(1, 4, 0);
        assert!(one[0].iter().all(|v| (0.0..1.0).contains(v)));
        assert_ne!(latin_hypercube(5, 2, 1), latin_hypercube(5, 2, 2));
        assert_eq!(latin_hypercube(5, 2, 1), latin_hypercube(5, 2, 1));
    }

    #[test]
    fn factorial_sizes() {
        let d = factorial_design(&[3, 3], 1).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(d[0], vec![1, 1]);
        assert_eq!(d[1], vec![1, 2]);
        assert_eq!(d[8], vec![3, 3]);
        assert_eq!(factorial_design(&[3; 3], 3).unwrap().len(), 81);
        assert_eq!(factorial_design(&[3; 9], 1).unwrap().len(), 19683);
        assert!(factorial_design(&[10; 7], 1).is_err());
        assert!(factorial_design(&[1, 3], 1).is_err());
    }

    #[test]
    fn fraction_is_balanced_strength_four() {
        let d = fractional_factorial_243();
        assert_eq!(d.len(), 243);
        let distinct: HashSet<_> = d.iter().collect();
        assert_eq!(distinct.len(), 243);
        // Every set of four columns sees each of the 81 level combinations three times.
        for a in 0..9 {
            for b in a + 1..9 {
                for c in b + 1..9 {
                    for e in c + 1..9 {
                        let mut counts = std::collections::HashMap::new();
                        for r in &d {
                            *counts.entry((r[a], r[b], r[c], r[e])).or_insert(0) += 1;
                        }
                        assert_eq!(counts.len(), 81);
                        assert!(counts.values().all(|&v| v == 3));
                    }
                }
            }
        }
    }

    #[test]
    fn sampled_combinations_are_distinct() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let s = sample_level_combinations(&[3; 9], 1215, &mut rng).unwrap();
        let distinct: HashSet<_> = s.iter().collect();
        assert_eq!(distinct.len(), 1215);
        assert!(s.iter().flatten().all(|l| (1..=3).contains(l)));
        assert!(sample_level_combinations(&[2, 2], 5, &mut rng).is_err());
    }
}
