use ezgp::harness::factorial_design;
use ezgp::lezgp::key_subset_indices;
use ezgp::{count_matching_levels, full_factorial_subset_size, Dataset, MixedInput, ProblemSchema};
use proptest::prelude::*;

fn factorial_dataset(m: usize, q: usize) -> Dataset {
    let s = ProblemSchema::new(1, q, vec![m; q]).unwrap();
    let z = factorial_design(&vec![m; q], 1).unwrap();
    let n = z.len();
    let inputs = z
        .into_iter()
        .enumerate()
        .map(|(i, z)| MixedInput::new(vec![i as f64 / n as f64], z))
        .collect();
    Dataset::new(s, inputs, vec![0.0; n]).unwrap()
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `m^q [1 - P(B <= n_s - 1)]` with `B ~ Binomial(q, 1/m)`.
fn probabilistic_count(m: usize, q: usize, n_s: usize) -> f64 {
    let pr = 1.0 / m as f64;
    let cdf: f64 = (0..n_s)
        .map(|k| binomial(q as u64, k as u64) * pr.powi(k as i32) * (1.0 - pr).powi((q - k) as i32))
        .sum();
    (m as f64).powi(q as i32) * (1.0 - cdf)
}

#[test]
fn closed_form_matches_enumeration() {
    for m in 2..=3 {
        for q in 1..=9 {
            let d = factorial_dataset(m, q);
            let target = vec![1; q];
            let counts: Vec<usize> = d
                .inputs()
                .iter()
                .map(|w| count_matching_levels(&w.z, &target).unwrap())
                .collect();
            for n_s in 0..=q {
                let brute = counts.iter().filter(|&&c| c >= n_s).count() as u128;
                assert_eq!(full_factorial_subset_size(m, q, n_s), brute, "m={m} q={q} n_s={n_s}");
                assert_eq!(key_subset_indices(&d, &target, n_s).unwrap().len() as u128, brute);
            }
        }
    }
}

#[test]
fn probabilistic_formula_equals_exact_count() {
    for m in 2..=4 {
        for q in 1..=10 {
            for n_s in 0..=q {
                let exact = full_factorial_subset_size(m, q, n_s) as f64;
                let prob = probabilistic_count(m, q, n_s);
                assert!((exact - prob).abs() <= 1e-6 * exact.max(1.0), "m={m} q={q} n_s={n_s}: {exact} vs {prob}");
            }
        }
    }
}

#[test]
fn example_six_subset_sizes() {
    let sizes: Vec<u128> = (5..=9).map(|n_s| full_factorial_subset_size(3, 9, n_s)).collect();
    assert_eq!(sizes, vec![2851, 835, 163, 19, 1]);
}

proptest! {
    #[test]
    fn key_subsets_are_nested(target in prop::collection::vec(1usize..=3, 5), a in 0usize..=5, b in 0usize..=5) {
        let d = factorial_dataset(3, 5);
        let (lo, hi) = (a.min(b), a.max(b));
        let big = key_subset_indices(&d, &target, lo).unwrap();
        let small = key_subset_indices(&d, &target, hi).unwrap();
        prop_assert!(small.iter().all(|i| big.contains(i)));
        prop_assert!(big.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn majority_subsets_pairwise_share_a_level(target in prop::collection::vec(1usize..=3, 5), n_s in 3usize..=5) {
        let d = factorial_dataset(3, 5);
        let idx = key_subset_indices(&d, &target, n_s).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            for &j in &idx[k + 1..] {
                let zi = &d.inputs()[i].z;
                let zj = &d.inputs()[j].z;
                prop_assert!(zi.iter().zip(zj).any(|(a, b)| a == b));
            }
        }
    }
}
