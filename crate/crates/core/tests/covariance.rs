mod common;

use common::{lhs_inputs, random_inputs, random_params, random_schema};
use ezgp::kernels::{assemble_elementwise, assemble_schur_dense};
use ezgp::linalg::cholesky_with_nugget;
use ezgp::{assemble_cov_matrix, CovMatrix, Dataset, MixedInput, ModelKind, ModelParams, ProblemSchema};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn dataset(s: &ProblemSchema, inputs: Vec<MixedInput>) -> Dataset {
    let n = inputs.len();
    Dataset::new(s.clone(), inputs, vec![0.0; n]).unwrap()
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

#[test]
fn schur_assembly_matches_elementwise() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..100 {
        let s = random_schema(&mut rng, 3, 3, 4);
        let n = rng.random_range(1..=20);
        let inputs = random_inputs(&mut rng, &s, n);
        for kind in [ModelKind::Ezgp, ModelKind::Eezgp] {
            let params = random_params(&mut rng, kind, &s, (0.05, 20.0));
            let d = dataset(&s, inputs.clone());
            let fast = assemble_cov_matrix(&d, &params).unwrap().matrix;
            let naive = assemble_elementwise(&inputs, &params);
            assert!(max_abs_diff(&fast, &naive) <= 1e-12);
            let expanded = match &params {
                ModelParams::Ezgp(p) => p.clone(),
                ModelParams::Eezgp(p) => p.expand(),
                _ => unreachable!(),
            };
            let dense = assemble_schur_dense(&s, &inputs, &expanded);
            assert!(max_abs_diff(&dense, &naive) <= 1e-12);
        }
    }
}

#[test]
fn eezgp_matrix_equals_its_expansion() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for _ in 0..30 {
        let s = random_schema(&mut rng, 3, 3, 3);
        let inputs = random_inputs(&mut rng, &s, 12);
        let params = random_params(&mut rng, ModelKind::Eezgp, &s, (0.05, 20.0));
        let ModelParams::Eezgp(ee) = &params else { unreachable!() };
        let d = dataset(&s, inputs);
        let a = assemble_cov_matrix(&d, &params).unwrap().matrix;
        let b = assemble_cov_matrix(&d, &ModelParams::Ezgp(ee.expand())).unwrap().matrix;
        assert!(max_abs_diff(&a, &b) <= 1e-14);
    }
}

#[test]
fn matrices_are_psd_with_duplicated_rows() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for _ in 0..40 {
        let s = random_schema(&mut rng, 3, 3, 3);
        let mut inputs = random_inputs(&mut rng, &s, 15);
        // Exact duplicates and duplicated x with fresh levels.
        for _ in 0..5 {
            let i = rng.random_range(0..inputs.len());
            let mut w = inputs[i].clone();
            if rng.random_bool(0.5) {
                w.z = s.levels().iter().map(|&m| rng.random_range(1..=m)).collect();
            }
            inputs.push(w);
        }
        let d = dataset(&s, inputs);
        for kind in ModelKind::ALL {
            let params = random_params(&mut rng, kind, &s, (1e-3, 50.0));
            let m = assemble_cov_matrix(&d, &params).unwrap().matrix;
            assert_eq!(m, m.transpose());
            let floor = -1e-8 * params.variance();
            let ev = min_eigenvalue(&m);
            assert!(ev >= floor, "{kind}: min eigenvalue {ev:e}");
        }
    }
}

#[test]
fn distinct_rows_factorize_without_nugget() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    for &n in &[20usize, 50, 100, 200] {
        for _ in 0..5 {
            let s = ProblemSchema::new(rng.random_range(2..=3), 2, vec![3, 3]).unwrap();
            let d = dataset(&s, lhs_inputs(&mut rng, &s, n));
            for kind in [ModelKind::Ezgp, ModelKind::Eezgp] {
                let params = random_params(&mut rng, kind, &s, (5.0, 50.0));
                let cov = assemble_cov_matrix(&d, &params).unwrap();
                let f = cholesky_with_nugget(&cov).unwrap();
                assert_eq!(f.nugget(), 0.0, "{kind} n={n}");
            }
        }
    }
}

#[test]
fn separating_factor_makes_duplicates_positive_definite() {
    // Every x appears twice, and the two copies differ in z1 only. Two rows
    // with equal x never share a level of z1, so the matrix is nonsingular.
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let s = ProblemSchema::new(2, 2, vec![2, 3]).unwrap();
    for _ in 0..20 {
        let base = lhs_inputs(&mut rng, &s, 10);
        let mut inputs = Vec::new();
        for w in &base {
            let z2 = rng.random_range(1..=3);
            inputs.push(MixedInput::new(w.x.clone(), vec![1, z2]));
            inputs.push(MixedInput::new(w.x.clone(), vec![2, z2]));
        }
        let d = dataset(&s, inputs);
        for kind in [ModelKind::Ezgp, ModelKind::Eezgp] {
            let params = random_params(&mut rng, kind, &s, (5.0, 50.0));
            let m = assemble_cov_matrix(&d, &params).unwrap().matrix;
            assert!(min_eigenvalue(&m) > 0.0);
            let f = cholesky_with_nugget(&CovMatrix::new(m)).unwrap();
            assert_eq!(f.nugget(), 0.0);
        }
    }
}

#[test]
fn covariance_is_symmetric_with_constant_variance() {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    for _ in 0..50 {
        let s = random_schema(&mut rng, 3, 3, 4);
        let w = random_inputs(&mut rng, &s, 2);
        for kind in ModelKind::ALL {
            let p = random_params(&mut rng, kind, &s, (0.01, 10.0));
            assert_eq!(p.cov(&w[0], &w[1]), p.cov(&w[1], &w[0]));
            if kind.is_indicator() {
                assert!((p.cov(&w[0], &w[0]) - p.variance()).abs() <= 1e-12 * p.variance());
            }
        }
    }
}

#[test]
fn sharing_more_levels_never_lowers_covariance() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    for _ in 0..100 {
        let s = random_schema(&mut rng, 3, 4, 3);
        let w = random_inputs(&mut rng, &s, 2);
        let p = random_params(&mut rng, ModelKind::Ezgp, &s, (0.01, 10.0));
        let mut b = w[1].clone();
        let mut prev = p.cov(&w[0], &b);
        for h in 0..s.q() {
            b.z[h] = w[0].z[h];
            let c = p.cov(&w[0], &b);
            assert!(c >= prev);
            prev = c;
        }
    }
}
