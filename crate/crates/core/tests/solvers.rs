mod common;

use common::*;
use greedy_unfold::linalg::{DenseMatrix, SupportSet};
use greedy_unfold::scalar::{l2_norm, Complex64, Scalar};
use greedy_unfold::solvers::*;

fn rel_err<T: Scalar>(x: &[T], truth: &[T]) -> f64 {
    let diff: Vec<T> = x.iter().zip(truth).map(|(a, b)| *a - *b).collect();
    l2_norm(&diff) / l2_norm(truth)
}

#[test]
fn omp_identity_single_dominant() {
    let a = DenseMatrix::<f64>::identity(3);
    let t = omp(&a, &[0.0, 2.0, 0.0], &SolverConfig::omp(1)).unwrap();
    assert_eq!(t.output(), &[0.0, 2.0, 0.0]);
    match &t.selections[0] {
        Selection::Support(s) => assert_eq!(s.one_based(), vec![2]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn omp_identity_full_recovery() {
    let a = DenseMatrix::<f64>::identity(3);
    let t = omp(&a, &[1.0, 2.0, 3.0], &SolverConfig::omp(3)).unwrap();
    assert_eq!(t.output(), &[1.0, 2.0, 3.0]);
    assert_eq!(*t.residual_norms.last().unwrap(), 0.0);
}

#[test]
fn omp_matches_exhaustive_oracle() {
    let mut r = rng(11);
    let a = gaussian::<f64>(20, 40, true, &mut r);
    let x = sparse::<f64>(40, 3, &mut r);
    let y = a.matvec(&x).unwrap();
    let oracle = l0_oracle(&a, &y, 3);
    let t = omp(&a, &y, &SolverConfig::omp(3)).unwrap();
    assert!(rel_err(t.output(), &oracle) <= 1e-10);
}

#[test]
fn omp_ties_take_lowest_index() {
    let a = DenseMatrix::<f64>::identity(3);
    let t = omp(&a, &[2.0, 2.0, 0.0], &SolverConfig::omp(1)).unwrap();
    assert_eq!(t.output(), &[2.0, 0.0, 0.0]);
    assert_eq!(t.ties, 1);
}

#[test]
fn omp_after_exact_fit_adds_zero_coefficients() {
    let a = DenseMatrix::<f64>::identity(3);
    let t = omp(&a, &[0.0, 2.0, 0.0], &SolverConfig::omp(2)).unwrap();
    assert_eq!(t.output(), &[0.0, 2.0, 0.0]);
    assert_eq!(t.residual_norms, vec![2.0, 0.0, 0.0]);
}

#[test]
fn iht_identity_one_step() {
    let a = DenseMatrix::<f64>::identity(3);
    let t = iht(&a, &[1.0, -5.0, 2.0], &SolverConfig::iht(2, 1.0, 1)).unwrap();
    assert_eq!(t.output(), &[0.0, -5.0, 2.0]);
}

#[test]
fn iht_without_thresholding_reaches_least_squares() {
    let mut r = rng(3);
    let a = gaussian::<f64>(12, 5, false, &mut r);
    let y: Vec<f64> = (0..12).map(|_| normal(&mut r)).collect();
    let t = iht(&a, &y, &SolverConfig::iht(5, 0.3, 3000)).unwrap();
    let ls = normal_equations(&a, &[0, 1, 2, 3, 4], &y);
    assert!(max_abs_diff(t.output(), &ls) < 1e-9);

    let consistent = a.matvec(&ls).unwrap();
    let t = iht(&a, &consistent, &SolverConfig::iht(5, 0.3, 3000)).unwrap();
    assert!(*t.residual_norms.last().unwrap() < 1e-9);
}

#[test]
fn iht_recovers_ground_truth() {
    let mut r = rng(5);
    let a = gaussian::<f64>(30, 60, false, &mut r);
    let x = sparse::<f64>(60, 3, &mut r);
    let y = a.matvec(&x).unwrap();
    let oracle = l0_oracle(&a, &y, 3);
    assert!(rel_err(&oracle, &x) < 1e-10, "exact recovery fails for this seed");
    let t = iht(&a, &y, &SolverConfig::iht(3, 0.6, 50)).unwrap();
    assert!(rel_err(t.output(), &x) <= 1e-6, "{}", rel_err(t.output(), &x));
}

#[test]
fn hard_threshold_cases() {
    assert_eq!(hard_threshold(&[3.0, -4.0, 1.0], 2, None).unwrap(), vec![3.0, -4.0, 0.0]);
    assert_eq!(
        hard_threshold(&[5.0, 2.0, 1.0], 1, Some(&[0.0, 1.0, 1.0])).unwrap(),
        vec![0.0, 2.0, 0.0]
    );
    assert!(hard_threshold(&[1.0], 0, None).is_err());
}

#[test]
fn hard_threshold_is_best_k_term_approximation() {
    let mut r = rng(21);
    let u: Vec<f64> = (0..8).map(|_| normal(&mut r)).collect();
    for k in 1..=8 {
        let mut best = f64::INFINITY;
        for cols in subsets(8, k) {
            let err: f64 = (0..8).filter(|j| !cols.contains(j)).map(|j| u[j] * u[j]).sum();
            best = best.min(err);
        }
        let h = hard_threshold(&u, k, None).unwrap();
        let err: f64 = u.iter().zip(&h).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!((err - best).abs() < 1e-14);
    }
}

#[test]
fn p_omp_row_is_unit_vector() {
    let a = DenseMatrix::<f64>::identity(3);
    let t = p_omp(&a, &[0.0, 2.0, 0.0], &SolverConfig::omp(1)).unwrap();
    assert_eq!(t.selected_rows[0][0], vec![0.0, 1.0, 0.0]);
    assert_eq!(t.output(), &[0.0, 2.0, 0.0]);
}

fn projection_forms_agree<T: Draw>(seed: u64) {
    let mut r = rng(seed);
    let a = gaussian::<T>(15, 30, false, &mut r);
    let x = sparse::<T>(30, 4, &mut r);
    let y: Vec<T> = a.matvec(&x).unwrap().into_iter().map(|v| v + T::draw(&mut r).scale(1e-3)).collect();
    let o = omp(&a, &y, &SolverConfig::omp(6)).unwrap();
    let p = p_omp(&a, &y, &SolverConfig::omp(6)).unwrap();
    for (xo, xp) in o.iterates.iter().zip(&p.iterates) {
        assert!(max_abs_diff(xo, xp) <= 1e-10);
    }
    let cfg = SolverConfig::iht(4, 0.6, 20);
    let i = iht(&a, &y, &cfg).unwrap();
    let q = p_iht(&a, &y, &cfg).unwrap();
    for (xi, xq) in i.iterates.iter().zip(&q.iterates) {
        assert!(max_abs_diff(xi, xq) <= 1e-10);
    }
    for sel in &q.selections {
        let Selection::Mask(m) = sel else { panic!() };
        assert_eq!(m.iter().filter(|&&e| e == 1.0).count(), 4);
        assert_eq!(m.iter().filter(|&&e| e == 0.0).count(), 26);
    }
}

#[test]
fn projection_forms_match_exact_solvers() {
    for seed in 0..100 {
        projection_forms_agree::<f64>(seed);
        projection_forms_agree::<Complex64>(1000 + seed);
    }
}

#[test]
fn omp_trace_invariants() {
    for seed in 0..30 {
        let mut r = rng(seed);
        let a = gaussian::<f64>(20, 40, false, &mut r);
        let x = sparse::<f64>(40, 5, &mut r);
        let y: Vec<f64> = a.matvec(&x).unwrap().iter().map(|v| v + 0.01 * normal(&mut r)).collect();
        let t = omp(&a, &y, &SolverConfig::omp(8)).unwrap();
        let mut prev: Option<SupportSet> = None;
        for (n, sel) in t.selections.iter().enumerate() {
            let Selection::Support(s) = sel else { panic!() };
            assert_eq!(s.len(), n + 1);
            if let Some(p) = &prev {
                assert!(p.is_subset_of(s));
            }
            prev = Some(s.clone());
        }
        for w in t.residual_norms.windows(2) {
            assert!(w[1] < w[0]);
        }
        for xi in &t.iterates {
            assert!(xi.iter().filter(|v| **v != 0.0).count() <= 8);
        }
    }
}

#[test]
fn iht_iterates_are_k_sparse() {
    let mut r = rng(9);
    let a = gaussian::<Complex64>(20, 40, false, &mut r);
    let x = sparse::<Complex64>(40, 3, &mut r);
    let y = a.matvec(&x).unwrap();
    let t = iht(&a, &y, &SolverConfig::iht(3, 0.5, 15)).unwrap();
    for xi in &t.iterates[1..] {
        assert_eq!(xi.iter().filter(|v| **v != Complex64::new(0.0, 0.0)).count(), 3);
    }
}

#[test]
fn soft_variants_at_tiny_temperature_match_exact() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let a = gaussian::<f64>(20, 40, false, &mut r);
        let x = sparse::<f64>(40, 4, &mut r);
        let y = a.matvec(&x).unwrap();
        let o = omp(&a, &y, &SolverConfig::omp(4)).unwrap();
        let s = soft_omp(&a, &y, &SolverConfig::omp(4).with_tau(1e-9)).unwrap();
        assert!(max_abs_diff(o.output(), s.output()) <= 1e-8);
        let cfg = SolverConfig::iht(4, 0.6, 10);
        let i = iht(&a, &y, &cfg).unwrap();
        let si = soft_iht(&a, &y, &cfg.clone().with_tau(1e-9)).unwrap();
        assert!(max_abs_diff(i.output(), si.output()) <= 1e-8);
    }
}

#[test]
fn soft_iht_full_mask_is_all_ones() {
    let mut r = rng(2);
    let a = gaussian::<f64>(10, 6, false, &mut r);
    let y: Vec<f64> = (0..10).map(|_| normal(&mut r)).collect();
    let t = soft_iht(&a, &y, &SolverConfig::iht(6, 0.5, 3).with_tau(1e-9)).unwrap();
    for sel in &t.selections {
        let Selection::Mask(m) = sel else { panic!() };
        assert!(m.iter().all(|&e| (e - 1.0).abs() < 1e-12));
    }
}

#[test]
fn unit_weights_change_nothing() {
    let mut r = rng(4);
    let a = gaussian::<Complex64>(15, 30, false, &mut r);
    let x = sparse::<Complex64>(30, 3, &mut r);
    let y = a.matvec(&x).unwrap();
    let ones = vec![1.0; 30];
    let cfg = SolverConfig::omp(3).with_tau(0.05);
    assert_eq!(
        soft_omp(&a, &y, &cfg).unwrap(),
        soft_omp(&a, &y, &cfg.clone().with_weights(ones.clone())).unwrap()
    );
    let cfg = SolverConfig::iht(3, 0.6, 8).with_tau(0.05);
    assert_eq!(
        soft_iht(&a, &y, &cfg).unwrap(),
        soft_iht(&a, &y, &cfg.clone().with_weights(ones)).unwrap()
    );
}

#[test]
fn config_validation() {
    let a = DenseMatrix::<f64>::identity(3);
    let y = [1.0, 2.0, 3.0];
    assert!(soft_omp(&a, &y, &SolverConfig::omp(1)).is_err());
    assert!(omp(&a, &y, &SolverConfig::omp(1).with_tau(0.1)).is_err());
    assert!(omp(&a, &y, &SolverConfig::omp(4)).is_err());
    assert!(omp(&a, &y, &SolverConfig::omp(1).with_weights(vec![1.0, -1.0, 1.0])).is_err());
    assert!(iht(&a, &y, &SolverConfig::iht(1, 0.0, 1)).is_err());
    assert!(iht(&a, &[1.0], &SolverConfig::iht(1, 1.0, 1)).is_err());
}

#[test]
fn iht_from_custom_start() {
    let a = DenseMatrix::<f64>::identity(3);
    let y = [1.0, -5.0, 2.0];
    let t = solve_from(SolverKind::Iht, &a, &y, &SolverConfig::iht(2, 0.5, 1), Some(&[4.0, 0.0, 0.0])).unwrap();
    assert_eq!(t.iterates[0], vec![4.0, 0.0, 0.0]);
    // u = x + 0.5 (y - x) = (2.5, -2.5, 1)
    assert_eq!(t.output(), &[2.5, -2.5, 0.0]);
}
