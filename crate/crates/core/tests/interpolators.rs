use approx::assert_relative_eq;
use iblab_core::data::{gen_orthogonal, gen_subgaussian, EntryDist};
use iblab_core::interp::{direction_distance, eps_alpha, gram_summary, mni, summarize_gram, svp_check_binary};
use iblab_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

#[test]
fn mni_on_identity_gram() {
    let ds = gen_orthogonal(4, 9, 0.5, 11).unwrap();
    let y = DVector::from_column_slice(&[1.0, -1.0, -1.0, 1.0]);
    let w = mni(&ds.x, &y).unwrap().w;
    assert!((w - ds.x.transpose() * &y / 0.5).amax() < 1e-12);
}

#[test]
fn mni_hand_solved() {
    let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
    let w = mni(&x, &DVector::from_column_slice(&[1.0, -1.0])).unwrap().w;
    assert_relative_eq!(w[0], 1.0, max_relative = 1e-14);
    assert_relative_eq!(w[1], -2.0, max_relative = 1e-14);
}

#[test]
fn mni_rejects_duplicate_rows() {
    let x = DMatrix::from_row_slice(2, 3, &[0.3, 0.4, 0.5, 0.3, 0.4, 0.5]);
    assert!(matches!(mni(&x, &DVector::from_column_slice(&[1.0, -1.0])), Err(Error::SingularGram { .. })));
}

#[test]
fn svp_on_scaled_identity_and_diagonal() {
    let y = DVector::from_column_slice(&[1.0, -1.0, 1.0]);
    let report = svp_check_binary(&(DMatrix::identity(3, 3) * 0.25), &y).unwrap();
    assert!(report.holds);
    assert_relative_eq!(report.margin, 4.0, max_relative = 1e-12);
    assert!(svp_check_binary(&diag(&[1.0, 0.2, 0.7]), &y).unwrap().holds);
}

#[test]
fn svp_fails_on_near_duplicate_opposing_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = DVector::from_column_slice(&[1.0, -1.0, 1.0]);
    let mut failures = 0;
    for _ in 0..200 {
        let mut x = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        for j in 0..3 {
            x[(1, j)] = x[(0, j)] + 0.05 * rng.random_range(-1.0..1.0);
        }
        let g = &x * x.transpose();
        let Ok(report) = svp_check_binary(&g, &y) else { continue };
        let beta = g.clone().try_inverse().unwrap() * &y;
        assert_eq!(report.holds, (0..3).all(|i| y[i] * beta[i] > 0.0));
        failures += usize::from(!report.holds);
    }
    assert!(failures > 0);
}

#[test]
fn svp_rejects_indefinite_gram() {
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(svp_check_binary(&g, &DVector::from_column_slice(&[1.0, 1.0])).is_err());
}

#[test]
fn gram_summary_examples() {
    let ds = gen_orthogonal(5, 7, 0.3, 2).unwrap();
    let s = gram_summary(&ds.x, Some(0.3));
    assert_eq!(s.alpha, 0.3);
    assert!(s.eps <= 1e-10);

    let s = summarize_gram(&diag(&[1.0, 0.125]), None);
    assert_relative_eq!(s.alpha, 0.5625, max_relative = 1e-14);
    assert_relative_eq!(s.eps, 0.4375, max_relative = 1e-12);
    assert_relative_eq!(s.ratio, 0.4375 / 0.5625, max_relative = 1e-12);

    let ds = gen_subgaussian(50, 3200, &vec![1.0; 3200], EntryDist::Gaussian, 1).unwrap();
    assert!(gram_summary(&ds.x, None).ratio < 1.0 / 3.0);
}

#[test]
fn eps_alpha_examples() {
    let v = DVector::from_column_slice(&[1.0, 1.0]);
    assert_eq!(eps_alpha(&(DMatrix::identity(2, 2) * 0.7), 0.7, &v).unwrap(), 0.0);
    assert_relative_eq!(eps_alpha(&diag(&[1.0, 0.125]), 0.5625, &v).unwrap(), 0.4375, max_relative = 1e-14);
    let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    assert!(eps_alpha(&g, 3.0, &v).unwrap() < 1e-15);
    assert!(matches!(eps_alpha(&g, 1.0, &DVector::zeros(2)), Err(Error::Domain(_))));
}

#[test]
fn direction_distance_examples() {
    let w = DVector::from_column_slice(&[0.3, -1.0, 2.0]);
    assert!(direction_distance(&w, &(&w * 3.0)).unwrap() < 1e-15);
    assert_relative_eq!(direction_distance(&w, &-&w).unwrap(), 2.0, max_relative = 1e-15);
    let e1 = DVector::from_column_slice(&[1.0, 0.0]);
    let e2 = DVector::from_column_slice(&[0.0, 1.0]);
    assert_relative_eq!(direction_distance(&e1, &e2).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
    assert!(matches!(direction_distance(&e1, &DVector::zeros(2)), Err(Error::Domain(_))));
}

proptest! {
    #[test]
    fn mni_interpolates_and_is_minimal(n in 1usize..6, extra in 1usize..12, seed in any::<u64>(), signs in prop::collection::vec(any::<bool>(), 6), shift in prop::collection::vec(-1.0f64..1.0, 20)) {
        let d = n + extra;
        let ds = gen_subgaussian(n, d, &vec![1.0; d], EntryDist::Gaussian, seed).unwrap();
        let y = DVector::from_iterator(n, signs.iter().take(n).map(|&s| if s { 1.0 } else { -1.0 }));
        let sol = mni(&ds.x, &y).unwrap();
        prop_assert!((&ds.x * &sol.w - &y).amax() < 1e-8);
        let x_t = ds.x.transpose();
        let svd = x_t.clone().svd(true, false);
        let u = svd.u.unwrap();
        let z = DVector::from_iterator(d, shift.iter().take(d).cloned());
        let null_part = &z - &u * (u.transpose() * &z);
        let other = &sol.w + &null_part;
        prop_assert!((&ds.x * &other - &y).amax() < 1e-8);
        prop_assert!(sol.w.norm() <= other.norm() + 1e-12);
    }

    #[test]
    fn direction_distance_bounds(a in prop::collection::vec(-5.0f64..5.0, 3), b in prop::collection::vec(-5.0f64..5.0, 3), s in 0.1f64..10.0) {
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
        let dist = direction_distance(&a, &b).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&dist));
        prop_assert!((direction_distance(&(&a * s), &b).unwrap() - dist).abs() < 1e-12);
        prop_assert!((direction_distance(&b, &a).unwrap() - dist).abs() < 1e-15);
    }

    #[test]
    fn eps_alpha_bounded_by_operator_norm(n in 2usize..6, extra in 0usize..10, seed in any::<u64>(), v in prop::collection::vec(-1.0f64..1.0, 6)) {
        let d = n + extra;
        let ds = gen_subgaussian(n, d, &vec![1.0; d], EntryDist::Gaussian, seed).unwrap();
        let s = gram_summary(&ds.x, None);
        let v = DVector::from_iterator(n, v.into_iter().take(n));
        prop_assume!(v.norm() > 1e-6);
        prop_assert!(eps_alpha(&s.gram, s.alpha, &v).unwrap() <= s.eps * (1.0 + 1e-10) + 1e-14);
    }
}
