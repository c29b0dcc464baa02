use approx::assert_relative_eq;
use iblab_core::data::{derive_seed, gen_orthogonal, gen_subgaussian, EntryDist};
use iblab_core::dual::{
    adjusted_labels, ce_candidate, primal_from_dual, solve_diagonal, solve_identity, solve_multiclass_general,
    solve_relaxed, DualSolution, Method, NewtonOptions,
};
use iblab_core::interp::{direction_distance, eps_alpha, mni, summarize_gram, svp_check_binary};
use iblab_core::loss::{EncodingScheme, Loss, MulticlassEncoding};
use iblab_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn poly(m: f64) -> Loss {
    Loss::polynomial(m).unwrap()
}

fn losses() -> Vec<Loss> {
    vec![Loss::exponential(), Loss::logistic(), poly(0.5), poly(1.0), poly(2.0)]
}

fn opts() -> NewtonOptions {
    NewtonOptions::default()
}

fn vecd(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Oracle for a diagonal Gram built from first principles: for a trial μ each
/// qᵢ solves dᵢ qᵢ = μ h(qᵢ) by bisection in q, and μ is then bisected so that
/// Σ g⁻¹(qᵢ) = 1. Only ℓ-independent closed forms of h and g⁻¹ are used.
fn diagonal_oracle(dvec: &[f64], m: Option<f64>) -> (Vec<f64>, f64) {
    let h = |q: f64| match m {
        Some(m) => m / (m + 1.0) * q.powf(-1.0 / (m + 1.0)),
        None => 1.0,
    };
    let g_inv = |q: f64| match m {
        Some(m) => q.powf(m / (m + 1.0)),
        None => q,
    };
    let q_for = |d: f64, mu: f64| {
        // d q − μ h(q) is increasing in q
        let (mut lo, mut hi) = (1e-300f64, 1e6f64);
        for _ in 0..3000 {
            let mid = (lo * hi).sqrt();
            if d * mid - mu * h(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
            if hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        (lo * hi).sqrt()
    };
    let total = |mu: f64| dvec.iter().map(|&d| g_inv(q_for(d, mu))).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (1e-30f64, 1e6f64);
    for _ in 0..3000 {
        let mid = (lo * hi).sqrt();
        if total(mid) > 0.0 {
            hi = mid
        } else {
            lo = mid
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let mu = (lo * hi).sqrt();
    (dvec.iter().map(|&d| q_for(d, mu)).collect(), mu)
}

fn random_pd_gram(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let d = n + 2 + rng.random_range(0..2 * n);
    let z = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let g = &z * z.transpose() / d as f64;
    g + DMatrix::identity(n, n) * 0.05
}

fn random_signs(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

/// Projected gradient on {q ≥ 0, Σq = 1} for ½ qᵀMq: the exponential-loss
/// relaxed program, including boundary optima.
fn simplex_qp_oracle(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let lmax = m.clone().symmetric_eigenvalues().max();
    let step = 1.0 / lmax;
    let mut q = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..200_000 {
        let grad = m * &q;
        q = project_simplex(&(&q - grad * step));
    }
    q
}

fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

fn assert_solution_invariants(sol: &DualSolution) {
    assert!(sol.q.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-8), "{:?}", sol.q);
    assert!(sol.mu > 0.0);
    assert!(sol.converged(1e-8, 1e-10), "kkt {} mu {} feas {}", sol.kkt_residual, sol.mu, sol.feasibility_gap);
}

#[test]
fn identity_examples() {
    let s = solve_identity(4, 1.0, &Loss::exponential()).unwrap();
    assert!(s.q.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    assert_relative_eq!(s.mu, 0.25, epsilon = 1e-15);
    let s = solve_identity(4, 1.0, &poly(1.0)).unwrap();
    assert!(s.q.iter().all(|&v| (v - 1.0 / 16.0).abs() < 1e-15));
    assert_relative_eq!(s.mu, 1.0 / 32.0, epsilon = 1e-15);
    for loss in losses() {
        let s = solve_identity(1, 0.5, &loss).unwrap();
        assert_relative_eq!(s.q[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.mu, 0.5 / loss.h(1.0), epsilon = 1e-15);
        assert!(s.kkt_residual < 1e-15);
    }
}

#[test]
fn diagonal_hand_cases() {
    let s = solve_diagonal(&[1.0, 8.0], &poly(1.0)).unwrap();
    assert_relative_eq!(s.mu, 16.0 / 27.0, epsilon = 1e-12);
    assert!(max_abs_diff(&s.q, &[4.0 / 9.0, 1.0 / 9.0]) < 1e-10);
    assert!((s.q[0].sqrt() + s.q[1].sqrt() - 1.0).abs() < 1e-12);
    let s = solve_diagonal(&[1.0, 8.0], &Loss::exponential()).unwrap();
    assert_relative_eq!(s.mu, 8.0 / 9.0, epsilon = 1e-12);
    assert!(max_abs_diff(&s.q, &[8.0 / 9.0, 1.0 / 9.0]) < 1e-12);
    // rescaling the Gram by 1/8 leaves q unchanged
    let s = solve_diagonal(&[0.125, 1.0], &poly(1.0)).unwrap();
    assert!(max_abs_diff(&s.q, &[4.0 / 9.0, 1.0 / 9.0]) < 1e-10);
}

#[test]
fn diagonal_constant_matches_identity() {
    for loss in losses() {
        let a = solve_diagonal(&[1.0; 6], &loss).unwrap();
        let b = solve_identity(6, 1.0, &loss).unwrap();
        assert!(max_abs_diff(&a.q, &b.q) < 1e-12);
        assert_relative_eq!(a.mu, b.mu, max_relative = 1e-12);
    }
}

#[test]
fn diagonal_matches_first_principles_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(1..8);
        let dvec: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        for m in [None, Some(0.5), Some(1.0), Some(2.0)] {
            let loss = match m {
                None => Loss::exponential(),
                Some(m) => poly(m),
            };
            let s = solve_diagonal(&dvec, &loss).unwrap();
            let (q, mu) = diagonal_oracle(&dvec, m);
            assert!(max_abs_diff(&s.q, &q) < 1e-10);
            assert_relative_eq!(s.mu, mu, max_relative = 1e-9);
            assert_solution_invariants(&s);
        }
    }
}

#[test]
fn relaxed_matches_identity() {
    for &n in &[3usize, 10] {
        for loss in losses() {
            let g = DMatrix::identity(n, n) * 0.7;
            let y = DVector::from_fn(n, |i, _| if i % 3 == 0 { -1.0 } else { 1.0 });
            let s = solve_relaxed(&g, &y, &loss, &opts()).unwrap();
            let t = solve_identity(n, 0.7, &loss).unwrap();
            assert!(max_abs_diff(&s.q, &t.q) < 1e-10 * t.q[0].max(1e-300).max(1.0));
            assert_solution_invariants(&s);
            assert_eq!(s.method, Method::NewtonGeneral);
        }
    }
}

#[test]
fn relaxed_matches_diagonal_rescaled() {
    let g = DMatrix::from_diagonal(&vecd(&[0.125, 1.0]));
    let y = vecd(&[1.0, -1.0]);
    let s = solve_relaxed(&g, &y, &poly(1.0), &opts()).unwrap();
    let t = solve_diagonal(&[0.125, 1.0], &poly(1.0)).unwrap();
    assert!(max_abs_diff(&s.q, &t.q) < 1e-8);
    assert_relative_eq!(s.mu, t.mu, max_relative = 1e-8);
}

#[test]
fn exponential_reduces_to_svm_direction_when_svp_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 30 {
        let n = rng.random_range(2..=8);
        let g = random_pd_gram(&mut rng, n);
        let y = random_signs(&mut rng, n);
        if !svp_check_binary(&g, &y).unwrap().holds {
            continue;
        }
        let s = solve_relaxed(&g, &y, &Loss::exponential(), &opts()).unwrap();
        let beta = g.clone().try_inverse().unwrap() * &y;
        let oracle = y.component_mul(&beta);
        assert!(direction_distance(&s.q_vector(), &oracle).unwrap() <= 1e-6);
        checked += 1;
    }
}

#[test]
fn boundary_optimum_uses_barrier_and_matches_qp_oracle() {
    // Examples 0 and 2 nearly coincide, so only one of them can be a support vector.
    let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.9, 0.2, 1.0, 0.0, 0.9, 0.0, 1.0]);
    let y = vecd(&[1.0, -1.0, 1.0]);
    let rep = svp_check_binary(&g, &y).unwrap();
    assert!(!rep.holds);
    for loss in [Loss::exponential(), Loss::logistic()] {
        let s = solve_relaxed(&g, &y, &loss, &opts()).unwrap();
        assert_eq!(s.method, Method::BarrierContinuation);
        let m = DMatrix::from_fn(3, 3, |i, j| y[i] * g[(i, j)] * y[j]);
        let qp = simplex_qp_oracle(&m);
        assert!(direction_distance(&s.q_vector(), &qp).unwrap() < 1e-4);
        let beta = g.clone().try_inverse().unwrap() * &y;
        let naive = y.component_mul(&beta);
        assert!(direction_distance(&s.q_vector(), &naive).unwrap() > 1e-3);
    }
}

#[test]
fn polynomial_stays_interior_where_svp_fails() {
    let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.9, 0.2, 1.0, 0.0, 0.9, 0.0, 1.0]);
    let y = vecd(&[1.0, -1.0, 1.0]);
    for m in [0.5, 1.0, 2.0] {
        let s = solve_relaxed(&g, &y, &poly(m), &opts()).unwrap();
        assert_eq!(s.method, Method::NewtonGeneral);
        assert_solution_invariants(&s);
    }
}

#[test]
fn primal_from_dual_examples() {
    let x = DMatrix::<f64>::identity(2, 2);
    let w = primal_from_dual(&x, &vecd(&[1.0, -1.0]), &vecd(&[0.75, 0.25])).unwrap();
    let expect = vecd(&[0.75, -0.25]).normalize();
    assert!((w - expect).amax() < 1e-15);

    let ds = gen_orthogonal(5, 9, 0.5, 3).unwrap();
    let y = ds.binary_labels().unwrap();
    let w = primal_from_dual(&ds.x, &y, &DVector::from_element(5, 0.2)).unwrap();
    let reference = mni(&ds.x, &y).unwrap().w;
    assert!(direction_distance(&w, &reference).unwrap() < 1e-12);

    let ds = gen_subgaussian(6, 20, &[1.0; 20], EntryDist::Gaussian, 8).unwrap();
    let y = ds.binary_labels().unwrap();
    let beta = ds.gram().try_inverse().unwrap() * &y;
    let q = y.component_mul(&beta);
    if q.iter().all(|&v| v > 0.0) {
        let w = primal_from_dual(&ds.x, &y, &(q * 3.0)).unwrap();
        assert!(direction_distance(&w, &mni(&ds.x, &y).unwrap().w).unwrap() < 1e-10);
    }
    assert!(matches!(
        primal_from_dual(&DMatrix::zeros(2, 2), &vecd(&[1.0, 1.0]), &vecd(&[0.5, 0.5])),
        Err(Error::DegenerateData(_))
    ));
}

#[test]
fn adjusted_label_examples() {
    let y = vecd(&[1.0, -1.0]);
    let a = adjusted_labels(&[1.0, 8.0], &y, &poly(1.0)).unwrap();
    assert!(direction_distance(&vecd(&a.tilde_y), &vecd(&[4.0 / 9.0, -8.0 / 9.0])).unwrap() < 1e-10);
    let a = adjusted_labels(&[1.0, 8.0], &y, &Loss::exponential()).unwrap();
    assert!(direction_distance(&vecd(&a.tilde_y), &y).unwrap() < 1e-12);
    let y3 = vecd(&[1.0, -1.0, -1.0]);
    let a = adjusted_labels(&[0.4; 3], &y3, &poly(2.0)).unwrap();
    assert!(direction_distance(&vecd(&a.tilde_y), &y3).unwrap() < 1e-12);
}

#[test]
fn adjusted_labels_are_interpolated() {
    let dvec = [0.2, 0.9, 0.5, 1.0];
    let ds = iblab_core::data::gen_diagonal_gram(4, 7, &dvec, 2).unwrap();
    let y = ds.binary_labels().unwrap();
    let a = adjusted_labels(&dvec, &y, &poly(1.0)).unwrap();
    let w = primal_from_dual(&ds.x, &y, &vecd(&a.q)).unwrap();
    let xw = &ds.x * w;
    assert!(direction_distance(&xw, &vecd(&a.tilde_y)).unwrap() < 1e-8);
}

#[test]
fn multiclass_general_examples() {
    let labels = [0usize, 1, 2, 0, 1, 2, 0];
    let enc = MulticlassEncoding::new(&labels, EncodingScheme::EqualAssignment, 3).unwrap();
    for loss in losses() {
        let sols = solve_multiclass_general(&(DMatrix::identity(7, 7) * 0.6), &enc, &loss, &opts()).unwrap();
        let expect = loss.g(1.0 / 7.0);
        for s in sols {
            let s = s.unwrap();
            assert!(s.q.iter().all(|&v| (v - expect).abs() < 1e-10 * expect.max(1.0)));
        }
    }
    let dvec = [0.3, 0.8, 1.0, 0.55];
    let enc = MulticlassEncoding::new(&[0, 1, 1, 0], EncodingScheme::EqualAssignment, 2).unwrap();
    let g = DMatrix::from_diagonal(&vecd(&dvec));
    let sols = solve_multiclass_general(&g, &enc, &poly(1.0), &opts()).unwrap();
    let (q, _) = diagonal_oracle(&dvec, Some(1.0));
    for s in sols {
        assert!(max_abs_diff(&s.unwrap().q, &q) < 1e-8);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut done = 0;
    while done < 5 {
        let n = 6;
        let g = random_pd_gram(&mut rng, n);
        let labels: Vec<usize> = (0..n).map(|i| (i + rng.random_range(0..3)) % 3).collect();
        let Ok(enc) = iblab_core::data::encode_multiclass(&labels, EncodingScheme::EqualAssignment, 3) else {
            continue;
        };
        let targets: Vec<DVector<f64>> = (0..3).map(|k| enc.class_vector(k)).collect();
        if !iblab_core::interp::svp_check(&g, &targets).unwrap().holds {
            continue;
        }
        let sols = solve_multiclass_general(&g, &enc, &Loss::exponential(), &opts()).unwrap();
        let inv = g.clone().try_inverse().unwrap();
        for (k, s) in sols.into_iter().enumerate() {
            let c = &targets[k];
            let oracle = c.component_mul(&(&inv * c));
            assert!(direction_distance(&s.unwrap().q_vector(), &oracle).unwrap() < 1e-6);
        }
        done += 1;
    }
}

#[test]
fn ce_candidate_identity_case() {
    let enc = MulticlassEncoding::new(&[0, 1], EncodingScheme::Simplex, 2).unwrap();
    let c = ce_candidate(&(DMatrix::identity(2, 2) * 0.8), &enc).unwrap();
    // every cᵢ² = 1/4, so each entry is (1/4)/(Σ‖c_k‖²) = 1/4
    for s in &c.classes {
        assert!(s.q.iter().all(|&v| (v - 0.25).abs() < 1e-14));
    }
    assert!(c.mass_gap < 1e-14);
    assert!(c.balance_residual < 1e-14);
}

#[test]
fn ce_candidate_balance_on_random_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut done = 0;
    while done < 10 {
        let n = 9;
        let ds = gen_subgaussian(n, 200, &[1.0; 200], EntryDist::Gaussian, rng.random()).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let enc = MulticlassEncoding::new(&labels, EncodingScheme::Simplex, 3).unwrap();
        match ce_candidate(&ds.gram(), &enc) {
            Ok(c) => {
                assert!(c.balance_residual <= 1e-10);
                assert!(c.mass_gap <= 1e-10);
                for s in &c.classes {
                    assert!(s.kkt_residual <= 1e-8 * s.mu);
                }
                done += 1;
            }
            Err(Error::NotApplicable { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn ce_candidate_not_applicable() {
    // search Grams with two nearly identical examples from different classes
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels = [0usize, 1, 2, 0];
    let enc = MulticlassEncoding::new(&labels, EncodingScheme::Simplex, 3).unwrap();
    let mut hit = false;
    for _ in 0..2000 {
        let mut g = random_pd_gram(&mut rng, 4);
        let rho = rng.random_range(0.9..0.999);
        let off = rho * (g[(0, 0)] * g[(1, 1)]).sqrt();
        g[(0, 1)] = off;
        g[(1, 0)] = off;
        if iblab_core::interp::SpdSolver::new(&g).is_err() {
            continue;
        }
        let inv = g.clone().try_inverse().unwrap();
        let violated = (0..3).any(|k| {
            let c = enc.class_vector(k);
            let b = &inv * &c;
            (0..4).any(|i| c[i] * b[i] <= 0.0)
        });
        if violated {
            assert!(matches!(ce_candidate(&g, &enc), Err(Error::NotApplicable { .. })));
            hit = true;
            break;
        }
    }
    assert!(hit);
}

#[test]
fn converse_spread_for_polynomial_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let n = 6;
        let g = random_pd_gram(&mut rng, n);
        let y = random_signs(&mut rng, n);
        let s = summarize_gram(&g, None);
        // best α for y is its Rayleigh quotient
        let k = y.dot(&(&g * &y)) / y.norm_squared();
        if eps_alpha(&g, k, &y).unwrap() <= 1e-3 * s.alpha {
            continue;
        }
        for m in [0.5, 1.0, 2.0] {
            let sol = solve_relaxed(&g, &y, &poly(m), &opts()).unwrap();
            let spread = sol.q.iter().cloned().fold(f64::MIN, f64::max) - sol.q.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread > 1e-6);
        }
    }
}

#[test]
fn directional_sandwich_and_dual_rate() {
    for t in 0..6u64 {
        let ds = gen_subgaussian(20, 800, &vec![1.0; 800], EntryDist::Gaussian, derive_seed(77, t)).unwrap();
        let y = ds.binary_labels().unwrap();
        let g = ds.gram();
        let summary = summarize_gram(&g, None);
        for loss in [Loss::logistic(), poly(1.0)] {
            let sol = solve_relaxed(&g, &y, &loss, &opts()).unwrap();
            let q = sol.q_vector();
            let hq = q.map(|v| loss.h(v));
            let ones = DVector::from_element(20, 1.0);
            let lhs = direction_distance(&q, &ones).unwrap();
            let rhs = direction_distance(&hq, &q).unwrap();
            assert!(lhs <= rhs + 1e-8);
            if summary.ratio <= 1.0 / 3.0 {
                let e = eps_alpha(&g, summary.alpha, &y).unwrap() / summary.alpha;
                assert!(lhs <= 2.0 / (1.0 - 2.0 * summary.ratio) * e);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chebyshev_sum_inequality(q in proptest::collection::vec(1e-6f64..1.0, 1..20), which in 0usize..5) {
        let loss = losses()[which];
        let n = q.len() as f64;
        let h: Vec<f64> = q.iter().map(|&v| loss.h(v)).collect();
        let lhs = n.sqrt() * q.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        let rhs = q.iter().sum::<f64>() * h.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn random_diagonals_newton_matches_bisection(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=10);
        let dvec: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(&dvec));
        let y = random_signs(&mut rng, n);
        for loss in [Loss::exponential(), poly(0.5), poly(1.0), poly(2.0)] {
            let a = solve_relaxed(&g, &y, &loss, &opts()).unwrap();
            let b = solve_diagonal(&dvec, &loss).unwrap();
            prop_assert!(max_abs_diff(&a.q, &b.q) <= 1e-8);
            prop_assert!((a.mu - b.mu).abs() <= 1e-8 * b.mu.max(1.0));
        }
    }
}
