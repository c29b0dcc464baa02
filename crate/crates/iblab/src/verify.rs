//! Invariant checks run by `iblab verify`, grouped by module.

use std::fmt;
use std::str::FromStr;

use iblab_core::data::{
    balanced_multiclass_labels, effective_dims, gen_diagonal_gram, gen_orthogonal, gen_subgaussian, power_law_spectrum,
    Dataset, EntryDist, Labels,
};
use iblab_core::dual::{
    ce_candidate, primal_from_dual, solve_diagonal, solve_identity, solve_multiclass_general, solve_relaxed, DualSolution,
    NewtonOptions,
};
use iblab_core::gd::{
    binary_smoothness, default_schedule, multiclass_risk_and_gradient, risk_and_gradient, train_binary,
    train_importance_weighted, IwConfig, StopRule, Termination, TrainOptions,
};
use iblab_core::interp::{direction_distance, eps_alpha, extreme_eigenvalues, is_exact_eigenvector, mni, summarize_gram, svp_check_binary};
use iblab_core::loss::{
    dual_map, generalized_sum, multiclass_generalized_sum, EncodingScheme, Formulation, Loss, MulticlassEncoding,
    SmoothnessSetting,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::worker_pool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Loss,
    Data,
    Interp,
    Dual,
    Gd,
    All,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "loss" => Ok(Suite::Loss),
            "data" => Ok(Suite::Data),
            "interp" => Ok(Suite::Interp),
            "dual" => Ok(Suite::Dual),
            "gd" => Ok(Suite::Gd),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite {other:?} (loss, data, interp, dual, gd, all)")),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Loss => "loss",
            Suite::Data => "data",
            Suite::Interp => "interp",
            Suite::Dual => "dual",
            Suite::Gd => "gd",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub total: usize,
    pub failed: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

type Outcome = Result<String, String>;
type Check = (Suite, &'static str, fn(u64) -> Outcome);

const CHECKS: &[Check] = &[
    (Suite::Loss, "dual_range", loss_dual_range),
    (Suite::Loss, "dual_limit", loss_dual_limit),
    (Suite::Loss, "sigma_superadditive", loss_sigma_superadditive),
    (Suite::Loss, "chebyshev_sum", loss_chebyshev),
    (Suite::Loss, "psi_line_convexity", loss_psi_convexity),
    (Suite::Loss, "psi_smoothness", loss_psi_smoothness),
    (Suite::Loss, "g_limit", loss_g_limit),
    (Suite::Loss, "round_trips", loss_round_trips),
    (Suite::Loss, "h_is_derivative_of_g_inverse", loss_h_derivative),
    (Suite::Data, "determinism", data_determinism),
    (Suite::Data, "gram_tolerance", data_gram_tolerance),
    (Suite::Data, "isotropic_concentration", data_concentration),
    (Suite::Data, "effective_dimensions", data_effective_dims),
    (Suite::Interp, "mni_interpolates", interp_mni_interpolates),
    (Suite::Interp, "mni_optimality", interp_mni_optimality),
    (Suite::Interp, "eps_alpha_domination", interp_eps_domination),
    (Suite::Interp, "exact_eigenvector", interp_exact_eigenvector),
    (Suite::Dual, "identity_exactness", dual_identity),
    (Suite::Dual, "diagonal_oracle", dual_diagonal_oracle),
    (Suite::Dual, "solver_residuals", dual_residuals),
    (Suite::Dual, "exponential_svm_reduction", dual_svp_reduction),
    (Suite::Dual, "directional_sandwich", dual_sandwich),
    (Suite::Dual, "rate_bounds", dual_rate_bounds),
    (Suite::Dual, "converse_spread", dual_converse),
    (Suite::Dual, "ce_candidate_balance", dual_ce_balance),
    (Suite::Dual, "multiclass_general", dual_multiclass_general),
    (Suite::Gd, "binary_gradient", gd_binary_gradient),
    (Suite::Gd, "multiclass_gradient", gd_multiclass_gradient),
    (Suite::Gd, "monotone_dual_and_risk", gd_monotone),
    (Suite::Gd, "mni_under_exactness", gd_mni),
    (Suite::Gd, "dual_program_agreement", gd_dual_agreement),
    (Suite::Gd, "importance_weighting", gd_importance_weighting),
];

/// Runs the checks of `suite` in parallel; results keep the declaration order.
pub fn run(suite: Suite, seed: u64) -> VerifyReport {
    let selected: Vec<&Check> = CHECKS.iter().filter(|c| suite == Suite::All || c.0 == suite).collect();
    let checks: Vec<CheckResult> = worker_pool().install(|| {
        selected
            .par_iter()
            .map(|(s, name, f)| {
                let outcome = std::panic::catch_unwind(|| f(seed)).unwrap_or_else(|_| Err("check panicked".into()));
                let (passed, detail) = match outcome {
                    Ok(d) => (true, d),
                    Err(d) => (false, d),
                };
                CheckResult {
                    suite: s.to_string(),
                    name: name.to_string(),
                    passed,
                    detail,
                }
            })
            .collect()
    });
    let failed = checks.iter().filter(|c| !c.passed).count();
    VerifyReport {
        suite,
        seed,
        total: checks.len(),
        failed,
        checks,
    }
}

fn losses() -> Vec<Loss> {
    vec![
        Loss::exponential(),
        Loss::logistic(),
        Loss::polynomial(0.5).expect("valid degree"),
        Loss::polynomial(1.0).expect("valid degree"),
        Loss::polynomial(2.0).expect("valid degree"),
    ]
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core<T>(r: iblab_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn signs(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

fn random_pd_gram(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let d = n + 2 + rng.random_range(0..2 * n);
    let z = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    &z * z.transpose() / d as f64 + DMatrix::identity(n, n) * 0.05
}

fn loss_dual_range(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 1);
    let mut count = 0;
    for loss in losses() {
        for _ in 0..10_000 {
            let n = rng.random_range(1..12);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-40.0..40.0)).collect();
            let q = core(dual_map(&loss, &p))?;
            ensure(q.iter().all(|&v| v > 0.0 && v <= 1.0), || format!("{}: q outside (0,1] at {p:?}", loss.name()))?;
            count += 1;
        }
    }
    Ok(format!("{count} evaluations"))
}

fn loss_dual_limit(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 2);
    let mut worst: f64 = 0.0;
    for loss in losses() {
        for _ in 0..200 {
            let n = rng.random_range(2..8);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let a = 1e-10;
            let p: Vec<f64> = raw.iter().map(|r| loss.inverse(a * r / total)).collect();
            ensure(p.iter().all(|&z| loss.value(z) <= 1e-8), || format!("{}: probe not in the tail", loss.name()))?;
            let q = core(dual_map(&loss, &p))?;
            for (i, r) in raw.iter().enumerate() {
                worst = worst.max((q[i] - loss.g(r / total)).abs());
            }
        }
    }
    ensure(worst <= 1e-4, || format!("max deviation {worst:e}"))?;
    Ok(format!("max |q − g(α)| = {worst:.2e}"))
}

fn sigma(loss: &Loss, s: f64) -> f64 {
    let z = loss.inverse(s);
    loss.deriv(z) * z
}

fn loss_sigma_superadditive(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 3);
    let mut worst = f64::NEG_INFINITY;
    for loss in losses() {
        let top = loss.value(0.0);
        for _ in 0..10_000 {
            let s = top * (-10.0 * rng.random_range(1e-6..1.0f64)).exp();
            let a = s * rng.random_range(1e-6..1.0 - 1e-6);
            let b = s - a;
            let (sa, sb, sab) = (sigma(&loss, a), sigma(&loss, b), sigma(&loss, a + b));
            let excess = sa + sb - sab;
            let tol = 1e-10 * (sa.abs() + sb.abs() + sab.abs());
            ensure(excess <= tol, || format!("{}: σ({a})+σ({b}) exceeds σ(a+b) by {excess:e}", loss.name()))?;
            worst = worst.max(excess);
        }
    }
    Ok(format!("max σ(a)+σ(b)−σ(a+b) = {worst:.2e}"))
}

fn loss_chebyshev(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 4);
    for loss in losses() {
        for _ in 0..10_000 {
            let n = rng.random_range(1..20);
            let q: Vec<f64> = (0..n).map(|_| 10f64.powf(-6.0 * rng.random::<f64>())).collect();
            let h: Vec<f64> = q.iter().map(|&v| loss.h(v)).collect();
            let lhs = (n as f64).sqrt() * h.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            let rhs = q.iter().sum::<f64>() * h.iter().map(|v| v * v).sum::<f64>().sqrt();
            ensure(lhs <= rhs * (1.0 + 1e-12), || format!("{}: {lhs} > {rhs} at {q:?}", loss.name()))?;
        }
    }
    Ok("10000 vectors per loss".into())
}

fn second_difference(f: impl Fn(f64) -> Result<f64, String>, h: f64) -> Result<f64, String> {
    Ok(f(h)? - 2.0 * f(0.0)? + f(-h)?)
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / norm).collect()
}

fn multiclass_probe(
    rng: &mut ChaCha8Rng,
    scheme: EncodingScheme,
) -> Result<(MulticlassEncoding, DMatrix<f64>), String> {
    let k = rng.random_range(2..5);
    let n = rng.random_range(k..k + 5);
    let labels = match core(balanced_multiclass_labels(n, k, rng.random()))? {
        Labels::Multiclass { classes, .. } => classes,
        Labels::Binary { .. } => unreachable!("multiclass labels requested"),
    };
    let enc = core(MulticlassEncoding::new(&labels, scheme, k))?;
    let xi = DMatrix::from_fn(k, n, |_, _| rng.random_range(-5.0..5.0));
    Ok((enc, xi))
}

fn loss_psi_convexity(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 5);
    let h = 1e-2;
    let mut worst = f64::INFINITY;
    for loss in losses() {
        for _ in 0..1000 {
            let n = rng.random_range(1..10);
            let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
            let v = random_unit(&mut rng, n);
            let d2 = second_difference(
                |t| core(generalized_sum(&loss, &xi.iter().zip(&v).map(|(a, b)| a + t * b).collect::<Vec<_>>())),
                h,
            )?;
            ensure(d2 >= -1e-8, || format!("{} binary: second difference {d2:e}", loss.name()))?;
            worst = worst.min(d2);
        }
        for _ in 0..1000 {
            let (enc, xi) = multiclass_probe(&mut rng, EncodingScheme::EqualAssignment)?;
            let v = DMatrix::from_column_slice(xi.nrows(), xi.ncols(), &random_unit(&mut rng, xi.len()));
            let d2 = second_difference(
                |t| core(multiclass_generalized_sum(&loss, &enc, &(&xi + &v * t), Formulation::AdaBoostStyle)),
                h,
            )?;
            ensure(d2 >= -1e-8, || format!("{} AdaBoost-style: second difference {d2:e}", loss.name()))?;
            worst = worst.min(d2);
        }
    }
    let logistic = Loss::logistic();
    for _ in 0..1000 {
        let (enc, xi) = multiclass_probe(&mut rng, EncodingScheme::Simplex)?;
        let class = rng.random_range(0..xi.nrows());
        let row = random_unit(&mut rng, xi.ncols());
        let v = DMatrix::from_fn(xi.nrows(), xi.ncols(), |r, c| if r == class { row[c] } else { 0.0 });
        let d2 = second_difference(
            |t| core(multiclass_generalized_sum(&logistic, &enc, &(&xi + &v * t), Formulation::CrossEntropy)),
            h,
        )?;
        ensure(d2 >= -1e-8, || format!("cross-entropy class {class}: second difference {d2:e}"))?;
        worst = worst.min(d2);
    }
    Ok(format!("min second difference {worst:.2e}"))
}

fn max_norm_direction(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let top = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
    v.iter_mut().for_each(|x| *x /= top);
    v
}

fn loss_psi_smoothness(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 6);
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for loss in losses() {
        for _ in 0..1000 {
            let n = rng.random_range(1..10);
            let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..5.0)).collect();
            let v = max_norm_direction(&mut rng, n);
            let beta = loss.smoothness_bound(SmoothnessSetting::Binary { n }).beta;
            let curv = second_difference(
                |t| core(generalized_sum(&loss, &xi.iter().zip(&v).map(|(a, b)| a + t * b).collect::<Vec<_>>())),
                h,
            )? / (h * h);
            ensure(curv <= 1.01 * beta, || format!("{} binary n={n}: curvature {curv} > β = {beta}", loss.name()))?;
            worst = worst.max(curv / beta);
        }
        for _ in 0..1000 {
            let (enc, xi) = multiclass_probe(&mut rng, EncodingScheme::EqualAssignment)?;
            let (k, n) = (xi.nrows(), xi.ncols());
            let v = DMatrix::from_column_slice(k, n, &max_norm_direction(&mut rng, k * n));
            let beta = loss.smoothness_bound(SmoothnessSetting::MulticlassGeneral { n, k }).beta;
            let curv = second_difference(
                |t| core(multiclass_generalized_sum(&loss, &enc, &(&xi + &v * t), Formulation::AdaBoostStyle)),
                h,
            )? / (h * h);
            ensure(curv <= 1.01 * beta, || format!("{} AdaBoost-style: curvature {curv} > β = {beta}", loss.name()))?;
            worst = worst.max(curv / beta);
        }
    }
    let logistic = Loss::logistic();
    for _ in 0..1000 {
        let (enc, xi) = multiclass_probe(&mut rng, EncodingScheme::Simplex)?;
        let (k, n) = (xi.nrows(), xi.ncols());
        let v = DMatrix::from_column_slice(k, n, &max_norm_direction(&mut rng, k * n));
        let beta = logistic.smoothness_bound(SmoothnessSetting::MulticlassCE { k }).beta;
        let curv = second_difference(
            |t| core(multiclass_generalized_sum(&logistic, &enc, &(&xi + &v * t), Formulation::CrossEntropy)),
            h,
        )? / (h * h);
        ensure(curv <= 1.01 * beta, || format!("cross-entropy: curvature {curv} > β = {beta}"))?;
        worst = worst.max(curv / beta);
    }
    Ok(format!("max curvature/β = {worst:.3}"))
}

fn loss_g_limit(_seed: u64) -> Outcome {
    let a = 1e-8;
    let mut worst: f64 = 0.0;
    for loss in losses() {
        for b in [1.0, 2.0, 10.0] {
            let ratio = loss.deriv(loss.inverse(a)) / loss.deriv(loss.inverse(a * b));
            let err = (ratio - loss.g(1.0 / b)).abs();
            ensure(err <= 1e-4, || format!("{} b={b}: {ratio} vs g = {}", loss.name(), loss.g(1.0 / b)))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("max deviation {worst:.2e}"))
}

fn loss_round_trips(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 7);
    for loss in losses() {
        for _ in 0..10_000 {
            let d = 10f64.powf(-3.0 * rng.random::<f64>());
            let g = loss.g_inv(loss.g(d));
            let f = loss.f_inv(loss.f(d));
            ensure((g - d).abs() <= 1e-10 * d, || format!("{}: g round trip at {d}: {g}", loss.name()))?;
            ensure((f - d).abs() <= 1e-10 * d, || format!("{}: f round trip at {d}: {f}", loss.name()))?;
            let z = rng.random_range(-30.0..10.0);
            let back = loss.inverse(loss.value(z));
            ensure((back - z).abs() <= 1e-9 * (1.0 + z.abs()), || format!("{}: ℓ⁻¹(ℓ({z})) = {back}", loss.name()))?;
        }
    }
    Ok("10000 points per loss".into())
}

fn loss_h_derivative(_seed: u64) -> Outcome {
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for loss in losses() {
        for j in 0..=90 {
            let q = 0.05 + 0.01 * j as f64;
            let fd = (loss.g_inv(q + eps) - loss.g_inv(q - eps)) / (2.0 * eps);
            worst = worst.max((fd - loss.h(q)).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn same_dataset(a: &Dataset, b: &Dataset) -> bool {
    a.x.iter().zip(b.x.iter()).all(|(u, v)| u.to_bits() == v.to_bits()) && a.labels == b.labels
}

fn data_determinism(seed: u64) -> Outcome {
    for s in [seed, seed + 1, seed + 2] {
        let spec = power_law_spectrum(40, 1.0);
        for entry in [EntryDist::Gaussian, EntryDist::Rademacher] {
            let a = core(gen_subgaussian(8, 40, &spec, entry, s))?;
            let b = core(gen_subgaussian(8, 40, &spec, entry, s))?;
            ensure(same_dataset(&a, &b), || format!("sub-Gaussian seed {s} differs"))?;
        }
        ensure(same_dataset(&core(gen_orthogonal(6, 20, 0.7, s))?, &core(gen_orthogonal(6, 20, 0.7, s))?), || {
            format!("orthogonal seed {s} differs")
        })?;
        let dvec = [0.2, 0.5, 1.0];
        ensure(
            same_dataset(&core(gen_diagonal_gram(3, 7, &dvec, s))?, &core(gen_diagonal_gram(3, 7, &dvec, s))?),
            || format!("diagonal seed {s} differs"),
        )?;
    }
    Ok("bit-identical regeneration".into())
}

fn data_gram_tolerance(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..12);
        let d = n + rng.random_range(0..20);
        let alpha = rng.random_range(0.1..=1.0);
        let ds = core(gen_orthogonal(n, d, alpha, rng.random()))?;
        let dev = (ds.gram() - DMatrix::identity(n, n) * alpha).amax() / alpha;
        worst = worst.max(dev);
        let dvec: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let ds = core(gen_diagonal_gram(n, d, &dvec, rng.random()))?;
        let dev = (ds.gram() - DMatrix::from_diagonal(&DVector::from_column_slice(&dvec))).amax();
        worst = worst.max(dev);
    }
    ensure(worst <= 1e-10, || format!("max Gram deviation {worst:e}"))?;
    Ok(format!("max Gram deviation {worst:.2e}"))
}

fn data_concentration(seed: u64) -> Outcome {
    let n = 10;
    let mut fractions = Vec::new();
    for mult in [16, 64] {
        let d = mult * n;
        let mut good = 0;
        for s in 0..20u64 {
            let ds = core(gen_subgaussian(n, d, &vec![1.0; d], EntryDist::Gaussian, seed.wrapping_add(s)))?;
            if summarize_gram(&ds.gram(), None).ratio <= 1.0 / 3.0 {
                good += 1;
            }
        }
        fractions.push(good as f64 / 20.0);
    }
    ensure(fractions[1] >= 0.95, || format!("fraction at d = 64n is {}", fractions[1]))?;
    Ok(format!("fraction with ratio ≤ 1/3: {} at 16n, {} at 64n", fractions[0], fractions[1]))
}

fn data_effective_dims(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 9);
    for _ in 0..200 {
        let d = rng.random_range(1..50);
        let lambda: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
        if lambda.iter().all(|&v| v == 0.0) {
            continue;
        }
        let e = core(effective_dims(&lambda))?;
        ensure(e.d_inf <= e.d2 * (1.0 + 1e-12) && e.d2 <= d as f64 * (1.0 + 1e-12) && e.d_inf >= 1.0 - 1e-12, || {
            format!("d∞ = {}, d₂ = {}, d = {d}", e.d_inf, e.d2)
        })?;
    }
    let iso = core(effective_dims(&[1.0; 30]))?;
    ensure((iso.d2 - 30.0).abs() < 1e-12 && (iso.d_inf - 30.0).abs() < 1e-12, || "isotropic spectrum".into())?;
    Ok("1 ≤ d∞ ≤ d₂ ≤ d".into())
}

fn random_design(rng: &mut ChaCha8Rng) -> Result<(Dataset, DVector<f64>), String> {
    let n = rng.random_range(2..10);
    let d = n + rng.random_range(1..30);
    let ds = core(gen_subgaussian(n, d, &vec![1.0; d], EntryDist::Gaussian, rng.random()))?;
    let y = ds.binary_labels().expect("binary labels");
    Ok((ds, y))
}

fn interp_mni_interpolates(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 10);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (ds, y) = random_design(&mut rng)?;
        let sol = core(mni(&ds.x, &y))?;
        let r = (&ds.x * &sol.w - &y).amax();
        worst = worst.max(r);
    }
    ensure(worst <= 1e-10, || format!("max residual {worst:e}"))?;
    Ok(format!("max residual {worst:.2e}"))
}

fn interp_mni_optimality(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 11);
    for _ in 0..100 {
        let (ds, y) = random_design(&mut rng)?;
        let w = core(mni(&ds.x, &y))?.w;
        let z = DVector::from_fn(ds.d(), |_, _| rng.random_range(-1.0..1.0));
        // project onto the null space of X
        let g = ds.gram();
        let coeff = g.clone().cholesky().ok_or("singular Gram")?.solve(&(&ds.x * &z));
        let null = &z - ds.x.transpose() * coeff;
        let other = &w + null;
        ensure((&ds.x * &other - &y).amax() <= 1e-8, || "perturbed point does not interpolate".into())?;
        ensure(w.norm() <= other.norm() * (1.0 + 1e-12), || format!("{} > {}", w.norm(), other.norm()))?;
    }
    Ok("100 perturbed interpolators".into())
}

fn interp_eps_domination(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 12);
    for _ in 0..500 {
        let n = rng.random_range(2..10);
        let g = random_pd_gram(&mut rng, n);
        let alpha = rng.random_range(0.05..2.0);
        let (lo, hi) = extreme_eigenvalues(&g);
        let op = (hi - alpha).abs().max((lo - alpha).abs());
        let v = DVector::from_column_slice(&random_unit(&mut rng, n));
        let e = core(eps_alpha(&g, alpha, &v))?;
        ensure(e <= op * (1.0 + 1e-10) + 1e-14, || format!("ε = {e} > ‖G − αI‖ = {op}"))?;
    }
    Ok("500 random instances".into())
}

fn interp_exact_eigenvector(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 13);
    for _ in 0..50 {
        let n = rng.random_range(2..10);
        let y = signs(&mut rng, n);
        let alpha = rng.random_range(0.1..2.0);
        ensure(is_exact_eigenvector(&(DMatrix::identity(n, n) * alpha), &y), || "αI rejected".into())?;
    }
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 8.0]);
    ensure(!is_exact_eigenvector(&g, &DVector::from_vec(vec![1.0, -1.0])), || "diag(1, 8) accepted".into())?;
    Ok("identity accepted, diag(1, 8) rejected".into())
}

fn solution_ok(s: &DualSolution) -> bool {
    s.converged(1e-8, 1e-10)
}

fn dual_identity(_seed: u64) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [4, 16, 64] {
        for alpha in [0.25, 1.0] {
            let ds = core(gen_orthogonal(n, 2 * n, alpha, n as u64))?;
            let y = ds.binary_labels().expect("binary labels");
            let g = ds.gram();
            let w_mni = core(mni(&ds.x, &y))?.w;
            for loss in losses() {
                let s = core(solve_relaxed(&g, &y, &loss, &NewtonOptions::default()))?;
                let t = core(solve_identity(n, alpha, &loss))?;
                let dd = core(direction_distance(&s.q_vector(), &t.q_vector()))?;
                let pd = core(direction_distance(&core(primal_from_dual(&ds.x, &y, &s.q_vector()))?, &w_mni))?;
                ensure(dd <= 1e-10 && pd <= 1e-10, || format!("{} n={n} α={alpha}: dual {dd:e}, primal {pd:e}", loss.name()))?;
                worst = worst.max(dd).max(pd);
            }
        }
    }
    Ok(format!("max distance {worst:.2e}"))
}

fn dual_diagonal_oracle(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 14);
    let mut worst: f64 = 0.0;
    let cases = [
        Loss::exponential(),
        Loss::polynomial(0.5).expect("valid degree"),
        Loss::polynomial(1.0).expect("valid degree"),
        Loss::polynomial(2.0).expect("valid degree"),
    ];
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let dvec: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let y = signs(&mut rng, n);
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(&dvec));
        for loss in &cases {
            let s = core(solve_relaxed(&g, &y, loss, &NewtonOptions::default()))?;
            let t = core(solve_diagonal(&dvec, loss))?;
            let dq = s.q.iter().zip(&t.q).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            let dmu = (s.mu - t.mu).abs() / t.mu;
            ensure(dq <= 1e-8 && dmu <= 1e-8, || format!("{}: Δq = {dq:e}, Δμ = {dmu:e}", loss.name()))?;
            worst = worst.max(dq).max(dmu);
        }
    }
    let hand = core(solve_diagonal(&[0.125, 1.0], &Loss::polynomial(1.0).expect("valid degree")))?;
    ensure((hand.q[0] - 4.0 / 9.0).abs() <= 1e-10 && (hand.q[1] - 1.0 / 9.0).abs() <= 1e-10, || {
        format!("dvec ∝ (1, 8): q = {:?}", hand.q)
    })?;
    Ok(format!("max discrepancy {worst:.2e}"))
}

fn dual_residuals(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 15);
    let mut solved = 0;
    for _ in 0..40 {
        let n = rng.random_range(2..12);
        let g = random_pd_gram(&mut rng, n);
        let y = signs(&mut rng, n);
        for loss in losses() {
            let s = core(solve_relaxed(&g, &y, &loss, &NewtonOptions::default()))?;
            if s.is_interior() {
                ensure(solution_ok(&s), || format!("{}: kkt {:e}, feasibility {:e}", loss.name(), s.kkt_residual, s.feasibility_gap))?;
                ensure(s.q.iter().all(|&v| v > 0.0 && v <= 1.0), || "q outside (0, 1]".into())?;
            }
            solved += 1;
        }
    }
    Ok(format!("{solved} solves"))
}

fn dual_svp_reduction(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 16);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 100 {
        let n = rng.random_range(2..=12);
        let g = random_pd_gram(&mut rng, n);
        let y = signs(&mut rng, n);
        if !core(svp_check_binary(&g, &y))?.holds {
            continue;
        }
        let s = core(solve_relaxed(&g, &y, &Loss::exponential(), &NewtonOptions::default()))?;
        let beta = g.clone().cholesky().ok_or("singular Gram")?.solve(&y);
        let dist = core(direction_distance(&s.q_vector(), &y.component_mul(&beta)))?;
        ensure(dist <= 1e-6, || format!("distance {dist:e}"))?;
        worst = worst.max(dist);
        checked += 1;
    }
    let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.9, 0.2, 1.0, 0.0, 0.9, 0.0, 1.0]);
    let y = DVector::from_vec(vec![1.0, -1.0, 1.0]);
    let s = core(solve_relaxed(&g, &y, &Loss::exponential(), &NewtonOptions::default()))?;
    let beta = g.clone().cholesky().ok_or("singular Gram")?.solve(&y);
    let gap = core(direction_distance(&s.q_vector(), &y.component_mul(&beta)))?;
    ensure(!s.is_interior() && gap > 1e-3, || format!("SVP-failing instance: gap {gap:e}"))?;
    Ok(format!("max distance {worst:.2e}; failing instance gap {gap:.2e}"))
}

fn dual_sandwich(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 17);
    for _ in 0..40 {
        let n = rng.random_range(2..12);
        let g = random_pd_gram(&mut rng, n);
        let y = signs(&mut rng, n);
        for loss in losses() {
            let s = core(solve_relaxed(&g, &y, &loss, &NewtonOptions::default()))?;
            if !s.is_interior() {
                continue;
            }
            let q = s.q_vector();
            let h = q.map(|v| loss.h(v));
            let left = core(direction_distance(&q, &DVector::from_element(n, 1.0)))?;
            let right = core(direction_distance(&h, &q))?;
            ensure(left <= right + 1e-8, || format!("{}: {left} > {right}", loss.name()))?;
        }
    }
    Ok("40 instances per loss".into())
}

fn dual_rate_bounds(seed: u64) -> Outcome {
    let mut checked = 0;
    for loss in [Loss::logistic(), Loss::polynomial(1.0).expect("valid degree")] {
        for s in 0..6u64 {
            for d in [200, 800] {
                let r = crate::harness::run_trial(20, d, seed.wrapping_add(s), &loss, EntryDist::Gaussian, Default::default())
                    .map_err(|e| e.to_string())?;
                if let Some(ok) = r.within_bounds {
                    ensure(ok, || format!("{} d={d}: dual {:e}, primal {:e}, ε/α {:e}", loss.name(), r.dual_distance, r.primal_distance, r.eps_y))?;
                    checked += 1;
                }
            }
        }
    }
    ensure(checked > 0, || "no trial met ratio ≤ 1/3".into())?;
    Ok(format!("{checked} trials within both bounds"))
}

fn dual_converse(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 18);
    let mut checked = 0;
    for _ in 0..60 {
        let n = rng.random_range(2..10);
        let g = random_pd_gram(&mut rng, n);
        let y = signs(&mut rng, n);
        let best_alpha = y.dot(&(&g * &y)) / y.norm_squared();
        if core(eps_alpha(&g, best_alpha, &y))? <= 1e-3 * best_alpha {
            continue;
        }
        for m in [0.5, 1.0, 2.0] {
            let s = core(solve_relaxed(&g, &y, &Loss::polynomial(m).expect("valid degree"), &NewtonOptions::default()))?;
            let spread = s.q.iter().copied().fold(f64::NEG_INFINITY, f64::max) - s.q.iter().copied().fold(f64::INFINITY, f64::min);
            ensure(spread > 1e-6, || format!("poly({m}) spread {spread:e}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} solves with spread > 1e-6"))
}

fn simplex_problem(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Result<(DMatrix<f64>, MulticlassEncoding), String> {
    let g = random_pd_gram(rng, n);
    let labels = match core(balanced_multiclass_labels(n, k, rng.random()))? {
        Labels::Multiclass { classes, .. } => classes,
        Labels::Binary { .. } => unreachable!("multiclass labels requested"),
    };
    Ok((g, core(MulticlassEncoding::new(&labels, EncodingScheme::Simplex, k))?))
}

fn dual_ce_balance(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 19);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 20 && attempts < 2000 {
        attempts += 1;
        let k = if rng.random::<bool>() { 3 } else { 5 };
        let n = rng.random_range(k..=12);
        let (g, enc) = simplex_problem(&mut rng, n, k)?;
        let Ok(c) = ce_candidate(&g, &enc) else { continue };
        ensure(c.balance_residual <= 1e-10 && c.mass_gap <= 1e-10, || {
            format!("balance {:e}, mass gap {:e}", c.balance_residual, c.mass_gap)
        })?;
        checked += 1;
    }
    ensure(checked > 0, || "no instance met the candidate condition".into())?;
    Ok(format!("{checked} candidates"))
}

fn dual_multiclass_general(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 20);
    let mut checked = 0;
    for _ in 0..20 {
        let k = rng.random_range(2..5);
        let n = rng.random_range(k..12);
        let g = random_pd_gram(&mut rng, n);
        let labels = match core(balanced_multiclass_labels(n, k, rng.random()))? {
            Labels::Multiclass { classes, .. } => classes,
            Labels::Binary { .. } => unreachable!("multiclass labels requested"),
        };
        let enc = core(MulticlassEncoding::new(&labels, EncodingScheme::EqualAssignment, k))?;
        for loss in [Loss::exponential(), Loss::polynomial(1.0).expect("valid degree")] {
            for s in core(solve_multiclass_general(&g, &enc, &loss, &NewtonOptions::default()))? {
                let s = core(s)?;
                ensure(!s.is_interior() || solution_ok(&s), || format!("kkt {:e}", s.kkt_residual))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} per-class solves"))
}

fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, w: &DVector<f64>, grad: &DVector<f64>) -> Result<f64, String> {
    let h = 1e-6;
    let scale = grad.amax().max(1e-8);
    let mut worst: f64 = 0.0;
    for j in 0..w.len() {
        let mut plus = w.clone();
        let mut minus = w.clone();
        plus[j] += h;
        minus[j] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        worst = worst.max((fd - grad[j]).abs() / scale);
    }
    ensure(worst <= 1e-6, || format!("relative deviation {worst:e}"))?;
    Ok(worst)
}

fn gd_binary_gradient(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 21);
    let mut worst: f64 = 0.0;
    for loss in losses() {
        for _ in 0..10 {
            let (n, d) = (5, 7);
            let ds = core(gen_subgaussian(n, d, &[1.0; 7], EntryDist::Gaussian, rng.random()))?;
            let y = ds.binary_labels().expect("binary labels");
            let w = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let direct = |w: &DVector<f64>| (0..n).map(|i| loss.value(-y[i] * ds.x.row(i).dot(&w.transpose()))).sum::<f64>() / n as f64;
            let (_, grad) = core(risk_and_gradient(&ds.x, &y, &loss, &w))?;
            worst = worst.max(fd_gradient(direct, &w, &grad).map_err(|e| format!("{}: {e}", loss.name()))?);
        }
    }
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn gd_multiclass_gradient(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 22);
    let (n, d, k) = (6, 5, 3);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut cases: Vec<(Loss, Formulation, EncodingScheme)> =
        losses().into_iter().map(|l| (l, Formulation::AdaBoostStyle, EncodingScheme::EqualAssignment)).collect();
    cases.push((Loss::logistic(), Formulation::CrossEntropy, EncodingScheme::Simplex));
    let mut worst: f64 = 0.0;
    for (loss, form, scheme) in cases {
        let enc = core(MulticlassEncoding::new(&labels, scheme, k))?;
        for _ in 0..5 {
            let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-0.5..0.5));
            let w = DMatrix::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0));
            let direct = |v: &DVector<f64>| {
                let logits = &x * DMatrix::from_column_slice(d, k, v.as_slice());
                (0..n)
                    .map(|i| match form {
                        Formulation::AdaBoostStyle => loss.value((0..k).map(|c| -logits[(i, c)] / enc.c(c, i)).sum()),
                        Formulation::CrossEntropy => {
                            let y = labels[i];
                            (0..k).map(|c| (logits[(i, c)] - logits[(i, y)]).exp()).sum::<f64>().ln()
                        }
                    })
                    .sum::<f64>()
                    / n as f64
            };
            let (_, grad) = core(multiclass_risk_and_gradient(&x, &enc, &loss, form, &w))?;
            let flat = DVector::from_column_slice(w.as_slice());
            let gflat = DVector::from_column_slice(grad.as_slice());
            worst = worst.max(fd_gradient(direct, &flat, &gflat).map_err(|e| format!("{} {form:?}: {e}", loss.name()))?);
        }
    }
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn train_default(ds: &Dataset, loss: &Loss, stop: &StopRule) -> Result<iblab_core::gd::Trajectory, String> {
    let schedule = default_schedule(loss, binary_smoothness(loss, ds.n()));
    core(train_binary(ds, loss, &schedule, stop, &TrainOptions::default()))
}

fn gd_monotone(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 23);
    for loss in losses() {
        for _ in 0..2 {
            let ds = core(gen_subgaussian(10, 40, &[1.0; 40], EntryDist::Gaussian, rng.random()))?;
            let traj = train_default(&ds, &loss, &StopRule::default())?;
            for pair in traj.snapshots.windows(2) {
                ensure(pair[1].dual_objective <= pair[0].dual_objective * (1.0 + 1e-9), || {
                    format!("{}: dual objective rose at t = {}", loss.name(), pair[1].t)
                })?;
                ensure(pair[1].ln_risk <= pair[0].ln_risk + 1e-12, || format!("{}: risk rose at t = {}", loss.name(), pair[1].t))?;
            }
            ensure(traj.snapshots.iter().all(|s| s.risk > 0.0), || "risk reached zero".into())?;
        }
    }
    Ok("risk and dual objective nonincreasing".into())
}

fn gd_mni(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 24);
    let mut worst: f64 = 0.0;
    for loss in losses() {
        let ds = core(gen_orthogonal(8, 16, 1.0, rng.random()))?;
        let traj = train_default(&ds, &loss, &StopRule::default())?;
        let dist = traj.last().dist_mni.ok_or("missing MNI distance")?;
        ensure(traj.termination == Termination::RiskBelowThreshold && dist <= 1e-3, || format!("{} orthogonal: {dist:e}", loss.name()))?;
        worst = worst.max(dist);
    }
    let deep = StopRule {
        risk_threshold: 1e-300,
        ..StopRule::default()
    };
    let mut checked = 0;
    while checked < 2 {
        let ds = core(gen_subgaussian(12, 600, &[1.0; 600], EntryDist::Gaussian, rng.random()))?;
        let y = ds.binary_labels().expect("binary labels");
        if !core(svp_check_binary(&ds.gram(), &y))?.holds {
            continue;
        }
        let traj = train_default(&ds, &Loss::exponential(), &deep)?;
        let dist = traj.last().dist_mni.ok_or("missing MNI distance")?;
        ensure(dist <= 1e-3, || format!("exponential SVP instance: {dist:e}"))?;
        worst = worst.max(dist);
        checked += 1;
    }
    Ok(format!("max distance {worst:.2e}"))
}

fn gd_dual_agreement(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 25);
    let mut worst: f64 = 0.0;
    for loss in [Loss::exponential(), Loss::logistic(), Loss::polynomial(1.0).expect("valid degree")] {
        for design in 0..2 {
            let n = rng.random_range(6..=12);
            let ds = if design == 0 {
                core(gen_orthogonal(n, 2 * n, 1.0, rng.random()))?
            } else {
                core(gen_subgaussian(n, 40 * n, &vec![1.0; 40 * n], EntryDist::Gaussian, rng.random()))?
            };
            let y = ds.binary_labels().expect("binary labels");
            let sol = core(solve_relaxed(&ds.gram(), &y, &loss, &NewtonOptions::default()))?;
            let traj = train_default(&ds, &loss, &StopRule::default())?;
            let dq = core(direction_distance(&traj.final_q(), &sol.q_vector()))?;
            let dw = core(direction_distance(&traj.final_w(), &core(primal_from_dual(&ds.x, &y, &sol.q_vector()))?))?;
            ensure(dq <= 1e-2 && dw <= 1e-2, || format!("{} n={n}: dual {dq:e}, primal {dw:e}", loss.name()))?;
            worst = worst.max(dq).max(dw);
        }
    }
    Ok(format!("max distance {worst:.2e}"))
}

fn gd_importance_weighting(seed: u64) -> Outcome {
    let mut out = Vec::new();
    for (q, m) in [(8.0, 1.0), (32.0, 2.0)] {
        let ds = core(gen_orthogonal(16, 32, 1.0, seed))?;
        let iw = IwConfig { s: (0..8).collect(), q, m };
        let loss = Loss::polynomial(m).expect("valid degree");
        let schedule = default_schedule(&loss, binary_smoothness(&loss, 16));
        let (_, report) = core(train_importance_weighted(&ds, &iw, &schedule, &StopRule::default()))?;
        let err = report.relative_error();
        ensure(err <= 0.02, || format!("Q={q}, m={m}: ratio {} vs {}", report.ratio, report.predicted_ratio))?;
        out.push(format!("Q={q} m={m}: {:.4} vs {:.4}", report.ratio, report.predicted_ratio));
    }
    Ok(out.join("; "))
}

