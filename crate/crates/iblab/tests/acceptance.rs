//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The process exits 0 after reporting unless `ACCEPTANCE_STRICT=1`, in which
//! case any FAIL makes it exit 1.

use std::process::Command;
use std::time::{Duration, Instant};

use iblab::harness::{class_rate, scaling_sweep, AlphaChoice, ClassRateConfig, SweepConfig, SweepTable};
use iblab_core::data::{gen_orthogonal, gen_subgaussian, Dataset, EntryDist, Labels};
use iblab_core::dual::{ce_candidate, primal_from_dual, solve_diagonal, solve_identity, solve_relaxed, Method, NewtonOptions};
use iblab_core::gd::{
    binary_smoothness, default_schedule, multiclass_smoothness, train_binary, train_importance_weighted, train_multiclass,
    IwConfig, Schedule, StopRule, Termination, TrainOptions,
};
use iblab_core::interp::{direction_distance, mni, svp_check_binary};
use iblab_core::loss::{EncodingScheme, Formulation, Loss, MulticlassEncoding};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn poly(m: f64) -> Loss {
    Loss::polynomial(m).unwrap()
}

fn three_losses() -> [Loss; 3] {
    [Loss::exponential(), Loss::logistic(), poly(1.0)]
}

fn signs(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

fn random_pd_gram(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let d = n + 2 + rng.random_range(0..2 * n);
    let z = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    &z * z.transpose() / d as f64 + DMatrix::identity(n, n) * 0.05
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn identity_gram_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [4, 16, 64] {
        for alpha in [0.25, 1.0] {
            let ds = gen_orthogonal(n, 2 * n, alpha, 100 + n as u64).unwrap();
            let y = ds.binary_labels().unwrap();
            let g = ds.gram();
            let reference = mni(&ds.x, &y).unwrap().w;
            for loss in three_losses() {
                let s = solve_relaxed(&g, &y, &loss, &NewtonOptions::default()).map_err(|e| e.to_string())?;
                let t = solve_identity(n, alpha, &loss).unwrap();
                let dual = direction_distance(&s.q_vector(), &t.q_vector()).unwrap();
                let primal = direction_distance(&primal_from_dual(&ds.x, &y, &s.q_vector()).unwrap(), &reference).unwrap();
                check(dual <= 1e-10 && primal <= 1e-10, || {
                    format!("{} n={n} alpha={alpha}: dual {dual:e}, primal {primal:e}", loss.name())
                })?;
                worst = worst.max(dual).max(primal);
            }
        }
    }
    Ok(format!("18 cases, max distance {worst:.1e}"))
}

fn diagonal_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let dvec: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
        let y = signs(&mut rng, n);
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(&dvec));
        for loss in [Loss::exponential(), poly(0.5), poly(1.0), poly(2.0)] {
            let s = solve_relaxed(&g, &y, &loss, &NewtonOptions::default()).map_err(|e| e.to_string())?;
            let t = solve_diagonal(&dvec, &loss).map_err(|e| e.to_string())?;
            let dq = s.q.iter().zip(&t.q).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            let dmu = (s.mu - t.mu).abs() / t.mu;
            check(dq <= 1e-8 && dmu <= 1e-8, || format!("{}: dq {dq:e}, dmu {dmu:e}", loss.name()))?;
            worst = worst.max(dq).max(dmu);
        }
    }
    let hand = solve_diagonal(&[1.0 / 8.0, 1.0], &poly(1.0)).unwrap();
    let err = (hand.q[0] - 4.0 / 9.0).abs().max((hand.q[1] - 1.0 / 9.0).abs());
    check(err <= 1e-10, || format!("hand case q = {:?}", hand.q))?;
    Ok(format!("200 solves, max discrepancy {worst:.1e}; hand case error {err:.1e}"))
}

/// Rows `0` and `1` share a label and nearly coincide, so at most one of them
/// can carry a positive hard-margin multiplier.
fn near_duplicate_instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>) {
    let n = rng.random_range(3..=8);
    let d = n + 3;
    let mut x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let shift = DVector::from_fn(d, |_, _| rng.random_range(-0.1..0.1));
    let row = x.row(0).clone_owned() + shift.transpose();
    x.set_row(1, &row);
    let mut y = signs(rng, n);
    y[1] = y[0];
    (&x * x.transpose(), y)
}

fn svp_exponential_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut held = 0;
    while held < 100 {
        let n = rng.random_range(2..=12);
        let g = random_pd_gram(&mut rng, n);
        let y = signs(&mut rng, n);
        if !svp_check_binary(&g, &y).unwrap().holds {
            continue;
        }
        let s = solve_relaxed(&g, &y, &Loss::exponential(), &NewtonOptions::default()).map_err(|e| e.to_string())?;
        let beta = g.clone().cholesky().unwrap().solve(&y);
        let dist = direction_distance(&s.q_vector(), &y.component_mul(&beta)).unwrap();
        check(dist <= 1e-6, || format!("SVP instance n={n}: distance {dist:e}"))?;
        worst = worst.max(dist);
        held += 1;
    }
    let mut failing = 0;
    let mut smallest_gap = f64::INFINITY;
    while failing < 20 {
        let (g, y) = near_duplicate_instance(&mut rng);
        if svp_check_binary(&g, &y).unwrap().holds {
            continue;
        }
        let s = solve_relaxed(&g, &y, &Loss::exponential(), &NewtonOptions::default()).map_err(|e| e.to_string())?;
        let beta = g.clone().cholesky().unwrap().solve(&y);
        let gap = direction_distance(&s.q_vector(), &y.component_mul(&beta)).unwrap();
        check(s.method == Method::BarrierContinuation, || format!("failing instance solved by {:?}", s.method))?;
        check(gap > 1e-3, || format!("failing instance gap {gap:e}"))?;
        smallest_gap = smallest_gap.min(gap);
        failing += 1;
    }
    Ok(format!("100 SVP instances, max distance {worst:.1e}; 20 failing instances, min gap {smallest_gap:.2e}"))
}

fn sweep(n: usize, d_list: &[usize], loss: Loss, seeds: u64) -> Result<SweepTable, String> {
    let config = SweepConfig {
        n,
        d_list: d_list.to_vec(),
        loss,
        seeds: (0..seeds).collect(),
        alpha: AlphaChoice::MeanEigenvalue,
        entry: EntryDist::Gaussian,
    };
    scaling_sweep(&config).map_err(|e| e.to_string())
}

fn rate_bound_at_desk_scale() -> Verdict {
    let mut summary = Vec::new();
    for loss in [Loss::logistic(), poly(1.0)] {
        let table = sweep(50, &[200, 800, 3200], loss, 20)?;
        let failed: usize = table.per_d.iter().map(|s| s.failed).sum();
        let applicable = table
            .trials
            .iter()
            .filter_map(|t| t.result.as_ref())
            .filter(|r| r.within_bounds.is_some())
            .count();
        check(failed == 0, || format!("{}: {failed} trials failed", loss.name()))?;
        check(table.violations == 0, || format!("{}: {} violations", loss.name(), table.violations))?;
        summary.push(format!("{}: {applicable} trials with ratio <= 1/3, 0 violations", loss.name()));
    }
    Ok(summary.join("; "))
}

fn scaling_with_dimension() -> Verdict {
    let d_list: Vec<usize> = (0..6).map(|k| 100 << k).collect();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for loss in [Loss::logistic(), poly(1.0)] {
        let table = sweep(50, &d_list, loss, 20)?;
        let medians: Vec<String> = table.per_d.iter().map(|s| format!("{:.2e}", s.median_primal)).collect();
        let slope = table.slope;
        let line = format!(
            "{}: medians [{}], slope {}, decreasing {}",
            loss.name(),
            medians.join(", "),
            slope.map_or("undefined".into(), |s| format!("{s:.3}")),
            table.strictly_decreasing
        );
        let in_band = slope.is_some_and(|s| (-0.75..=-0.25).contains(&s));
        if !(table.strictly_decreasing && in_band) {
            failures.push(line.clone());
        }
        lines.push(line);
    }
    if failures.is_empty() {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn gd_dual_agreement() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let loss = three_losses()[i % 3];
        let n = rng.random_range(8..=32);
        let seed = rng.random();
        let ds = if (i / 3) % 2 == 0 {
            gen_orthogonal(n, 2 * n, 1.0, seed).unwrap()
        } else {
            gen_subgaussian(n, 40 * n, &vec![1.0; 40 * n], EntryDist::Gaussian, seed).unwrap()
        };
        let y = ds.binary_labels().unwrap();
        let sol = solve_relaxed(&ds.gram(), &y, &loss, &NewtonOptions::default()).map_err(|e| e.to_string())?;
        let schedule = default_schedule(&loss, binary_smoothness(&loss, n));
        let traj = train_binary(&ds, &loss, &schedule, &StopRule::default(), &TrainOptions::default()).map_err(|e| e.to_string())?;
        check(traj.termination == Termination::RiskBelowThreshold, || format!("instance {i}: {:?}", traj.termination))?;
        let dq = direction_distance(&traj.final_q(), &sol.q_vector()).unwrap();
        let dw = direction_distance(&traj.final_w(), &primal_from_dual(&ds.x, &y, &sol.q_vector()).unwrap()).unwrap();
        check(dq <= 1e-2 && dw <= 1e-2, || format!("instance {i} ({}, n={n}): dual {dq:e}, primal {dw:e}", loss.name()))?;
        worst = worst.max(dq).max(dw);
    }
    Ok(format!("20 instances, max distance {worst:.2e}"))
}

fn multiclass_dataset(n: usize, d: usize, k: usize, seed: u64) -> (Dataset, Vec<usize>) {
    let ds = gen_subgaussian(n, d, &vec![1.0; d], EntryDist::Gaussian, seed).unwrap();
    let classes: Vec<usize> = (0..n).map(|i| i % k).collect();
    (ds.with_labels(Labels::Multiclass { classes: classes.clone(), k }).unwrap(), classes)
}

fn cross_entropy_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let deep = StopRule {
        ln_risk_threshold: Some(-3000.0),
        max_iters: 5_000_000,
        ..StopRule::default()
    };
    let (mut done, mut skipped) = (0, 0);
    let (mut worst_balance, mut worst_dist): (f64, f64) = (0.0, 0.0);
    while done < 20 {
        let k = if done % 2 == 0 { 3 } else { 5 };
        let n = rng.random_range(2 * k..=24);
        let (ds, classes) = multiclass_dataset(n, 40 * n, k, rng.random());
        let enc = MulticlassEncoding::new(&classes, EncodingScheme::Simplex, k).unwrap();
        let Ok(candidate) = ce_candidate(&ds.gram(), &enc) else {
            skipped += 1;
            continue;
        };
        check(candidate.balance_residual <= 1e-10 && candidate.mass_gap <= 1e-10, || {
            format!("balance {:e}, mass gap {:e}", candidate.balance_residual, candidate.mass_gap)
        })?;
        worst_balance = worst_balance.max(candidate.balance_residual).max(candidate.mass_gap);
        let loss = Loss::logistic();
        let beta = multiclass_smoothness(&loss, Formulation::CrossEntropy, n, k).beta;
        let traj = train_multiclass(&ds, EncodingScheme::Simplex, &loss, Formulation::CrossEntropy, &Schedule::smoothness_capped(beta), &deep)
            .map_err(|e| e.to_string())?;
        for c in 0..k {
            let target = mni(&ds.x, &enc.class_vector(c)).unwrap().w;
            let dist = direction_distance(&traj.class_weights(c), &target).unwrap();
            check(dist <= 1e-3, || format!("n={n} K={k} class {c}: {dist:e}"))?;
            worst_dist = worst_dist.max(dist);
        }
        done += 1;
    }
    Ok(format!(
        "20 instances ({skipped} skipped), max balance/mass residual {worst_balance:.1e}, max distance {worst_dist:.2e}"
    ))
}

fn multiclass_rate() -> Verdict {
    let mut lines = Vec::new();
    for loss in [Loss::exponential(), poly(1.0)] {
        let config = ClassRateConfig {
            n: 30,
            d: 2000,
            k: 3,
            loss,
            seeds: (0..10).collect(),
        };
        let report = class_rate(&config).map_err(|e| e.to_string())?;
        check(report.errors.is_empty(), || format!("{}: {:?}", loss.name(), report.errors))?;
        check(report.violations == 0, || format!("{}: {} violations", loss.name(), report.violations))?;
        let applicable = report.trials.iter().filter(|t| t.within_bounds.is_some()).count();
        lines.push(format!("{}: {applicable} class checks, 0 violations", loss.name()));
    }
    Ok(lines.join("; "))
}

fn importance_weighting() -> Verdict {
    let mut lines = Vec::new();
    for (q, m) in [(8.0, 1.0), (32.0, 2.0)] {
        let ds = gen_orthogonal(16, 32, 1.0, 9).unwrap();
        let iw = IwConfig { s: (0..8).collect(), q, m };
        let loss = poly(m);
        let schedule = default_schedule(&loss, binary_smoothness(&loss, 16));
        let (_, report) = train_importance_weighted(&ds, &iw, &schedule, &StopRule::default()).map_err(|e| e.to_string())?;
        let err = report.relative_error();
        check(err <= 0.02, || format!("Q={q} m={m}: ratio {} vs {}", report.ratio, report.predicted_ratio))?;
        lines.push(format!("Q={q} m={m}: ratio {:.4} vs {:.4}", report.ratio, report.predicted_ratio));
    }
    Ok(lines.join("; "))
}

fn property_suite() -> Verdict {
    let out = Command::new(env!("CARGO_BIN_EXE_iblab"))
        .args(["verify", "--suite", "all"])
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let last = stdout.lines().last().unwrap_or("").to_string();
    if out.status.success() {
        Ok(last)
    } else {
        let failed: Vec<&str> = stdout.lines().filter(|l| l.starts_with("FAIL")).collect();
        Err(format!("exit {:?}: {}", out.status.code(), failed.join(" | ")))
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "identity-Gram exactness", budget: Duration::from_secs(1), run: identity_gram_exactness },
        Criterion { id: 2, name: "diagonal oracle equivalence", budget: Duration::from_secs(5), run: diagonal_oracle },
        Criterion { id: 3, name: "SVP exponential reduction", budget: Duration::from_secs(60), run: svp_exponential_reduction },
        Criterion { id: 4, name: "two-stage bound at desk scale", budget: Duration::from_secs(60), run: rate_bound_at_desk_scale },
        Criterion { id: 5, name: "scaling with dimension", budget: Duration::from_secs(300), run: scaling_with_dimension },
        Criterion { id: 6, name: "GD and dual agreement", budget: Duration::from_secs(120), run: gd_dual_agreement },
        Criterion { id: 7, name: "multiclass cross-entropy exactness", budget: Duration::from_secs(180), run: cross_entropy_exactness },
        Criterion { id: 8, name: "multiclass per-class rate", budget: Duration::from_secs(120), run: multiclass_rate },
        Criterion { id: 9, name: "importance weighting", budget: Duration::from_secs(60), run: importance_weighting },
        Criterion { id: 10, name: "property suite", budget: Duration::from_secs(120), run: property_suite },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (ok, detail) = match verdict {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({}): {} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
