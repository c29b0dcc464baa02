//! Experiments built from the core: the dimension sweep, the per-class rate
//! check, the converse and importance-weighting demos, and multiclass training.

use std::time::Instant;

use iblab_core::data::{
    balanced_multiclass_labels, derive_seed, gen_diagonal_gram, gen_orthogonal, gen_subgaussian, Dataset, EntryDist,
    Labels,
};
use iblab_core::dual::{
    adjusted_labels, ce_candidate, primal_from_dual, solve_diagonal, solve_multiclass_general, solve_relaxed, Method,
    NewtonOptions,
};
use iblab_core::gd::{
    binary_smoothness, default_schedule, multiclass_smoothness, train_importance_weighted, train_multiclass, IwConfig,
    MarginReport, MulticlassTrajectory, Schedule, StopRule, Termination,
};
use iblab_core::interp::{direction_distance, eps_alpha, mni, summarize_gram, svp_check};
use iblab_core::loss::{EncodingScheme, Formulation, Loss, LossKind, MulticlassEncoding};
use iblab_core::num::median;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

/// Worker pool sized by `IBLAB_THREADS` when set.
pub fn worker_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("IBLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

/// Reference scale used for `G ≈ αI`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaChoice {
    /// `tr(G)/n`.
    #[default]
    MeanEigenvalue,
    /// `‖λ‖₁ · rescale²`.
    Spectrum,
}

fn alpha_for(ds: &Dataset, g: &nalgebra::DMatrix<f64>, choice: AlphaChoice) -> f64 {
    match (choice, &ds.lambda) {
        (AlphaChoice::Spectrum, Some(l)) => l.iter().sum::<f64>() * ds.rescale * ds.rescale,
        _ => g.trace() / g.nrows() as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub d_list: Vec<usize>,
    pub loss: Loss,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub alpha: AlphaChoice,
    #[serde(default = "default_entry")]
    pub entry: EntryDist,
}

fn default_entry() -> EntryDist {
    EntryDist::Gaussian
}

impl SweepConfig {
    pub fn validate(&self) -> HarnessResult<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must be nonempty".into()));
        }
        if self.n == 0 {
            return Err(HarnessError::Config("n must be positive".into()));
        }
        if self.d_list.len() < 2 {
            return Err(HarnessError::Config("the sweep needs at least two dimensions".into()));
        }
        if self.d_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::Config("d list must be strictly increasing".into()));
        }
        if let Some(&d) = self.d_list.iter().find(|&&d| d < self.n) {
            return Err(HarnessError::Config(format!("d = {d} is below n = {}", self.n)));
        }
        Ok(())
    }
}

/// One `(d, seed)` trial of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub d: usize,
    pub data_seed: u64,
    pub alpha: f64,
    /// `‖G − αI‖/α`.
    pub ratio: f64,
    /// `ε_α(y)/α`.
    pub eps_y: f64,
    /// Distance between `q̄/‖q̄‖` and `1/√n`.
    pub dual_distance: f64,
    /// Distance between the limit direction and the MNI direction.
    pub primal_distance: f64,
    /// `primal_distance / eps_y`.
    pub bound_ratio: f64,
    /// `(2/(1 − 2·ratio))·eps_y`, when `ratio ≤ 1/3`.
    pub dual_bound: Option<f64>,
    /// `4·dual_distance + 12·eps_y`, when `ratio ≤ 1/3`.
    pub primal_bound: Option<f64>,
    pub within_bounds: Option<bool>,
    pub method: Method,
    pub kkt_residual: f64,
    pub feasibility_gap: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
}

/// Outcome of a trial: a result, or the error that aborted it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub d: usize,
    pub result: Option<TrialResult>,
    pub error: Option<String>,
}

/// The two-stage bound check at one instance.
pub struct RateCheck {
    pub dual_bound: Option<f64>,
    pub primal_bound: Option<f64>,
    pub within_bounds: Option<bool>,
}

pub fn rate_check(ratio: f64, eps: f64, dual: f64, primal: f64) -> RateCheck {
    if ratio <= 1.0 / 3.0 {
        let db = 2.0 / (1.0 - 2.0 * ratio) * eps;
        let pb = 4.0 * dual + 12.0 * eps;
        RateCheck {
            dual_bound: Some(db),
            primal_bound: Some(pb),
            within_bounds: Some(dual <= db && primal <= pb),
        }
    } else {
        RateCheck {
            dual_bound: None,
            primal_bound: None,
            within_bounds: None,
        }
    }
}

/// Generates isotropic data for one trial, solves the dual and measures both distances.
pub fn run_trial(n: usize, d: usize, seed: u64, loss: &Loss, entry: EntryDist, alpha: AlphaChoice) -> HarnessResult<TrialResult> {
    let start = Instant::now();
    let data_seed = derive_seed(seed, d as u64);
    let ds = gen_subgaussian(n, d, &vec![1.0; d], entry, data_seed)?;
    let y = ds.binary_labels().expect("binary labels");
    let g = ds.gram();
    let a = alpha_for(&ds, &g, alpha);
    let summary = summarize_gram(&g, Some(a));
    let eps_y = eps_alpha(&g, a, &y)? / a;
    let sol = solve_relaxed(&g, &y, loss, &NewtonOptions::default())?;
    let q = sol.q_vector();
    let dual_distance = direction_distance(&q, &DVector::from_element(n, 1.0))?;
    let w = primal_from_dual(&ds.x, &y, &q)?;
    let primal_distance = direction_distance(&w, &mni(&ds.x, &y)?.w)?;
    let check = rate_check(summary.ratio, eps_y, dual_distance, primal_distance);
    Ok(TrialResult {
        seed,
        d,
        data_seed,
        alpha: a,
        ratio: summary.ratio,
        eps_y,
        dual_distance,
        primal_distance,
        bound_ratio: primal_distance / eps_y,
        dual_bound: check.dual_bound,
        primal_bound: check.primal_bound,
        within_bounds: check.within_bounds,
        method: sol.method,
        kkt_residual: sol.kkt_residual,
        feasibility_gap: sol.feasibility_gap,
        iterations: sol.iterations,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub d: usize,
    pub trials: usize,
    pub failed: usize,
    pub median_primal: f64,
    pub median_dual: f64,
    pub median_ratio: f64,
    /// Trials with `ratio ≤ 1/3` that break either bound.
    pub violations: usize,
    /// Trials whose dual optimum sits on the boundary.
    pub boundary: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub trials: Vec<TrialRecord>,
    pub per_d: Vec<DimensionSummary>,
    /// Least-squares slope of `ln median_primal` against `ln d`.
    pub slope: Option<f64>,
    pub strictly_decreasing: bool,
    pub violations: usize,
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Dimension sweep over isotropic data; trials run in parallel, summaries sequentially.
pub fn scaling_sweep(config: &SweepConfig) -> HarnessResult<SweepTable> {
    config.validate()?;
    let jobs: Vec<(usize, u64)> = config.d_list.iter().flat_map(|&d| config.seeds.iter().map(move |&s| (d, s))).collect();
    let pool = worker_pool();
    let trials: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, seed)| match run_trial(config.n, d, seed, &config.loss, config.entry, config.alpha) {
                Ok(r) => TrialRecord {
                    seed,
                    d,
                    result: Some(r),
                    error: None,
                },
                Err(e) => {
                    log::warn!("trial d={d} seed={seed} failed: {e}");
                    TrialRecord {
                        seed,
                        d,
                        result: None,
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect()
    });
    let mut per_d = Vec::new();
    for &d in &config.d_list {
        let ok: Vec<&TrialResult> = trials.iter().filter(|t| t.d == d).filter_map(|t| t.result.as_ref()).collect();
        let total = trials.iter().filter(|t| t.d == d).count();
        let col = |f: fn(&TrialResult) -> f64| median(&ok.iter().map(|t| f(t)).collect::<Vec<_>>());
        per_d.push(DimensionSummary {
            d,
            trials: total,
            failed: total - ok.len(),
            median_primal: col(|t| t.primal_distance),
            median_dual: col(|t| t.dual_distance),
            median_ratio: col(|t| t.ratio),
            violations: ok.iter().filter(|t| t.within_bounds == Some(false)).count(),
            boundary: ok.iter().filter(|t| t.method == Method::BarrierContinuation).count(),
        });
    }
    let usable = per_d.iter().all(|s| s.median_primal > 0.0 && s.median_primal.is_finite());
    let slope = usable.then(|| {
        let xs: Vec<f64> = per_d.iter().map(|s| (s.d as f64).ln()).collect();
        let ys: Vec<f64> = per_d.iter().map(|s| s.median_primal.ln()).collect();
        ls_slope(&xs, &ys)
    });
    let strictly_decreasing = per_d.windows(2).all(|w| w[1].median_primal < w[0].median_primal);
    let violations = per_d.iter().map(|s| s.violations).sum();
    Ok(SweepTable {
        trials,
        per_d,
        slope,
        strictly_decreasing,
        violations,
    })
}

pub const TRIAL_COLUMNS: [&str; 15] = [
    "seed",
    "d",
    "ratio",
    "eps_y",
    "dual_distance",
    "primal_distance",
    "bound_ratio",
    "dual_bound",
    "primal_bound",
    "within_bounds",
    "method",
    "kkt_residual",
    "feasibility_gap",
    "iterations",
    "error",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepTable {
    /// Rows matching [`TRIAL_COLUMNS`].
    pub fn rows(&self) -> Vec<Vec<String>> {
        self.trials
            .iter()
            .map(|t| match &t.result {
                Some(r) => vec![
                    r.seed.to_string(),
                    r.d.to_string(),
                    r.ratio.to_string(),
                    r.eps_y.to_string(),
                    r.dual_distance.to_string(),
                    r.primal_distance.to_string(),
                    r.bound_ratio.to_string(),
                    opt(r.dual_bound),
                    opt(r.primal_bound),
                    r.within_bounds.map(|b| b.to_string()).unwrap_or_default(),
                    format!("{:?}", r.method),
                    r.kkt_residual.to_string(),
                    r.feasibility_gap.to_string(),
                    r.iterations.to_string(),
                    String::new(),
                ],
                None => {
                    let mut row = vec![String::new(); TRIAL_COLUMNS.len()];
                    row[0] = t.seed.to_string();
                    row[1] = t.d.to_string();
                    row[14] = t.error.clone().unwrap_or_default();
                    row
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRateConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub loss: Loss,
    pub seeds: Vec<u64>,
}

/// Two-stage bound check for one class of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTrial {
    pub seed: u64,
    pub class: usize,
    pub ratio: f64,
    /// `ε_α(c_k)/α`.
    pub eps_c: f64,
    pub dual_distance: f64,
    pub primal_distance: f64,
    pub dual_bound: Option<f64>,
    pub primal_bound: Option<f64>,
    pub within_bounds: Option<bool>,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRateReport {
    pub trials: Vec<ClassTrial>,
    pub errors: Vec<String>,
    pub violations: usize,
}

fn class_rate_seed(config: &ClassRateConfig, seed: u64) -> HarnessResult<Vec<ClassTrial>> {
    let (n, d, k) = (config.n, config.d, config.k);
    let data_seed = derive_seed(seed, d as u64);
    let labels = balanced_multiclass_labels(n, k, derive_seed(data_seed, 1))?;
    let ds = gen_subgaussian(n, d, &vec![1.0; d], EntryDist::Gaussian, data_seed)?.with_labels(labels)?;
    let classes = match &ds.labels {
        Labels::Multiclass { classes, .. } => classes.clone(),
        Labels::Binary { .. } => unreachable!("multiclass labels were attached"),
    };
    let enc = MulticlassEncoding::new(&classes, EncodingScheme::EqualAssignment, k)?;
    let g = ds.gram();
    let summary = summarize_gram(&g, None);
    let sols = solve_multiclass_general(&g, &enc, &config.loss, &NewtonOptions::default())?;
    let mut out = Vec::with_capacity(k);
    for (class, sol) in sols.into_iter().enumerate() {
        let sol = sol?;
        let c = enc.class_vector(class);
        let eps_c = eps_alpha(&g, summary.alpha, &c)? / summary.alpha;
        let q = sol.q_vector();
        let dual_distance = direction_distance(&q, &DVector::from_element(n, 1.0))?;
        let w = primal_from_dual(&ds.x, &c, &q)?;
        let primal_distance = direction_distance(&w, &mni(&ds.x, &c)?.w)?;
        let check = rate_check(summary.ratio, eps_c, dual_distance, primal_distance);
        out.push(ClassTrial {
            seed,
            class,
            ratio: summary.ratio,
            eps_c,
            dual_distance,
            primal_distance,
            dual_bound: check.dual_bound,
            primal_bound: check.primal_bound,
            within_bounds: check.within_bounds,
            method: sol.method,
        });
    }
    Ok(out)
}

/// Per-class dual and primal bounds for the equal-assignment multiclass program.
pub fn class_rate(config: &ClassRateConfig) -> HarnessResult<ClassRateReport> {
    if config.seeds.is_empty() || config.k < 2 || config.d < config.n {
        return Err(HarnessError::Config("need seeds, K ≥ 2 and d ≥ n".into()));
    }
    let pool = worker_pool();
    let results: Vec<HarnessResult<Vec<ClassTrial>>> =
        pool.install(|| config.seeds.par_iter().map(|&s| class_rate_seed(config, s)).collect());
    let mut trials = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(t) => trials.extend(t),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let violations = trials.iter().filter(|t| t.within_bounds == Some(false)).count();
    Ok(ClassRateReport {
        trials,
        errors,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverseConfig {
    pub dvec: Vec<f64>,
    pub y: Vec<f64>,
    pub loss: Loss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverseReport {
    /// Diagonal rescaled so its largest entry is 1.
    pub dvec: Vec<f64>,
    pub q: Vec<f64>,
    pub mu: f64,
    /// `max q̄ − min q̄`.
    pub spread: f64,
    pub tilde_y: Vec<f64>,
    /// Distance between `X w̄` and `ỹ` as directions.
    pub interpolation_distance: f64,
    pub interpolates: bool,
    pub note: Option<String>,
    /// Adjusted labels under the exponential loss, for contrast.
    pub exponential_tilde_y: Vec<f64>,
    /// Distance between the exponential adjusted labels and `y`.
    pub exponential_distance_to_y: f64,
}

/// Diagonal-Gram demo of label adjustment by non-exponential tails.
pub fn converse_demo(config: &ConverseConfig) -> HarnessResult<ConverseReport> {
    let n = config.dvec.len();
    if n == 0 || config.y.len() != n {
        return Err(HarnessError::Config("dvec and y must be nonempty and of equal length".into()));
    }
    if config.y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(HarnessError::Config("labels must be +1 or -1".into()));
    }
    if config.dvec.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(HarnessError::Config("dvec entries must be positive".into()));
    }
    let top = config.dvec.iter().copied().fold(0.0, f64::max);
    let dvec: Vec<f64> = config.dvec.iter().map(|v| v / top).collect();
    let y = DVector::from_column_slice(&config.y);
    let sol = solve_diagonal(&dvec, &config.loss)?;
    let adj = adjusted_labels(&dvec, &y, &config.loss)?;
    let ds = gen_diagonal_gram(n, n, &dvec, 0)?;
    let w = primal_from_dual(&ds.x, &y, &sol.q_vector())?;
    let tilde = DVector::from_column_slice(&adj.tilde_y);
    let interpolation_distance = direction_distance(&(&ds.x * &w), &tilde)?;
    let spread = sol.q.iter().copied().fold(f64::NEG_INFINITY, f64::max) - sol.q.iter().copied().fold(f64::INFINITY, f64::min);
    let constant = dvec.iter().all(|&v| v == dvec[0]);
    let note = (config.loss.has_identity_g() && !constant).then(|| "g identity: plain interpolation".to_string());
    let exp = adjusted_labels(&dvec, &y, &Loss::exponential())?;
    let exponential_distance_to_y = direction_distance(&DVector::from_column_slice(&exp.tilde_y), &y)?;
    Ok(ConverseReport {
        dvec,
        q: sol.q,
        mu: sol.mu,
        spread,
        tilde_y: adj.tilde_y,
        interpolation_distance,
        interpolates: interpolation_distance <= 1e-8,
        note,
        exponential_tilde_y: exp.tilde_y,
        exponential_distance_to_y,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IwDemoConfig {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub q: f64,
    pub m: f64,
    /// Number of up-weighted examples (the first `s_size` rows).
    pub s_size: usize,
    pub seed: u64,
    pub risk_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IwDemoReport {
    pub margins: MarginReport,
    pub relative_error: f64,
    /// Ratio implied by the adjusted labels of the reweighted diagonal system.
    pub adjusted_label_ratio: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub final_risk: f64,
}

/// Importance-weighted training on an orthogonal design.
pub fn iw_demo(config: &IwDemoConfig) -> HarnessResult<(IwDemoReport, iblab_core::gd::Trajectory)> {
    let ds = gen_orthogonal(config.n, config.d, config.alpha, config.seed)?;
    let iw = IwConfig {
        s: (0..config.s_size).collect(),
        q: config.q,
        m: config.m,
    };
    let loss = Loss::polynomial(config.m)?;
    let schedule = default_schedule(&loss, binary_smoothness(&loss, config.n));
    let stop = StopRule {
        risk_threshold: config.risk_threshold,
        ..StopRule::default()
    };
    let (traj, margins) = train_importance_weighted(&ds, &iw, &schedule, &stop)?;
    // Reweighting is a rescaling of the up-weighted rows by Q^{-1/m}, so the
    // Gram becomes diagonal with entries α·Q^{-2/m} on S.
    let shrink = config.q.powf(-1.0 / config.m);
    let dvec: Vec<f64> = (0..config.n).map(|i| if i < config.s_size { config.alpha * shrink * shrink } else { config.alpha }).collect();
    let y = ds.binary_labels().expect("binary labels");
    let adj = adjusted_labels(&dvec, &y, &loss)?;
    let inside = adj.tilde_y[0] * y[0] / shrink;
    let outside = adj.tilde_y[config.n - 1] * y[config.n - 1];
    Ok((
        IwDemoReport {
            relative_error: margins.relative_error(),
            margins,
            adjusted_label_ratio: inside / outside,
            termination: traj.termination,
            iterations: traj.iterations,
            final_risk: traj.final_risk,
        },
        traj,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Orthogonal,
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticlassDemoConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub loss: Loss,
    pub formulation: Formulation,
    pub design: Design,
    pub seed: u64,
    pub risk_threshold: f64,
    #[serde(default)]
    pub ln_risk_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassDemoReport {
    pub termination: Termination,
    pub iterations: usize,
    pub final_risk: f64,
    pub beta: f64,
    /// Per-class distance between the trained direction and `Xᵀ(XXᵀ)⁻¹c_k`.
    pub dist_mni: Vec<f64>,
    pub svp_holds: bool,
    /// Present for the cross-entropy formulation when the candidate applies.
    pub ce_balance_residual: Option<f64>,
    pub ce_mass_gap: Option<f64>,
    pub ce_error: Option<String>,
}

pub fn multiclass_dataset(config: &MulticlassDemoConfig) -> HarnessResult<Dataset> {
    let ds = match config.design {
        Design::Orthogonal => gen_orthogonal(config.n, config.d, 1.0, config.seed)?,
        Design::Isotropic => gen_subgaussian(config.n, config.d, &vec![1.0; config.d], EntryDist::Gaussian, config.seed)?,
    };
    let labels = balanced_multiclass_labels(config.n, config.k, derive_seed(config.seed, 1))?;
    Ok(ds.with_labels(labels)?)
}

/// Trains a multiclass model and compares each class with its MNI direction.
pub fn multiclass_demo(config: &MulticlassDemoConfig) -> HarnessResult<(MulticlassDemoReport, MulticlassTrajectory)> {
    if config.k < 2 {
        return Err(iblab_core::Error::InvalidConfiguration(format!("multiclass needs K >= 2, got {}", config.k)).into());
    }
    let ds = multiclass_dataset(config)?;
    let scheme = match config.formulation {
        Formulation::AdaBoostStyle => EncodingScheme::EqualAssignment,
        Formulation::CrossEntropy => EncodingScheme::Simplex,
    };
    let classes = match &ds.labels {
        Labels::Multiclass { classes, .. } => classes.clone(),
        Labels::Binary { .. } => unreachable!("multiclass labels were attached"),
    };
    let enc = MulticlassEncoding::new(&classes, scheme, config.k)?;
    let g = ds.gram();
    let targets: Vec<DVector<f64>> = (0..config.k).map(|k| enc.class_vector(k)).collect();
    let svp_holds = svp_check(&g, &targets)?.holds;
    let (ce_balance_residual, ce_mass_gap, ce_error) = if config.formulation == Formulation::CrossEntropy {
        match ce_candidate(&g, &enc) {
            Ok(c) => (Some(c.balance_residual), Some(c.mass_gap), None),
            Err(e) => (None, None, Some(e.to_string())),
        }
    } else {
        (None, None, None)
    };
    let smooth = multiclass_smoothness(&config.loss, config.formulation, config.n, config.k);
    let schedule = match config.loss.kind() {
        LossKind::Polynomial(_) => default_schedule(&config.loss, smooth),
        _ => Schedule::smoothness_capped(smooth.beta),
    };
    let stop = StopRule {
        risk_threshold: config.risk_threshold,
        ln_risk_threshold: config.ln_risk_threshold,
        ..StopRule::default()
    };
    let traj = train_multiclass(&ds, scheme, &config.loss, config.formulation, &schedule, &stop)?;
    let mut dist_mni = Vec::with_capacity(config.k);
    for (k, target) in targets.iter().enumerate() {
        dist_mni.push(direction_distance(&traj.class_weights(k), &mni(&ds.x, target)?.w)?);
    }
    Ok((
        MulticlassDemoReport {
            termination: traj.termination,
            iterations: traj.iterations,
            final_risk: traj.final_risk,
            beta: smooth.beta,
            dist_mni,
            svp_holds,
            ce_balance_residual,
            ce_mass_gap,
            ce_error,
        },
        traj,
    ))
}
