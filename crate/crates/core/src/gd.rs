//! Gradient descent on the unregularized empirical risk with primal/dual tracking.
//!
//! Iterates are kept as `w_t = w_0 + Aᵀ a_t` with `A = diag(y) X` (or `Xᵀ B_t`
//! per class for multiclass problems). Every gradient lies in the row space of
//! `A`, so this is exactly gradient descent while costing `O(n²)` per step.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::data::{encode_multiclass, Dataset, Labels};
use crate::error::{Error, Result};
use crate::interp::mni;
use crate::loss::{
    multiclass_state, weighted_state, DualState, EncodingScheme, Formulation, Loss, LossKind,
    MulticlassEncoding, SmoothnessBound, SmoothnessSetting,
};
use crate::num::{median, unit_distance};

/// Risk thresholds at which directions are always recorded.
pub const RISK_LADDER: [f64; 4] = [1e-4, 1e-6, 1e-8, 1e-10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Schedule {
    /// Normalized step `η̂_t` held fixed.
    Constant { eta_hat: f64 },
    /// `η̂_t = max(floor, rate · ‖p_t‖∞ / ‖p_{t+1} − p_t‖∞ per unit step)`, so
    /// the primal moves by a fixed fraction of its size each step. Tracks the
    /// local curvature of `ψ` for polynomial tails, which decays like `1/|ψ|`.
    Geometric { rate: f64, floor: f64 },
}

impl Schedule {
    /// Constant `η̂ = 1/β`.
    pub fn smoothness_capped(beta: f64) -> Self {
        Schedule::Constant { eta_hat: 1.0 / beta }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Constant { eta_hat } => eta_hat > 0.0 && eta_hat.is_finite(),
            Schedule::Geometric { rate, floor } => rate > 0.0 && rate.is_finite() && floor > 0.0 && floor.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid step schedule {self:?}")))
        }
    }

    fn eta_hat(&self, p_scale: f64, image_scale: f64) -> f64 {
        match *self {
            Schedule::Constant { eta_hat } => eta_hat,
            Schedule::Geometric { rate, floor } => {
                if p_scale > 0.0 && image_scale > 0.0 {
                    (rate * p_scale / image_scale).max(floor)
                } else {
                    floor
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub risk_threshold: f64,
    /// Stop once `ln R ≤` this value; replaces `risk_threshold` when set, and
    /// reaches risks below the smallest positive double.
    #[serde(default)]
    pub ln_risk_threshold: Option<f64>,
    pub max_iters: usize,
    /// Consecutive non-improving iterations before declaring non-separability.
    pub patience: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            risk_threshold: 1e-10,
            ln_risk_threshold: None,
            max_iters: 1_000_000,
            patience: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    RiskBelowThreshold,
    MaxIterations,
    NonSeparableDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub risk: f64,
    pub ln_risk: f64,
    pub eta_hat: f64,
    /// `w_t/‖w_t‖` (zero vector at `w_t = 0`).
    pub direction: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
    /// `½‖Aᵀq_t‖²`.
    pub dual_objective: f64,
    pub dist_mni: Option<f64>,
    pub dist_dual: Option<f64>,
    /// Ladder threshold first crossed at this iteration, if any.
    pub crossed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub iterations: usize,
    pub smoothness: SmoothnessBound,
    pub final_w: Vec<f64>,
    pub final_q: Vec<f64>,
    pub final_risk: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn final_w(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.final_w)
    }

    pub fn final_q(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.final_q)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOptions {
    /// Starting weights (`0` when absent).
    pub init: Option<DVector<f64>>,
    /// Reference direction (e.g. from the dual program) for `dist_dual`.
    pub dual_reference: Option<DVector<f64>>,
}

fn is_snapshot_time(t: usize) -> bool {
    t == 0 || t.is_power_of_two()
}

fn binary_labels(ds: &Dataset) -> Result<DVector<f64>> {
    ds.binary_labels()
        .ok_or_else(|| Error::InvalidConfiguration("binary training needs ±1 labels".into()))
}

fn validate_stop(stop: &StopRule) -> Result<()> {
    let ln_ok = stop.ln_risk_threshold.is_none_or(|v| v.is_finite());
    if !(stop.risk_threshold > 0.0) || !ln_ok || stop.patience == 0 {
        return Err(Error::InvalidParameter(format!("invalid stop rule {stop:?}")));
    }
    Ok(())
}

fn direction_of(w: &DVector<f64>) -> Vec<f64> {
    let norm = w.norm();
    if norm > 0.0 {
        (w / norm).iter().copied().collect()
    } else {
        w.iter().copied().collect()
    }
}

fn overflow_at(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Overflow { .. } => Error::TrainingOverflow { iteration },
        other => other,
    }
}

/// Ladder thresholds crossed by `ln_risk`, advancing `next`.
fn ladder_crossing(ln_risk: f64, next: &mut usize) -> Option<f64> {
    let mut crossed = None;
    while *next < RISK_LADDER.len() && ln_risk <= RISK_LADDER[*next].ln() {
        crossed = Some(RISK_LADDER[*next]);
        *next += 1;
    }
    crossed
}

/// Counts consecutive iterations without a new best risk.
struct Progress {
    best: f64,
    stale: usize,
}

impl Progress {
    fn new(ln_loss: f64) -> Self {
        Progress { best: ln_loss, stale: 0 }
    }

    fn record(&mut self, ln_loss: f64) {
        if ln_loss < self.best {
            self.best = ln_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
    }
}

fn termination(ln_risk: f64, t: usize, stop: &StopRule, progress: &Progress) -> Option<Termination> {
    if ln_risk <= stop.ln_risk_threshold.unwrap_or(stop.risk_threshold.ln()) {
        Some(Termination::RiskBelowThreshold)
    } else if progress.stale >= stop.patience {
        Some(Termination::NonSeparableDetected)
    } else if t >= stop.max_iters {
        Some(Termination::MaxIterations)
    } else {
        None
    }
}

fn signed_rows(x: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut a = x.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= s[i];
    }
    a
}

/// Binary gradient descent where example `i` carries weight `exp(ln_weights[i])`.
fn run_binary(
    ds: &Dataset,
    y: &DVector<f64>,
    loss: &Loss,
    schedule: &Schedule,
    stop: &StopRule,
    opts: &TrainOptions,
    ln_weights: Option<&[f64]>,
    smoothness: SmoothnessBound,
) -> Result<Trajectory> {
    schedule.validate()?;
    validate_stop(stop)?;
    let (n, d) = (ds.n(), ds.d());
    if n == 0 {
        return Err(Error::InvalidDataset("no examples".into()));
    }
    let a = signed_rows(&ds.x, y);
    let k = &a * a.transpose();
    let w0 = match &opts.init {
        Some(w) if w.len() != d => {
            return Err(Error::InvalidParameter(format!("initial weights have length {}, expected {d}", w.len())))
        }
        Some(w) => w.clone(),
        None => DVector::zeros(d),
    };
    let mni_w = mni(&ds.x, y).ok().map(|r| r.w);
    let p0 = -(&a * &w0);
    let ln_n = (n as f64).ln();

    let mut coef = DVector::zeros(n);
    let mut p = p0.clone();
    let mut st = weighted_state(loss, p.as_slice(), ln_weights).map_err(overflow_at(0))?;
    let mut progress = Progress::new(st.ln_loss_sum);
    let mut next_rung = 0;
    let mut snapshots = Vec::new();
    let mut t = 0;
    let term = loop {
        let ln_risk = st.ln_loss_sum - ln_n;
        let crossed = ladder_crossing(ln_risk, &mut next_rung);
        let kq = &k * &st.q;
        let eta_hat = schedule.eta_hat(p.amax(), kq.amax());
        let term = termination(ln_risk, t, stop, &progress);
        if is_snapshot_time(t) || crossed.is_some() || term.is_some() {
            let w = &w0 + a.transpose() * &coef;
            snapshots.push(Snapshot {
                t,
                risk: ln_risk.exp(),
                ln_risk,
                eta_hat,
                direction: direction_of(&w),
                p: p.iter().copied().collect(),
                q: st.q.iter().copied().collect(),
                q_min: st.q.min(),
                q_max: st.q.max(),
                dual_objective: 0.5 * st.q.dot(&kq),
                dist_mni: mni_w.as_ref().and_then(|m| unit_distance(&w, m)),
                dist_dual: opts.dual_reference.as_ref().and_then(|r| unit_distance(&w, r)),
                crossed,
            });
        }
        if let Some(term) = term {
            break term;
        }
        coef.axpy(eta_hat, &st.q, 1.0);
        p = &p0 - &k * &coef;
        t += 1;
        st = weighted_state(loss, p.as_slice(), ln_weights).map_err(overflow_at(t))?;
        progress.record(st.ln_loss_sum);
    };
    let w = &w0 + a.transpose() * &coef;
    let final_risk = (st.ln_loss_sum - ln_n).exp();
    Ok(Trajectory {
        snapshots,
        termination: term,
        iterations: t,
        smoothness,
        final_w: w.iter().copied().collect(),
        final_q: st.q.iter().copied().collect(),
        final_risk,
    })
}

/// Smoothness of the binary `ψ` over `n` examples.
pub fn binary_smoothness(loss: &Loss, n: usize) -> SmoothnessBound {
    loss.smoothness_bound(SmoothnessSetting::Binary { n })
}

/// Default schedule: constant `η̂ = 1/β`, or for polynomial losses the
/// geometric schedule floored at `1/β`.
pub fn default_schedule(loss: &Loss, smoothness: SmoothnessBound) -> Schedule {
    match loss.kind() {
        LossKind::Polynomial(_) => Schedule::Geometric {
            rate: 0.1,
            floor: 1.0 / smoothness.beta,
        },
        _ => Schedule::smoothness_capped(smoothness.beta),
    }
}

/// Gradient descent on `R(w) = (1/n) Σ ℓ(−yᵢ⟨w, xᵢ⟩)`.
pub fn train_binary(ds: &Dataset, loss: &Loss, schedule: &Schedule, stop: &StopRule, opts: &TrainOptions) -> Result<Trajectory> {
    let y = binary_labels(ds)?;
    let smoothness = binary_smoothness(loss, ds.n());
    run_binary(ds, &y, loss, schedule, stop, opts, None, smoothness)
}

/// Up-weights the examples in `s` by `q` under the polynomial loss of degree `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IwConfig {
    pub s: Vec<usize>,
    pub q: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    /// `yᵢ⟨w_T, xᵢ⟩`.
    pub margins: Vec<f64>,
    pub median_weighted: f64,
    pub median_unweighted: f64,
    pub ratio: f64,
    /// `Q^{1/(m+2)}`.
    pub predicted_ratio: f64,
}

impl MarginReport {
    pub fn relative_error(&self) -> f64 {
        (self.ratio / self.predicted_ratio - 1.0).abs()
    }
}

impl IwConfig {
    fn validate(&self, n: usize) -> Result<Loss> {
        if !(self.q > 1.0) || !self.q.is_finite() {
            return Err(Error::InvalidParameter(format!("importance weight must exceed 1, got {}", self.q)));
        }
        let loss = Loss::polynomial(self.m)?;
        let mut seen = alloc::vec![false; n];
        for &i in &self.s {
            if i >= n || seen[i] {
                return Err(Error::InvalidParameter(format!("bad or repeated up-weighted index {i}")));
            }
            seen[i] = true;
        }
        if self.s.is_empty() || self.s.len() == n {
            return Err(Error::InvalidParameter("up-weighted set must be a proper nonempty subset".into()));
        }
        Ok(loss)
    }

    pub fn predicted_ratio(&self) -> f64 {
        self.q.powf(1.0 / (self.m + 2.0))
    }
}

/// Gradient descent on the importance-weighted risk `(1/n) Σ ωᵢ ℓ(pᵢ)`.
pub fn train_importance_weighted(
    ds: &Dataset,
    iw: &IwConfig,
    schedule: &Schedule,
    stop: &StopRule,
) -> Result<(Trajectory, MarginReport)> {
    let y = binary_labels(ds)?;
    let n = ds.n();
    let loss = iw.validate(n)?;
    let mut ln_weights = alloc::vec![0.0; n];
    for &i in &iw.s {
        ln_weights[i] = iw.q.ln();
    }
    let base = binary_smoothness(&loss, n);
    let smoothness = SmoothnessBound {
        beta: base.beta * iw.q,
        estimated: base.estimated,
    };
    let traj = run_binary(ds, &y, &loss, schedule, stop, &TrainOptions::default(), Some(&ln_weights), smoothness)?;
    let w = traj.final_w();
    let margins: Vec<f64> = (0..n).map(|i| y[i] * ds.x.row(i).dot(&w.transpose())).collect();
    let (inside, outside): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| iw.s.contains(i));
    let pick = |idx: &[usize]| idx.iter().map(|&i| margins[i]).collect::<Vec<_>>();
    let median_weighted = median(&pick(&inside));
    let median_unweighted = median(&pick(&outside));
    let report = MarginReport {
        margins,
        median_weighted,
        median_unweighted,
        ratio: median_weighted / median_unweighted,
        predicted_ratio: iw.predicted_ratio(),
    };
    Ok((traj, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSnapshot {
    pub t: usize,
    pub risk: f64,
    pub ln_risk: f64,
    pub eta_hat: f64,
    /// One unit direction per class.
    pub directions: Vec<Vec<f64>>,
    pub q_min: f64,
    pub q_max: f64,
    /// `½ Σₖ ‖Xᵀ diag(c_k⁻¹) q_k‖²`.
    pub dual_objective: f64,
    /// Per-class distance to `Xᵀ(XXᵀ)⁻¹c_k`.
    pub dist_mni: Vec<Option<f64>>,
    pub crossed: Option<f64>,
}

impl MulticlassSnapshot {
    /// Largest per-class distance to the class MNI, if all are defined.
    pub fn max_dist_mni(&self) -> Option<f64> {
        self.dist_mni.iter().try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassTrajectory {
    pub snapshots: Vec<MulticlassSnapshot>,
    pub termination: Termination,
    pub iterations: usize,
    pub smoothness: SmoothnessBound,
    /// `d × K`, column `k` is `w_k`.
    pub final_w: Vec<Vec<f64>>,
    /// `K × n`.
    pub final_q: Vec<Vec<f64>>,
    pub final_risk: f64,
}

impl MulticlassTrajectory {
    pub fn last(&self) -> &MulticlassSnapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn class_weights(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.final_w[k])
    }
}

fn multiclass_labels(ds: &Dataset) -> Result<(&[usize], usize)> {
    match &ds.labels {
        Labels::Multiclass { classes, k } => Ok((classes, *k)),
        Labels::Binary { .. } => Err(Error::InvalidConfiguration("multiclass training needs class labels".into())),
    }
}

/// Smoothness of the multiclass `ψ` for a formulation.
pub fn multiclass_smoothness(loss: &Loss, formulation: Formulation, n: usize, k: usize) -> SmoothnessBound {
    match formulation {
        Formulation::CrossEntropy => loss.smoothness_bound(SmoothnessSetting::MulticlassCE { k }),
        Formulation::AdaBoostStyle => loss.smoothness_bound(SmoothnessSetting::MulticlassGeneral { n, k }),
    }
}

/// `Ξ` with `ξ_{k,i} = −⟨w_k, xᵢ⟩ / c_{k,i}` from the logits `XW` (`n × K`).
fn primal_matrix(logits: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(c.nrows(), c.ncols(), |k, i| -logits[(i, k)] / c[(k, i)])
}

/// Gradient descent on the multiclass risk with `W₀ = 0`.
pub fn train_multiclass(
    ds: &Dataset,
    scheme: EncodingScheme,
    loss: &Loss,
    formulation: Formulation,
    schedule: &Schedule,
    stop: &StopRule,
) -> Result<MulticlassTrajectory> {
    let (classes, num_classes) = multiclass_labels(ds)?;
    let enc = encode_multiclass(classes, scheme, num_classes)?;
    schedule.validate()?;
    validate_stop(stop)?;
    let n = ds.n();
    let kk = num_classes;
    let c = enc.matrix().clone();
    let g = ds.gram();
    let smoothness = multiclass_smoothness(loss, formulation, n, kk);
    let mni_w: Vec<Option<DVector<f64>>> = (0..kk).map(|k| mni(&ds.x, &enc.class_vector(k)).ok().map(|r| r.w)).collect();
    let ln_n = (n as f64).ln();

    // W = Xᵀ B, so the logits are G B.
    let mut b = DMatrix::<f64>::zeros(n, kk);
    let mut xi = DMatrix::zeros(kk, n);
    let mut st = multiclass_state(loss, &enc, &xi, formulation).map_err(overflow_at(0))?;
    let mut progress = Progress::new(st.ln_loss_sum);
    let mut next_rung = 0;
    let mut snapshots = Vec::new();
    let mut t = 0;
    let term = loop {
        let ln_risk = st.ln_loss_sum - ln_n;
        let crossed = ladder_crossing(ln_risk, &mut next_rung);
        // Column k of `v` is diag(c_k⁻¹) q_k; the step moves B by η̂ v.
        let v = DMatrix::from_fn(n, kk, |i, k| st.q[(k, i)] / c[(k, i)]);
        let gv = &g * &v;
        let eta_hat = schedule.eta_hat(xi.amax(), primal_matrix(&gv, &c).amax());
        let term = termination(ln_risk, t, stop, &progress);
        if is_snapshot_time(t) || crossed.is_some() || term.is_some() {
            let w = ds.x.transpose() * &b;
            let dual_objective = 0.5 * (0..kk).map(|k| v.column(k).dot(&gv.column(k))).sum::<f64>();
            snapshots.push(MulticlassSnapshot {
                t,
                risk: ln_risk.exp(),
                ln_risk,
                eta_hat,
                directions: (0..kk).map(|k| direction_of(&w.column(k).into_owned())).collect(),
                q_min: st.q.min(),
                q_max: st.q.max(),
                dual_objective,
                dist_mni: (0..kk)
                    .map(|k| mni_w[k].as_ref().and_then(|m| unit_distance(&w.column(k).into_owned(), m)))
                    .collect(),
                crossed,
            });
        }
        if let Some(term) = term {
            break term;
        }
        b += &v * eta_hat;
        xi = primal_matrix(&(&g * &b), &c);
        t += 1;
        st = multiclass_state(loss, &enc, &xi, formulation).map_err(overflow_at(t))?;
        progress.record(st.ln_loss_sum);
    };
    let w = ds.x.transpose() * &b;
    Ok(MulticlassTrajectory {
        snapshots,
        termination: term,
        iterations: t,
        smoothness,
        final_w: (0..kk).map(|k| w.column(k).iter().copied().collect()).collect(),
        final_q: (0..kk).map(|k| st.q.row(k).iter().copied().collect()).collect(),
        final_risk: (st.ln_loss_sum - ln_n).exp(),
    })
}

/// Empirical risk `(1/n) Σ ℓ(−yᵢ⟨w, xᵢ⟩)` and its gradient.
pub fn risk_and_gradient(x: &DMatrix<f64>, y: &DVector<f64>, loss: &Loss, w: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let n = x.nrows() as f64;
    let a = signed_rows(x, y);
    let p = -(&a * w);
    let st: DualState = weighted_state(loss, p.as_slice(), None)?;
    let scale = loss.ln_deriv(st.psi).exp() / n;
    let grad = -(a.transpose() * &st.q) * scale;
    Ok((st.ln_loss_sum.exp() / n, grad))
}

/// Multiclass risk `(1/n) 𝔏(Ξ)` and its gradient with respect to `W` (`d × K`).
pub fn multiclass_risk_and_gradient(
    x: &DMatrix<f64>,
    enc: &MulticlassEncoding,
    loss: &Loss,
    formulation: Formulation,
    w: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>)> {
    let n = x.nrows() as f64;
    let c = enc.matrix();
    let xi = primal_matrix(&(x * w), c);
    let st = multiclass_state(loss, enc, &xi, formulation)?;
    let scale = loss.ln_deriv(st.psi).exp() / n;
    let v = DMatrix::from_fn(x.nrows(), enc.num_classes(), |i, k| st.q[(k, i)] / c[(k, i)]);
    let grad = -(x.transpose() * v) * scale;
    Ok((st.ln_loss_sum.exp() / n, grad))
}

fn csv_field(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}


impl Trajectory {
    /// CSV with columns `t,risk,eta_hat,dist_mni,dist_dual,q_min,q_max`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,risk,eta_hat,dist_mni,dist_dual,q_min,q_max\n");
        for s in &self.snapshots {
            out.push_str(&format!(
                "{},{:e},{:e},{},{},{:e},{:e}\n",
                s.t,
                s.risk,
                s.eta_hat,
                csv_field(s.dist_mni),
                csv_field(s.dist_dual),
                s.q_min,
                s.q_max
            ));
        }
        out
    }
}

impl MulticlassTrajectory {
    /// Same columns as [`Trajectory::to_csv`], with `dist_mni` the worst class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,risk,eta_hat,dist_mni,dist_dual,q_min,q_max\n");
        for s in &self.snapshots {
            out.push_str(&format!(
                "{},{:e},{:e},{},,{:e},{:e}\n",
                s.t,
                s.risk,
                s.eta_hat,
                csv_field(s.max_dist_mni()),
                s.q_min,
                s.q_max
            ));
        }
        out
    }
}
