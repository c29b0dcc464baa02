//! Solvers for the relaxed dual program whose optimum gives the limit
//! direction of gradient descent:
//!
//! `min ½ qᵀMq` over `q ≥ 0` with `Σ g⁻¹(qᵢ) ≥ 1`, where `M = diag(s) G diag(s)`.
//!
//! Interior optima satisfy the characteristic equations `Mq = μ h(q)`,
//! `Σ g⁻¹(qᵢ) = 1`, which are solved by damped Newton in `u = ln q`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{svp_check, SpdSolver};
use crate::loss::{EncodingScheme, Loss, MulticlassEncoding};
use crate::num::bisect_increasing;

/// Barrier weights used when the optimum sits on the boundary `qᵢ = 0`.
const BARRIER_SCHEDULE: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
const MAX_LOG_STEP: f64 = 3.0;
const MIN_LOG_Q: f64 = -600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    NewtonGeneral,
    DiagonalClosedForm,
    IdentityClosedForm,
    CECandidate,
    /// Log-barrier continuation; some positivity constraints are active.
    BarrierContinuation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub q: Vec<f64>,
    pub mu: f64,
    /// `‖Mq − λ − μ h(q)‖∞`.
    pub kkt_residual: f64,
    /// `|1 − Σ g⁻¹(qᵢ)|`.
    pub feasibility_gap: f64,
    pub method: Method,
    pub iterations: usize,
    /// Multipliers of the positivity constraints (zero at interior optima).
    pub lambda: Vec<f64>,
}

impl DualSolution {
    pub fn q_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.q)
    }

    pub fn is_interior(&self) -> bool {
        self.method != Method::BarrierContinuation
    }

    /// Whether the residuals meet the given tolerances.
    pub fn converged(&self, tol: f64, feasibility_tol: f64) -> bool {
        self.kkt_residual <= tol * self.mu && self.feasibility_gap <= feasibility_tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    /// KKT residual tolerance relative to `μ`.
    pub tol: f64,
    pub feasibility_tol: f64,
    pub max_iter: usize,
    pub init: Option<DVector<f64>>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-8,
            feasibility_tol: 1e-10,
            max_iter: 200,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedLabels {
    pub tilde_y: Vec<f64>,
    pub mu: f64,
    pub q: Vec<f64>,
}

fn kkt_residual(m: &DMatrix<f64>, loss: &Loss, q: &DVector<f64>, mu: f64, lambda: &[f64]) -> f64 {
    let mq = m * q;
    (0..q.len())
        .map(|i| (mq[i] - lambda[i] - mu * loss.h(q[i])).abs())
        .fold(0.0, f64::max)
}

fn feasibility_gap(loss: &Loss, q: &DVector<f64>) -> f64 {
    (1.0 - q.iter().map(|&v| loss.g_inv(v)).sum::<f64>()).abs()
}

fn finish(m: &DMatrix<f64>, loss: &Loss, q: DVector<f64>, mu: f64, method: Method, iterations: usize, lambda: Vec<f64>) -> DualSolution {
    DualSolution {
        kkt_residual: kkt_residual(m, loss, &q, mu, &lambda),
        feasibility_gap: feasibility_gap(loss, &q),
        q: q.iter().copied().collect(),
        mu,
        method,
        iterations,
        lambda,
    }
}

/// Closed form for `G = αI`: `q = g(1/n)·1`, `μ = α g(1/n)/h(g(1/n))`.
pub fn solve_identity(n: usize, alpha: f64, loss: &Loss) -> Result<DualSolution> {
    if n == 0 || !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("need n >= 1 and alpha > 0, got n={n}, alpha={alpha}")));
    }
    let q0 = loss.g(1.0 / n as f64);
    let mu = alpha * q0 / loss.h(q0);
    let m = DMatrix::identity(n, n) * alpha;
    Ok(finish(&m, loss, DVector::from_element(n, q0), mu, Method::IdentityClosedForm, 0, vec![0.0; n]))
}

/// Closed form for a diagonal Gram: `qᵢ = f⁻¹(dᵢ/μ)` with `μ` from scalar bisection.
pub fn solve_diagonal(dvec: &[f64], loss: &Loss) -> Result<DualSolution> {
    if dvec.is_empty() || dvec.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter("diagonal entries must be positive".into()));
    }
    let excess = |mu: f64| -> f64 {
        dvec.iter().map(|&d| loss.g_inv(loss.f_inv(d / mu))).sum::<f64>() - 1.0
    };
    let mut hi = 1.0;
    let mut doublings = 0;
    while !(excess(hi) > 0.0) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::SolverFailure {
                reason: "no bracket for the diagonal multiplier".into(),
                iterations: doublings,
                residual: excess(hi),
            });
        }
    }
    let mut lo = hi;
    while excess(lo) > 0.0 && lo > f64::MIN_POSITIVE {
        lo *= 0.5;
    }
    let mu = bisect_increasing(excess, lo, hi);
    let q = DVector::from_iterator(dvec.len(), dvec.iter().map(|&d| loss.f_inv(d / mu)));
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(dvec));
    Ok(finish(&m, loss, q, mu, Method::DiagonalClosedForm, doublings, vec![0.0; dvec.len()]))
}

struct System<'a> {
    m: &'a DMatrix<f64>,
    loss: &'a Loss,
    tau: f64,
}

impl System<'_> {
    fn residual(&self, u: &DVector<f64>, nu: f64) -> (DVector<f64>, f64) {
        let q = u.map(f64::exp);
        let mu = nu.exp();
        let mq = self.m * &q;
        let f1 = DVector::from_fn(q.len(), |i, _| mq[i] - mu * self.loss.h(q[i]) - self.tau / q[i]);
        let f2 = q.iter().map(|&v| self.loss.g_inv(v)).sum::<f64>() - 1.0;
        (f1, f2)
    }

    fn jacobian(&self, u: &DVector<f64>, nu: f64) -> DMatrix<f64> {
        let n = u.len();
        let q = u.map(f64::exp);
        let mu = nu.exp();
        let mut j = DMatrix::zeros(n + 1, n + 1);
        for c in 0..n {
            for r in 0..n {
                j[(r, c)] = self.m[(r, c)] * q[c];
            }
        }
        for i in 0..n {
            let h = self.loss.h(q[i]);
            j[(i, i)] += -mu * self.loss.q_dh(q[i]) + self.tau / q[i];
            j[(i, n)] = -mu * h;
            j[(n, i)] = q[i] * h;
        }
        j
    }
}

struct NewtonOutcome {
    u: DVector<f64>,
    nu: f64,
    iterations: usize,
}

fn merit(f1: &DVector<f64>, f2: f64, scale: f64) -> f64 {
    f1.norm_squared() / (scale * scale) + f2 * f2
}

fn newton(sys: &System, mut u: DVector<f64>, mut nu: f64, opts: &NewtonOptions, scale: f64) -> Result<NewtonOutcome> {
    let (mut f1, mut f2) = sys.residual(&u, nu);
    let mut phi = merit(&f1, f2, scale);
    let done = |f1: &DVector<f64>, f2: f64, nu: f64| f1.amax() <= 0.1 * opts.tol * nu.exp() && f2.abs() <= 0.1 * opts.feasibility_tol;
    for it in 0..opts.max_iter {
        if done(&f1, f2, nu) {
            return Ok(NewtonOutcome { u, nu, iterations: it });
        }
        let n = u.len();
        let jac = sys.jacobian(&u, nu);
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(-&f1));
        rhs[n] = -f2;
        let step = jac.lu().solve(&rhs).ok_or_else(|| Error::SolverFailure {
            reason: "singular Newton system".into(),
            iterations: it,
            residual: f1.amax(),
        })?;
        let largest = step.amax();
        let mut t = if largest > MAX_LOG_STEP { MAX_LOG_STEP / largest } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            let un = &u + step.rows(0, n) * t;
            let nun = nu + step[n] * t;
            let (g1, g2) = sys.residual(&un, nun);
            let phin = merit(&g1, g2, scale);
            if phin.is_finite() && phin <= (1.0 - 1e-4 * t) * phi {
                u = un;
                nu = nun;
                f1 = g1;
                f2 = g2;
                phi = phin;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || t * largest < 1e-14 {
            // Rounding floor reached; accept if the true tolerances already hold.
            if f1.amax() <= opts.tol * nu.exp() && f2.abs() <= opts.feasibility_tol {
                return Ok(NewtonOutcome { u, nu, iterations: it + 1 });
            }
            return Err(Error::SolverFailure {
                reason: "Newton stagnated".into(),
                iterations: it + 1,
                residual: f1.amax(),
            });
        }
        if u.min() < MIN_LOG_Q {
            return Err(Error::SolverFailure {
                reason: "iterate approached the boundary q = 0".into(),
                iterations: it + 1,
                residual: f1.amax(),
            });
        }
    }
    if f1.amax() <= opts.tol * nu.exp() && f2.abs() <= opts.feasibility_tol {
        return Ok(NewtonOutcome { u, nu, iterations: opts.max_iter });
    }
    Err(Error::SolverFailure {
        reason: "iteration limit reached".into(),
        iterations: opts.max_iter,
        residual: f1.amax(),
    })
}

fn least_squares_mu(m: &DMatrix<f64>, loss: &Loss, q: &DVector<f64>) -> f64 {
    let h = q.map(|v| loss.h(v));
    let mu = (m * q).dot(&h) / h.norm_squared();
    if mu > 0.0 && mu.is_finite() {
        mu
    } else {
        q.dot(&(m * q)).max(f64::MIN_POSITIVE)
    }
}

/// Rescales `q` so that `Σ g⁻¹(qᵢ) = 1`.
fn make_feasible(loss: &Loss, q: &DVector<f64>) -> DVector<f64> {
    let total: f64 = q.iter().map(|&v| loss.g_inv(v)).sum();
    q.map(|v| loss.g(loss.g_inv(v) / total))
}

fn newton_from(m: &DMatrix<f64>, loss: &Loss, q0: &DVector<f64>, opts: &NewtonOptions, tau: f64) -> Result<(DVector<f64>, f64, usize)> {
    let q0 = make_feasible(loss, &q0.map(|v| v.max(1e-300)));
    let mu0 = least_squares_mu(m, loss, &q0);
    let scale = (m * &q0).amax().max(f64::MIN_POSITIVE);
    let sys = System { m, loss, tau };
    let out = newton(&sys, q0.map(f64::ln), mu0.ln(), opts, scale)?;
    Ok((out.u.map(f64::exp), out.nu.exp(), out.iterations))
}

/// `M⁻¹1 > 0` entrywise, i.e. the identity-`g` system has an interior solution.
fn interior_exists(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let solver = SpdSolver::new(m).ok()?;
    let v = solver.solve(&DVector::from_element(m.nrows(), 1.0));
    if v.iter().all(|&x| x > 0.0) {
        let total = v.sum();
        Some(v / total)
    } else {
        None
    }
}

fn barrier_continuation(m: &DMatrix<f64>, loss: &Loss, opts: &NewtonOptions) -> Result<DualSolution> {
    let n = m.nrows();
    let mut q = DVector::from_element(n, loss.g(1.0 / n as f64));
    let tau_scale = q.dot(&(m * &q)) / n as f64;
    let mut mu = least_squares_mu(m, loss, &q);
    let mut total_iters = 0;
    let mut tau = 0.0;
    let inner = NewtonOptions {
        max_iter: opts.max_iter.max(100),
        ..opts.clone()
    };
    for &rel in BARRIER_SCHEDULE.iter() {
        tau = rel * tau_scale;
        let sys = System { m, loss, tau };
        let scale = (m * &q).amax().max(f64::MIN_POSITIVE);
        let out = newton(&sys, q.map(f64::ln), mu.ln(), &inner, scale)?;
        total_iters += out.iterations;
        q = out.u.map(f64::exp);
        mu = out.nu.exp();
    }
    let lambda: Vec<f64> = q.iter().map(|&v| tau / v).collect();
    Ok(finish(m, loss, q, mu, Method::BarrierContinuation, total_iters, lambda))
}

fn check_domain(sol: DualSolution) -> Result<DualSolution> {
    if let Some((index, &value)) = sol.q.iter().enumerate().find(|(_, &v)| v > 1.0 + 1e-8) {
        return Err(Error::DomainViolation { index, value });
    }
    Ok(sol)
}

/// Solves the relaxed program for `M = diag(s) G diag(s)`, for any sign or
/// scaling vector `s`.
pub fn solve_scaled(g: &DMatrix<f64>, s: &DVector<f64>, loss: &Loss, opts: &NewtonOptions) -> Result<DualSolution> {
    let n = g.nrows();
    if g.ncols() != n || s.len() != n || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "Gram is {}×{} with {} scaling entries",
            g.nrows(),
            g.ncols(),
            s.len()
        )));
    }
    SpdSolver::new(g)?;
    let m = DMatrix::from_fn(n, n, |i, j| s[i] * g[(i, j)] * s[j]);

    if loss.has_identity_g() && interior_exists(&m).is_none() {
        log::info!("no interior optimum; switching to barrier continuation");
        return check_domain(barrier_continuation(&m, loss, opts)?);
    }

    let start = opts
        .init
        .clone()
        .unwrap_or_else(|| DVector::from_element(n, loss.g(1.0 / n as f64)));
    let first = newton_from(&m, loss, &start, opts, 0.0);
    let (q, mu, iters) = match first {
        Ok(v) => v,
        Err(first_err) => {
            // Retry from the exponential-loss optimum mapped through g.
            let fallback = match interior_exists(&m) {
                Some(v) => v.map(|x| loss.g(x)),
                None => return check_domain(barrier_continuation(&m, loss, opts)?),
            };
            let retry = NewtonOptions {
                max_iter: opts.max_iter * 2,
                ..opts.clone()
            };
            match newton_from(&m, loss, &fallback, &retry, 0.0) {
                Ok(v) => v,
                Err(_) => return Err(first_err),
            }
        }
    };
    check_domain(finish(&m, loss, q, mu, Method::NewtonGeneral, iters, vec![0.0; n]))
}

/// Relaxed dual program for binary labels `y ∈ {±1}ⁿ`.
pub fn solve_relaxed(g: &DMatrix<f64>, y: &DVector<f64>, loss: &Loss, opts: &NewtonOptions) -> Result<DualSolution> {
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
    }
    solve_scaled(g, y, loss, opts)
}

/// Unit vector along `Xᵀ diag(y) q`.
pub fn primal_from_dual(x: &DMatrix<f64>, y: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    if q.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Domain("dual vector must be nonnegative".into()));
    }
    let w = x.transpose() * y.component_mul(q);
    let norm = w.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateData("Xᵀ diag(y) q vanishes".into()));
    }
    Ok(w / norm)
}

/// Labels `ỹᵢ = yᵢ dᵢ qᵢ` interpolated by the limit direction on a diagonal Gram.
pub fn adjusted_labels(dvec: &[f64], y: &DVector<f64>, loss: &Loss) -> Result<AdjustedLabels> {
    if y.len() != dvec.len() {
        return Err(Error::InvalidParameter("label and diagonal lengths differ".into()));
    }
    let sol = solve_diagonal(dvec, loss)?;
    let tilde_y = (0..y.len()).map(|i| y[i] * dvec[i] * sol.q[i]).collect();
    Ok(AdjustedLabels {
        tilde_y,
        mu: sol.mu,
        q: sol.q,
    })
}

/// Per-class relaxed programs with `diag(c_k⁻¹)` in place of `diag(y)`.
pub fn solve_multiclass_general(
    g: &DMatrix<f64>,
    enc: &MulticlassEncoding,
    loss: &Loss,
    opts: &NewtonOptions,
) -> Result<Vec<Result<DualSolution>>> {
    if enc.scheme() != EncodingScheme::EqualAssignment {
        return Err(Error::InvalidConfiguration("per-class solve requires equal-assignment encoding".into()));
    }
    if g.nrows() != enc.n() {
        return Err(Error::InvalidParameter("Gram size does not match the encoding".into()));
    }
    Ok((0..enc.num_classes())
        .map(|k| solve_scaled(g, &enc.class_vector(k).map(|c| 1.0 / c), loss, opts))
        .collect())
}

/// Candidate optimum for cross-entropy with simplex encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeCandidate {
    pub classes: Vec<DualSolution>,
    pub mu: f64,
    /// `maxᵢ |Σₖ qₖᵢ / cₖᵢ|`.
    pub balance_residual: f64,
    /// `|1 − Σₖ 1ᵀqₖ|`.
    pub mass_gap: f64,
}

/// `q̃ₖ = diag(cₖ) G⁻¹ cₖ / Σⱼ cⱼᵀ G⁻¹ cⱼ`, after checking `c_{k,i} (G⁻¹cₖ)ᵢ > 0`.
pub fn ce_candidate(g: &DMatrix<f64>, enc: &MulticlassEncoding) -> Result<CeCandidate> {
    if enc.scheme() != EncodingScheme::Simplex {
        return Err(Error::InvalidConfiguration("cross-entropy candidate requires simplex encoding".into()));
    }
    let k = enc.num_classes();
    let n = enc.n();
    let targets: Vec<DVector<f64>> = (0..k).map(|c| enc.class_vector(c)).collect();
    let report = svp_check(g, &targets)?;
    if !report.holds {
        let (class, index) = report.argmin;
        return Err(Error::NotApplicable {
            class,
            index,
            value: report.margin,
        });
    }
    let betas: Vec<DVector<f64>> = report.beta.iter().map(|b| DVector::from_column_slice(b)).collect();
    let total: f64 = targets.iter().zip(&betas).map(|(c, b)| c.dot(b)).sum();
    let mu = 1.0 / total;
    let qs: Vec<DVector<f64>> = targets.iter().zip(&betas).map(|(c, b)| c.component_mul(b) / total).collect();
    let balance_residual = (0..n)
        .map(|i| (0..k).map(|c| qs[c][i] / enc.c(c, i)).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let mass_gap = (1.0 - qs.iter().map(|q| q.sum()).sum::<f64>()).abs();
    let classes = (0..k)
        .map(|c| {
            let inv = targets[c].map(|v| 1.0 / v);
            let m = DMatrix::from_fn(n, n, |i, j| inv[i] * g[(i, j)] * inv[j]);
            let kkt = (&m * &qs[c]).map(|v| (v - mu).abs()).max();
            DualSolution {
                q: qs[c].iter().copied().collect(),
                mu,
                kkt_residual: kkt,
                feasibility_gap: mass_gap,
                method: Method::CECandidate,
                iterations: 0,
                lambda: vec![0.0; n],
            }
        })
        .collect();
    Ok(CeCandidate {
        classes,
        mu,
        balance_residual,
        mass_gap,
    })
}

/// Human-readable label for a method.
pub fn method_name(m: Method) -> String {
    String::from(match m {
        Method::NewtonGeneral => "newton",
        Method::DiagonalClosedForm => "diagonal",
        Method::IdentityClosedForm => "identity",
        Method::CECandidate => "ce-candidate",
        Method::BarrierContinuation => "barrier",
    })
}
