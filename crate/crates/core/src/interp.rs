//! Minimum-norm interpolation, support-vector-proliferation checks, Gram
//! deviation quantities and direction distances.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::unit_distance;

/// Largest condition number accepted when forming an interpolant.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative tolerance for treating a label vector as an exact eigenvector.
pub const EIGENVECTOR_TOL: f64 = 1e-10;

/// Cholesky factorization of an SPD matrix with one step of iterative refinement.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    lambda_min: f64,
    lambda_max: f64,
}

impl SpdSolver {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        let (lambda_min, lambda_max) = extreme_eigenvalues(matrix);
        if !(lambda_min > 0.0) {
            return Err(Error::NotPositiveDefinite { lambda_min });
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite { lambda_min })?;
        Ok(SpdSolver {
            matrix: matrix.clone(),
            chol,
            lambda_min,
            lambda_max,
        })
    }

    pub fn condition_number(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(b);
        for _ in 0..2 {
            let r = b - &self.matrix * &x;
            x += self.chol.solve(&r);
        }
        x
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Gram matrix with its deviation from a scaled identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSummary {
    #[serde(skip)]
    pub gram: DMatrix<f64>,
    pub n: usize,
    pub alpha: f64,
    /// Operator norm of `G − αI`.
    pub eps: f64,
    pub ratio: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub condition_number: f64,
}

/// Summary of `G = XXᵀ`; `alpha` defaults to `tr(G)/n`.
pub fn gram_summary(x: &DMatrix<f64>, alpha: Option<f64>) -> GramSummary {
    summarize_gram(&(x * x.transpose()), alpha)
}

pub fn summarize_gram(g: &DMatrix<f64>, alpha: Option<f64>) -> GramSummary {
    let n = g.nrows();
    let alpha = alpha.unwrap_or_else(|| g.trace() / n as f64);
    let (lambda_min, lambda_max) = extreme_eigenvalues(g);
    let eps = (lambda_max - alpha).abs().max((lambda_min - alpha).abs());
    let condition_number = if lambda_min > 0.0 {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    };
    GramSummary {
        gram: g.clone(),
        n,
        alpha,
        eps,
        ratio: eps / alpha,
        lambda_min,
        lambda_max,
        condition_number,
    }
}

/// `‖Gv − αv‖ / ‖v‖`.
pub fn eps_alpha(g: &DMatrix<f64>, alpha: f64, v: &DVector<f64>) -> Result<f64> {
    let nv = v.norm();
    if nv == 0.0 {
        return Err(Error::Domain("eps_alpha of the zero vector".into()));
    }
    Ok((g * v - v * alpha).norm() / nv)
}

/// Distance between the unit normalizations of two nonzero vectors, in `[0, 2]`.
pub fn direction_distance(w1: &DVector<f64>, w2: &DVector<f64>) -> Result<f64> {
    if w1.len() != w2.len() {
        return Err(Error::Domain(format!("length mismatch {} vs {}", w1.len(), w2.len())));
    }
    unit_distance(w1, w2).ok_or_else(|| Error::Domain("direction of a zero vector".into()))
}

/// Whether `y` is an eigenvector of `G` to relative tolerance [`EIGENVECTOR_TOL`].
pub fn is_exact_eigenvector(g: &DMatrix<f64>, y: &DVector<f64>) -> bool {
    let k = y.dot(&(g * y)) / y.norm_squared();
    match eps_alpha(g, k, y) {
        Ok(e) => k > 0.0 && e / k <= EIGENVECTOR_TOL,
        Err(_) => false,
    }
}

/// Minimum-norm interpolant of some targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    pub w: DVector<f64>,
    /// `(XXᵀ)⁻¹ targets`, the dual coefficients.
    pub coefficients: DVector<f64>,
    pub condition_number: f64,
    /// `‖Xw − targets‖∞`.
    pub residual: f64,
}

/// `w = Xᵀ(XXᵀ)⁻¹ targets`.
pub fn mni(x: &DMatrix<f64>, targets: &DVector<f64>) -> Result<Interpolant> {
    if targets.len() != x.nrows() {
        return Err(Error::InvalidParameter(format!(
            "{} targets for {} rows",
            targets.len(),
            x.nrows()
        )));
    }
    let g = x * x.transpose();
    let solver = SpdSolver::new(&g).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularGram { condition: f64::INFINITY },
        other => other,
    })?;
    let condition = solver.condition_number();
    if condition > MAX_CONDITION {
        return Err(Error::SingularGram { condition });
    }
    let coefficients = solver.solve(targets);
    let w = x.transpose() * &coefficients;
    let residual = (x * &w - targets).amax();
    Ok(Interpolant {
        w,
        coefficients,
        condition_number: condition,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvpReport {
    /// `G⁻¹ c` for each target vector.
    pub beta: Vec<Vec<f64>>,
    pub holds: bool,
    /// Smallest signed product `cᵢ βᵢ` over all targets and examples.
    pub margin: f64,
    /// `(target, example)` attaining the margin.
    pub argmin: (usize, usize),
    pub condition_number: f64,
}

/// Checks `cᵢ (G⁻¹c)ᵢ > 0` for every target vector `c`.
pub fn svp_check(g: &DMatrix<f64>, targets: &[DVector<f64>]) -> Result<SvpReport> {
    let solver = SpdSolver::new(g)?;
    let mut beta = Vec::with_capacity(targets.len());
    let mut margin = f64::INFINITY;
    let mut argmin = (0, 0);
    for (k, c) in targets.iter().enumerate() {
        let b = solver.solve(c);
        for i in 0..c.len() {
            let s = c[i] * b[i];
            if s < margin {
                margin = s;
                argmin = (k, i);
            }
        }
        beta.push(b.iter().copied().collect());
    }
    Ok(SvpReport {
        beta,
        holds: margin > 0.0,
        margin,
        argmin,
        condition_number: solver.condition_number(),
    })
}

pub fn svp_check_binary(g: &DMatrix<f64>, y: &DVector<f64>) -> Result<SvpReport> {
    svp_check(g, core::slice::from_ref(y))
}
