//! Convex exponentially- or polynomially-tailed losses, their derived maps, the
//! generalized sum `ψ(ξ) = ℓ⁻¹(Σ ℓ(ξᵢ))` and its gradient (the dual map).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{bisect_increasing, ln_softplus, log_sum_exp, sigmoid, softplus};

/// Lower clamp applied to `q` before evaluating `h` and related maps.
pub const Q_FLOOR: f64 = 1e-12;

const CURVATURE_GRID: usize = 100_000;
const CURVATURE_LO: f64 = -50.0;
const CURVATURE_HI: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Exponential,
    Logistic,
    /// Polynomially-tailed loss of degree `m > 0`.
    Polynomial(f64),
}

/// A loss together with its inverse maps and the `g`/`h`/`f` maps describing
/// the limiting dual geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossJson", into = "LossJson")]
pub struct Loss {
    kind: LossKind,
}

#[derive(Serialize, Deserialize)]
struct LossJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
}

impl TryFrom<LossJson> for Loss {
    type Error = Error;
    fn try_from(j: LossJson) -> Result<Self> {
        make_loss(&j.kind, j.m)
    }
}

impl From<Loss> for LossJson {
    fn from(l: Loss) -> Self {
        match l.kind {
            LossKind::Exponential => LossJson { kind: "exp".into(), m: None },
            LossKind::Logistic => LossJson { kind: "logistic".into(), m: None },
            LossKind::Polynomial(m) => LossJson { kind: "poly".into(), m: Some(m) },
        }
    }
}

/// Builds a loss from its name (`exp`, `logistic`, `poly`) and optional degree.
pub fn make_loss(kind: &str, m: Option<f64>) -> Result<Loss> {
    match kind.to_ascii_lowercase().as_str() {
        "exp" | "exponential" => Ok(Loss::exponential()),
        "logistic" | "log" => Ok(Loss::logistic()),
        "poly" | "polynomial" => match m {
            Some(m) => Loss::polynomial(m),
            None => Err(Error::InvalidParameter(
                "polynomial loss requires a degree m".to_string(),
            )),
        },
        other => Err(Error::InvalidParameter(format!("unknown loss kind '{other}'"))),
    }
}

/// Checked `h(q)`; `q` must lie in `(0, 1]`.
pub fn h_map(loss: &Loss, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("h is defined on (0, 1], got {q}")));
    }
    Ok(loss.h(q))
}

impl Loss {
    pub fn exponential() -> Self {
        Loss { kind: LossKind::Exponential }
    }

    pub fn logistic() -> Self {
        Loss { kind: LossKind::Logistic }
    }

    pub fn polynomial(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree must be positive, got {m}"
            )));
        }
        Ok(Loss { kind: LossKind::Polynomial(m) })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn name(&self) -> String {
        match self.kind {
            LossKind::Exponential => "exp".into(),
            LossKind::Logistic => "logistic".into(),
            LossKind::Polynomial(m) => format!("poly(m={m})"),
        }
    }

    /// True when `g` is the identity (exponential tails).
    pub fn has_identity_g(&self) -> bool {
        !matches!(self.kind, LossKind::Polynomial(_))
    }

    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Exponential => z.exp(),
            LossKind::Logistic => softplus(z),
            LossKind::Polynomial(m) => {
                if z <= 0.0 {
                    (1.0 - z).powf(-m)
                } else {
                    2.0 * m * z + (1.0 + z).powf(-m)
                }
            }
        }
    }

    pub fn deriv(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Exponential => z.exp(),
            LossKind::Logistic => sigmoid(z),
            LossKind::Polynomial(m) => {
                if z <= 0.0 {
                    m * (1.0 - z).powf(-(m + 1.0))
                } else {
                    2.0 * m - m * (1.0 + z).powf(-(m + 1.0))
                }
            }
        }
    }

    pub fn deriv2(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Exponential => z.exp(),
            LossKind::Logistic => {
                let s = sigmoid(z);
                s * sigmoid(-z)
            }
            LossKind::Polynomial(m) => {
                if z <= 0.0 {
                    m * (m + 1.0) * (1.0 - z).powf(-(m + 2.0))
                } else {
                    m * (m + 1.0) * (1.0 + z).powf(-(m + 2.0))
                }
            }
        }
    }

    /// `ln ℓ(z)`, finite wherever `ℓ(z)` is representable in log form.
    pub fn ln_value(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Exponential => z,
            LossKind::Logistic => ln_softplus(z),
            LossKind::Polynomial(m) => {
                if z <= 0.0 {
                    -m * (-z).ln_1p()
                } else {
                    (2.0 * m * z + (1.0 + z).powf(-m)).ln()
                }
            }
        }
    }

    /// `ln ℓ′(z)`.
    pub fn ln_deriv(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Exponential => z,
            LossKind::Logistic => -softplus(-z),
            LossKind::Polynomial(m) => {
                if z <= 0.0 {
                    m.ln() - (m + 1.0) * (-z).ln_1p()
                } else {
                    (2.0 * m - m * (1.0 + z).powf(-(m + 1.0))).ln()
                }
            }
        }
    }

    /// `ℓ⁻¹(s)` for `s > 0`; NaN outside the domain.
    pub fn inverse(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return f64::NAN;
        }
        self.inverse_ln(s.ln())
    }

    /// `ℓ⁻¹(e^{ln_s})`, evaluated without forming `s` where possible.
    pub fn inverse_ln(&self, ln_s: f64) -> f64 {
        if ln_s.is_nan() {
            return f64::NAN;
        }
        match self.kind {
            LossKind::Exponential => ln_s,
            LossKind::Logistic => {
                if ln_s < -30.0 {
                    ln_s + 0.5 * ln_s.exp()
                } else {
                    let s = ln_s.exp();
                    if s > 40.0 {
                        s + (-(-s).exp()).ln_1p()
                    } else {
                        s.exp_m1().ln()
                    }
                }
            }
            LossKind::Polynomial(m) => {
                if ln_s <= 0.0 {
                    -(-ln_s / m).exp_m1()
                } else {
                    let s = ln_s.exp();
                    if !s.is_finite() {
                        return f64::INFINITY;
                    }
                    bisect_increasing(|z| self.value(z) - s, 0.0, s / (2.0 * m))
                }
            }
        }
    }

    /// `(ℓ′)⁻¹(s)` on the range of `ℓ′`; NaN outside it.
    pub fn deriv_inverse(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return f64::NAN;
        }
        match self.kind {
            LossKind::Exponential => s.ln(),
            LossKind::Logistic => {
                if s >= 1.0 {
                    f64::NAN
                } else {
                    (s / (1.0 - s)).ln()
                }
            }
            LossKind::Polynomial(m) => {
                if s <= m {
                    1.0 - (m / s).powf(1.0 / (m + 1.0))
                } else if s < 2.0 * m {
                    (m / (2.0 * m - s)).powf(1.0 / (m + 1.0)) - 1.0
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Limit map `g` on `[0, 1]`.
    pub fn g(&self, d: f64) -> f64 {
        match self.kind {
            LossKind::Polynomial(m) => d.powf((m + 1.0) / m),
            _ => d,
        }
    }

    pub fn g_inv(&self, d: f64) -> f64 {
        match self.kind {
            LossKind::Polynomial(m) => d.powf(m / (m + 1.0)),
            _ => d,
        }
    }

    /// `h = (g⁻¹)′`, with `q` clamped below at [`Q_FLOOR`].
    pub fn h(&self, q: f64) -> f64 {
        match self.kind {
            LossKind::Polynomial(m) => {
                let q = q.max(Q_FLOOR);
                m / (m + 1.0) * q.powf(-1.0 / (m + 1.0))
            }
            _ => 1.0,
        }
    }

    /// `q · h′(q)`, the log-parametrized derivative of `h`.
    pub fn q_dh(&self, q: f64) -> f64 {
        match self.kind {
            LossKind::Polynomial(m) => -self.h(q) / (m + 1.0),
            _ => 0.0,
        }
    }

    /// `f(d) = h(d)/d` on `(0, 1]`.
    pub fn f(&self, d: f64) -> f64 {
        let d = d.max(Q_FLOOR);
        self.h(d) / d
    }

    /// Inverse of `f` on `(0, ∞)`.
    pub fn f_inv(&self, u: f64) -> f64 {
        match self.kind {
            LossKind::Polynomial(m) => ((m + 1.0) * u / m).powf(-(m + 1.0) / (m + 2.0)),
            _ => 1.0 / u,
        }
    }

    /// `sup ℓ″/ℓ′` over a uniform grid of `[-50, 5]` plus the branch point `z = 0`.
    pub fn curvature_constant(&self) -> f64 {
        match self.kind {
            LossKind::Exponential => 1.0,
            _ => {
                let step = (CURVATURE_HI - CURVATURE_LO) / (CURVATURE_GRID - 1) as f64;
                (0..CURVATURE_GRID)
                    .map(|i| CURVATURE_LO + step * i as f64)
                    .chain(core::iter::once(0.0))
                    .map(|z| self.deriv2(z) / self.deriv(z))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Smoothness constant of `ψ` in the max-norm used to cap normalized steps.
    pub fn smoothness_bound(&self, setting: SmoothnessSetting) -> SmoothnessBound {
        let (n, k) = match setting {
            SmoothnessSetting::MulticlassCE { k } => {
                return SmoothnessBound {
                    beta: 2.0 * (k * k) as f64,
                    estimated: false,
                }
            }
            SmoothnessSetting::Binary { n } => (n, 1),
            SmoothnessSetting::MulticlassGeneral { n, k } => (n, k),
        };
        let k2 = (k * k) as f64;
        match self.kind {
            LossKind::Exponential => SmoothnessBound { beta: k2, estimated: false },
            _ => SmoothnessBound {
                beta: self.curvature_constant() * n as f64 * k2,
                estimated: true,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothnessSetting {
    Binary { n: usize },
    MulticlassGeneral { n: usize, k: usize },
    MulticlassCE { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBound {
    pub beta: f64,
    /// Set when the constant relies on the numerically estimated curvature ratio.
    pub estimated: bool,
}

/// `ψ`, `ln Σ ℓ(ξᵢ)` and the dual vector at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub psi: f64,
    pub ln_loss_sum: f64,
    pub q: DVector<f64>,
}

fn check_finite(xi: &[f64]) -> Result<()> {
    match xi.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
        Some(index) => Err(Error::Overflow { index }),
        None => Ok(()),
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// `ℓ⁻¹(Σᵢ ℓ(ξᵢ))`, accumulated in the log domain.
pub fn generalized_sum(loss: &Loss, xi: &[f64]) -> Result<f64> {
    Ok(weighted_state(loss, xi, None)?.psi)
}

/// Gradient of `ψ`: `qᵢ = ℓ′(ξᵢ)/ℓ′(ψ(ξ))`.
pub fn dual_map(loss: &Loss, p: &[f64]) -> Result<DVector<f64>> {
    Ok(weighted_state(loss, p, None)?.q)
}

/// `ψ` and its gradient in one pass.
pub fn dual_state(loss: &Loss, p: &[f64]) -> Result<DualState> {
    weighted_state(loss, p, None)
}

/// Weighted variant `ψ_ω(ξ) = ℓ⁻¹(Σᵢ ωᵢ ℓ(ξᵢ))`, with weights given as `ln ωᵢ`.
pub fn weighted_state(loss: &Loss, p: &[f64], ln_weights: Option<&[f64]>) -> Result<DualState> {
    if p.is_empty() {
        return Err(Error::InvalidParameter("empty argument to ψ".into()));
    }
    check_finite(p)?;
    let terms: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(i, &z)| loss.ln_value(z) + ln_weights.map_or(0.0, |w| w[i]))
        .collect();
    let ln_sum = log_sum_exp(terms.iter().copied());
    let psi = loss.inverse_ln(ln_sum);
    if !psi.is_finite() || !ln_sum.is_finite() {
        return Err(Error::Overflow { index: argmax(&terms) });
    }
    let ln_dpsi = loss.ln_deriv(psi);
    let q = DVector::from_iterator(
        p.len(),
        p.iter().enumerate().map(|(i, &z)| {
            let lw = ln_weights.map_or(0.0, |w| w[i]);
            (loss.ln_deriv(z) + lw - ln_dpsi).min(0.0).exp()
        }),
    );
    Ok(DualState { psi, ln_loss_sum: ln_sum, q })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingScheme {
    /// `c_{k,i} = 1` for the true class, `-1` otherwise.
    EqualAssignment,
    /// `c_{k,i} = (K-1)/K` for the true class, `-1/K` otherwise.
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    AdaBoostStyle,
    CrossEntropy,
}

/// Per-class signed target vectors `c_k` for multiclass labels (0-based classes).
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassEncoding {
    k: usize,
    scheme: EncodingScheme,
    labels: Vec<usize>,
    /// `K × n`; row `k` is `c_k`.
    c: DMatrix<f64>,
}

impl MulticlassEncoding {
    pub fn new(labels: &[usize], scheme: EncodingScheme, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfiguration(format!(
                "multiclass encoding needs K >= 2, got {k}"
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::InvalidDataset(format!("label {bad} outside 0..{k}")));
        }
        let (a, b) = match scheme {
            EncodingScheme::EqualAssignment => (1.0, 1.0),
            EncodingScheme::Simplex => ((k - 1) as f64 / k as f64, 1.0 / k as f64),
        };
        let n = labels.len();
        let c = DMatrix::from_fn(k, n, |row, i| if labels[i] == row { a } else { -b });
        Ok(MulticlassEncoding {
            k,
            scheme,
            labels: labels.to_vec(),
            c,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn scheme(&self) -> EncodingScheme {
        self.scheme
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Value assigned to the true class.
    pub fn alpha(&self) -> f64 {
        match self.scheme {
            EncodingScheme::EqualAssignment => 1.0,
            EncodingScheme::Simplex => (self.k - 1) as f64 / self.k as f64,
        }
    }

    /// Magnitude assigned to the other classes.
    pub fn beta(&self) -> f64 {
        match self.scheme {
            EncodingScheme::EqualAssignment => 1.0,
            EncodingScheme::Simplex => 1.0 / self.k as f64,
        }
    }

    pub fn c(&self, k: usize, i: usize) -> f64 {
        self.c[(k, i)]
    }

    pub fn class_vector(&self, k: usize) -> DVector<f64> {
        self.c.row(k).transpose()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }
}

/// Multiclass `ψ`, its gradient (a `K × n` matrix) and `ln` of the total loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassState {
    pub psi: f64,
    pub ln_loss_sum: f64,
    pub q: DMatrix<f64>,
}

fn check_formulation(loss: &Loss, enc: &MulticlassEncoding, formulation: Formulation) -> Result<()> {
    match formulation {
        Formulation::AdaBoostStyle if enc.scheme() != EncodingScheme::EqualAssignment => Err(
            Error::InvalidConfiguration("AdaBoost-style sum requires equal-assignment encoding".into()),
        ),
        Formulation::CrossEntropy if enc.scheme() != EncodingScheme::Simplex => Err(
            Error::InvalidConfiguration("cross-entropy requires simplex encoding".into()),
        ),
        Formulation::CrossEntropy if loss.kind() != LossKind::Logistic => Err(
            Error::InvalidConfiguration("cross-entropy requires the logistic loss".into()),
        ),
        _ => Ok(()),
    }
}

/// Multiclass generalized sum of a `K × n` matrix `Ξ`.
pub fn multiclass_generalized_sum(
    loss: &Loss,
    enc: &MulticlassEncoding,
    xi: &DMatrix<f64>,
    formulation: Formulation,
) -> Result<f64> {
    Ok(multiclass_state(loss, enc, xi, formulation)?.psi)
}

/// Gradient of the multiclass generalized sum with respect to `Ξ`.
pub fn multiclass_dual_map(
    loss: &Loss,
    enc: &MulticlassEncoding,
    xi: &DMatrix<f64>,
    formulation: Formulation,
) -> Result<DMatrix<f64>> {
    Ok(multiclass_state(loss, enc, xi, formulation)?.q)
}

pub fn multiclass_state(
    loss: &Loss,
    enc: &MulticlassEncoding,
    xi: &DMatrix<f64>,
    formulation: Formulation,
) -> Result<MulticlassState> {
    check_formulation(loss, enc, formulation)?;
    let (k, n) = (enc.num_classes(), enc.n());
    if xi.nrows() != k || xi.ncols() != n {
        return Err(Error::InvalidConfiguration(format!(
            "Ξ must be {k}×{n}, got {}×{}",
            xi.nrows(),
            xi.ncols()
        )));
    }
    match formulation {
        Formulation::AdaBoostStyle => {
            let sums: Vec<f64> = (0..n).map(|i| xi.column(i).sum()).collect();
            let s = dual_state(loss, &sums)?;
            let q = DMatrix::from_fn(k, n, |_, i| s.q[i]);
            Ok(MulticlassState {
                psi: s.psi,
                ln_loss_sum: s.ln_loss_sum,
                q,
            })
        }
        Formulation::CrossEntropy => {
            // a_{k,i} = c_y ξ_y − c_k ξ_k for k ≠ y; per-example loss ln(1 + Σ e^{a}).
            let mut ln_terms = Vec::with_capacity(n);
            let mut lse = Vec::with_capacity(n);
            let mut a = DMatrix::from_element(k, n, f64::NEG_INFINITY);
            for i in 0..n {
                let y = enc.labels()[i];
                let base = enc.c(y, i) * xi[(y, i)];
                for r in 0..k {
                    if r != y {
                        a[(r, i)] = base - enc.c(r, i) * xi[(r, i)];
                    }
                }
                let l = log_sum_exp(a.column(i).iter().copied());
                if l.is_nan() || l == f64::INFINITY {
                    return Err(Error::Overflow { index: i });
                }
                lse.push(l);
                ln_terms.push(ln_softplus(l));
            }
            let ln_sum = log_sum_exp(ln_terms.iter().copied());
            let psi = loss.inverse_ln(ln_sum);
            if !psi.is_finite() {
                return Err(Error::Overflow { index: argmax(&ln_terms) });
            }
            let ln_dpsi = loss.ln_deriv(psi);
            let mut q = DMatrix::zeros(k, n);
            for i in 0..n {
                let y = enc.labels()[i];
                // e^{a_k}/(1 + Σ e^{a}) in log form
                let denom = softplus(lse[i]);
                let mut total = 0.0;
                for r in 0..k {
                    if r != y {
                        let w = (a[(r, i)] - denom - ln_dpsi).exp();
                        q[(r, i)] = -enc.c(r, i) * w;
                        total += w;
                    }
                }
                q[(y, i)] = enc.c(y, i) * total;
            }
            Ok(MulticlassState {
                psi,
                ln_loss_sum: ln_sum,
                q,
            })
        }
    }
}
