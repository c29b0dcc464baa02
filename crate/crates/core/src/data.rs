//! Seeded data ensembles: anisotropic sub-Gaussian designs, exactly orthogonal
//! designs, prescribed diagonal Grams, plus effective dimensions and label helpers.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{EncodingScheme, MulticlassEncoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryDist {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Ensemble {
    /// `v` is the sub-Gaussian proxy of the entries (1 for both supported laws).
    SubGaussian { entry: EntryDist, v: f64 },
    Orthogonal { alpha: f64 },
    DiagonalGram { dvec: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Labels {
    /// Entries in `{-1, +1}`.
    Binary { y: Vec<f64> },
    /// 0-based class indices below `k`.
    Multiclass { classes: Vec<usize>, k: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Binary { y } => y.len(),
            Labels::Multiclass { classes, .. } => classes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × d`, one example per row.
    pub x: DMatrix<f64>,
    pub labels: Labels,
    pub lambda: Option<Vec<f64>>,
    pub ensemble: Ensemble,
    pub seed: u64,
    /// Global factor applied to the raw rows.
    pub rescale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDims {
    pub d2: f64,
    pub d_inf: f64,
}

/// Deterministic per-trial seed derived from a base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Fill row by row so the stream order does not depend on storage layout.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = r.sample(StandardNormal);
        }
    }
    m
}

fn random_signs(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// `n` i.i.d. uniform labels in `{-1, +1}`.
pub fn random_binary_labels(n: usize, seed: u64) -> Labels {
    Labels::Binary { y: random_signs(&mut rng(seed), n) }
}

/// Shuffled labels with class sizes differing by at most one; needs `n ≥ k`.
pub fn balanced_multiclass_labels(n: usize, k: usize, seed: u64) -> Result<Labels> {
    if k < 2 {
        return Err(Error::InvalidConfiguration(format!("multiclass labels need K >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidDataset(format!("{n} examples cannot cover {k} classes")));
    }
    let mut classes: Vec<usize> = (0..n).map(|i| i % k).collect();
    classes.shuffle(&mut rng(seed));
    Ok(Labels::Multiclass { classes, k })
}

/// Power-law spectrum `λⱼ = j^{-exponent}` for `j = 1..d`.
pub fn power_law_spectrum(d: usize, exponent: f64) -> Vec<f64> {
    (1..=d).map(|j| (j as f64).powf(-exponent)).collect()
}

fn check_spectrum(lambda: &[f64]) -> Result<()> {
    if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter("spectrum entries must be finite and nonnegative".into()));
    }
    if lambda.iter().all(|&l| l == 0.0) {
        return Err(Error::InvalidParameter("spectrum is identically zero".into()));
    }
    Ok(())
}

/// Rows `xᵢ = diag(λ)^{1/2} zᵢ` with i.i.d. unit-variance entries, globally
/// rescaled so the largest row norm is exactly 1. Labels are uniform ±1.
pub fn gen_subgaussian(n: usize, d: usize, lambda: &[f64], entry: EntryDist, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!("need n, d >= 1, got n={n}, d={d}")));
    }
    if lambda.len() != d {
        return Err(Error::InvalidParameter(format!(
            "spectrum has length {}, expected d = {d}",
            lambda.len()
        )));
    }
    check_spectrum(lambda)?;
    if n > d {
        log::warn!("n = {n} exceeds d = {d}; the Gram matrix will be singular");
    }
    let mut r = rng(seed);
    let mut x = match entry {
        EntryDist::Gaussian => gaussian_matrix(&mut r, n, d),
        EntryDist::Rademacher => {
            let mut m = DMatrix::zeros(n, d);
            for i in 0..n {
                for j in 0..d {
                    m[(i, j)] = if r.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            m
        }
    };
    for (j, &l) in lambda.iter().enumerate() {
        let s = l.sqrt();
        x.column_mut(j).scale_mut(s);
    }
    let max_norm = max_row_norm(&x);
    if max_norm == 0.0 {
        return Err(Error::DegenerateData("all generated rows are zero".into()));
    }
    let rescale = 1.0 / max_norm;
    x.scale_mut(rescale);
    let y = random_signs(&mut r, n);
    Ok(Dataset {
        x,
        labels: Labels::Binary { y },
        lambda: Some(lambda.to_vec()),
        ensemble: Ensemble::SubGaussian { entry, v: 1.0 },
        seed,
        rescale,
    })
}

/// `n × d` matrix with orthonormal rows from a QR factorization of a Gaussian matrix.
fn orthonormal_rows(r: &mut ChaCha8Rng, n: usize, d: usize) -> Result<DMatrix<f64>> {
    let g = gaussian_matrix(r, n, d).transpose();
    let qr = g.qr();
    let rdiag = qr.r().diagonal();
    let scale = rdiag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if rdiag.iter().any(|v| v.abs() <= 1e-10 * scale) {
        return Err(Error::DegenerateData("random matrix is rank deficient".into()));
    }
    Ok(qr.q().transpose())
}

/// Rows of norm `√α` that are mutually orthogonal, so `XXᵀ = αI`. Labels are uniform ±1.
pub fn gen_orthogonal(n: usize, d: usize, alpha: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || d < n {
        return Err(Error::InvalidParameter(format!("orthogonal design needs 1 <= n <= d, got n={n}, d={d}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if alpha > 1.0 {
        return Err(Error::Normalization(format!("row norm sqrt({alpha}) exceeds 1")));
    }
    let mut r = rng(seed);
    let mut x = orthonormal_rows(&mut r, n, d)?;
    x.scale_mut(alpha.sqrt());
    let y = random_signs(&mut r, n);
    Ok(Dataset {
        x,
        labels: Labels::Binary { y },
        lambda: None,
        ensemble: Ensemble::Orthogonal { alpha },
        seed,
        rescale: 1.0,
    })
}

/// Orthogonal rows with `‖xᵢ‖² = dᵢ`, so `XXᵀ = diag(dvec)`. Labels are uniform ±1.
pub fn gen_diagonal_gram(n: usize, d: usize, dvec: &[f64], seed: u64) -> Result<Dataset> {
    if n == 0 || d < n {
        return Err(Error::InvalidParameter(format!("diagonal Gram needs 1 <= n <= d, got n={n}, d={d}")));
    }
    if dvec.len() != n {
        return Err(Error::InvalidParameter(format!("dvec has length {}, expected {n}", dvec.len())));
    }
    if let Some(bad) = dvec.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::InvalidParameter(format!("diagonal entries must lie in (0, 1], got {bad}")));
    }
    let mut r = rng(seed);
    let mut x = orthonormal_rows(&mut r, n, d)?;
    for (i, &v) in dvec.iter().enumerate() {
        x.row_mut(i).scale_mut(v.sqrt());
    }
    let y = random_signs(&mut r, n);
    Ok(Dataset {
        x,
        labels: Labels::Binary { y },
        lambda: None,
        ensemble: Ensemble::DiagonalGram { dvec: dvec.to_vec() },
        seed,
        rescale: 1.0,
    })
}

/// `d₂ = ‖λ‖₁²/‖λ‖₂²` and `d∞ = ‖λ‖₁/‖λ‖∞`.
pub fn effective_dims(lambda: &[f64]) -> Result<EffectiveDims> {
    check_spectrum(lambda)?;
    let l1: f64 = lambda.iter().sum();
    let l2sq: f64 = lambda.iter().map(|v| v * v).sum();
    let linf = lambda.iter().fold(0.0f64, |a, &v| a.max(v));
    Ok(EffectiveDims {
        d2: l1 * l1 / l2sq,
        d_inf: l1 / linf,
    })
}

/// Multiclass encoding that additionally requires every class to be present.
pub fn encode_multiclass(labels: &[usize], scheme: EncodingScheme, k: usize) -> Result<MulticlassEncoding> {
    let enc = MulticlassEncoding::new(labels, scheme, k)?;
    for class in 0..k {
        if !labels.contains(&class) {
            return Err(Error::InvalidDataset(format!("class {class} has no examples")));
        }
    }
    Ok(enc)
}

pub fn max_row_norm(x: &DMatrix<f64>) -> f64 {
    x.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        &self.x * self.x.transpose()
    }

    pub fn max_row_norm(&self) -> f64 {
        max_row_norm(&self.x)
    }

    pub fn binary_labels(&self) -> Option<DVector<f64>> {
        match &self.labels {
            Labels::Binary { y } => Some(DVector::from_column_slice(y)),
            Labels::Multiclass { .. } => None,
        }
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} examples",
                labels.len(),
                self.n()
            )));
        }
        match &labels {
            Labels::Binary { y } if y.iter().any(|&v| v != 1.0 && v != -1.0) => {
                return Err(Error::InvalidDataset("binary labels must be +1 or -1".into()))
            }
            Labels::Multiclass { classes, k } => {
                encode_multiclass(classes, EncodingScheme::EqualAssignment, *k)?;
            }
            _ => {}
        }
        self.labels = labels;
        Ok(self)
    }

    /// Globally rescales so that the largest row norm equals `bound`.
    pub fn with_max_row_norm(mut self, bound: f64) -> Result<Self> {
        let current = self.max_row_norm();
        if !(bound > 0.0) || current == 0.0 {
            return Err(Error::InvalidParameter(format!("cannot rescale rows to norm {bound}")));
        }
        let s = bound / current;
        self.x.scale_mut(s);
        self.rescale *= s;
        Ok(self)
    }
}
