//! Step 2: shift the roughly mitigated vector so its element sum becomes one.
//!
//! `delta` methods minimise `‖AΔ‖²` in a span of right singular vectors of the
//! calibration matrix, restricted afterwards to the subspace, so the achieved
//! sum can drift from one. `least_norm` adds the uniform shift that hits the
//! unit sum exactly.

use std::fmt;
use std::str::FromStr;

use crate::distributions::BitString;
use crate::error::{QremError, Result};
use crate::noise_model::TensorNoiseModel;
use crate::scalar::Real;

/// Sum-correction method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Correction {
    /// Leading singular direction only.
    Delta,
    /// Lagrange solution over the `k` directions with the largest `|1ᵀv|`.
    DeltaExact(usize),
    LeastNorm,
}

impl Correction {
    /// Whether the method lands on `Σx̂ = 1`.
    pub fn targets_unit_sum(self) -> bool {
        matches!(self, Correction::LeastNorm)
    }

    pub fn tag(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correction::Delta => f.write_str("delta"),
            Correction::DeltaExact(k) => write!(f, "delta-exact:{k}"),
            Correction::LeastNorm => f.write_str("least-norm"),
        }
    }
}

impl FromStr for Correction {
    type Err = QremError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Correction::Delta),
            "least-norm" | "least_norm" => Ok(Correction::LeastNorm),
            "delta-exact" => Ok(Correction::DeltaExact(1)),
            _ => {
                let k = s
                    .strip_prefix("delta-exact:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| QremError::Parse(format!("unknown correction {s:?}")))?;
                Ok(Correction::DeltaExact(k))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionResult<T> {
    pub corrected: Vec<T>,
    /// `‖Δ_S‖₂`
    pub correction_norm: T,
    pub achieved_sum: T,
}

impl<T: Real> CorrectionResult<T> {
    fn from_delta(x: &[T], delta: &[T]) -> Self {
        let corrected: Vec<T> = x.iter().zip(delta).map(|(&a, &d)| a + d).collect();
        let achieved_sum = corrected.iter().copied().sum();
        let correction_norm = delta.iter().map(|&d| d * d).sum::<T>().sqrt();
        Self {
            corrected,
            correction_norm,
            achieved_sum,
        }
    }
}

/// Dispatch on `method`.
pub fn apply<T: Real>(
    method: Correction,
    x: &[T],
    subspace: &[BitString],
    model: &TensorNoiseModel<T>,
) -> Result<CorrectionResult<T>> {
    match method {
        Correction::LeastNorm => least_norm(x),
        Correction::Delta => delta_approx(x, subspace, model),
        Correction::DeltaExact(k) => delta_exact(x, subspace, model, k),
    }
}

/// `x̂ = x + ((1 − 1ᵀx)/|S|)·1`, the minimum-norm shift onto `1ᵀx̂ = 1`.
pub fn least_norm<T: Real>(x: &[T]) -> Result<CorrectionResult<T>> {
    if x.is_empty() {
        return Err(QremError::Precondition("least-norm needs |S| >= 1".into()));
    }
    let deficit = T::one() - x.iter().copied().sum::<T>();
    let shift = deficit / T::from_usize_lossy(x.len());
    let delta = vec![shift; x.len()];
    Ok(CorrectionResult::from_delta(x, &delta))
}

fn check_lengths<T: Real>(x: &[T], subspace: &[BitString], model: &TensorNoiseModel<T>) -> Result<()> {
    if x.len() != subspace.len() {
        return Err(QremError::Precondition(format!(
            "vector has {} entries but subspace has {}",
            x.len(),
            subspace.len()
        )));
    }
    for s in subspace {
        model.check_width(s.width())?;
    }
    Ok(())
}

/// Approximate delta correction `Δ'_S = Δ'_0 · (v_0)_S` with
/// `Δ'_0 = (1 − 1ᵀx_S) / 1ᵀv_0`, where `v_0` is the leading tensor singular
/// direction.
pub fn delta_approx<T: Real>(
    x: &[T],
    subspace: &[BitString],
    model: &TensorNoiseModel<T>,
) -> Result<CorrectionResult<T>> {
    check_lengths(x, subspace, model)?;
    let cache = model.svd_cache();
    let lead = cache.leading();
    let colsum = cache.colsum(&lead);
    if colsum == T::zero() {
        return Err(QremError::DegenerateConstraint(
            "leading singular vector has zero column sum".into(),
        ));
    }
    let deficit = T::one() - x.iter().copied().sum::<T>();
    let coeff = deficit / colsum;
    let delta: Vec<T> = subspace
        .iter()
        .map(|s| coeff * cache.vector_entry(&lead, &model.sub_indices(s)))
        .collect();
    Ok(CorrectionResult::from_delta(x, &delta))
}

/// Lagrange solution of `min Σ σ_i² Δ_i²` subject to
/// `Σ (1ᵀv_i) Δ_i = 1 − 1ᵀx` over the `k` tensor directions with the largest
/// `|1ᵀv_i|`, restricted to the subspace. Cost O(n·|S|·k).
pub fn delta_exact<T: Real>(
    x: &[T],
    subspace: &[BitString],
    model: &TensorNoiseModel<T>,
    k: usize,
) -> Result<CorrectionResult<T>> {
    check_lengths(x, subspace, model)?;
    if k == 0 {
        return Err(QremError::Domain("delta-exact needs k >= 1".into()));
    }
    if model.width() < usize::BITS as usize && k > 1usize << model.width() {
        return Err(QremError::Domain(format!(
            "k = {k} exceeds the 2^{} singular directions",
            model.width()
        )));
    }
    let cache = model.svd_cache();
    let coeffs = delta_coefficients(x.iter().copied().sum(), model, k)?;
    let delta: Vec<T> = subspace
        .iter()
        .map(|s| {
            let sub = model.sub_indices(s);
            coeffs
                .iter()
                .filter(|(_, c)| *c != T::zero())
                .map(|(d, c)| *c * cache.vector_entry(d, &sub))
                .sum()
        })
        .collect();
    Ok(CorrectionResult::from_delta(x, &delta))
}

/// Coefficients `Δ_i` of [`delta_exact`] together with their directions.
pub fn delta_coefficients<T: Real>(
    x_sum: T,
    model: &TensorNoiseModel<T>,
    k: usize,
) -> Result<Vec<(Vec<usize>, T)>> {
    let cache = model.svd_cache();
    let directions = cache.top_directions(k);
    let denom: T = directions
        .iter()
        .map(|d| {
            let (c, s) = (cache.colsum(d), cache.sigma(d));
            c * c / (s * s)
        })
        .sum();
    if denom == T::zero() {
        return Err(QremError::DegenerateConstraint(
            "every selected singular direction has zero column sum".into(),
        ));
    }
    let deficit = T::one() - x_sum;
    Ok(directions
        .into_iter()
        .map(|d| {
            let (c, s) = (cache.colsum(&d), cache.sigma(&d));
            let coeff = deficit / denom * c / (s * s);
            (d, coeff)
        })
        .collect())
}
