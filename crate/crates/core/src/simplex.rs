//! Step 3: negativity cancellation (Smolin–Gambetta–Smith).
//!
//! Entries are visited in ascending order. An entry is deleted while it would
//! not stay positive after the accumulated deficit of the deleted entries is
//! shared evenly over the remaining ones (itself included). Survivors are then
//! shifted once by that shared deficit. The result is the Euclidean
//! projection onto the probability simplex.

use crate::error::{QremError, Result};
use crate::scalar::Real;

/// Default tolerance on `|Σx̂ − 1|` accepted by [`sgs_project`].
pub const DEFAULT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Projection<T> {
    /// Projected vector, same length and order as the input; deleted entries
    /// are exactly zero.
    pub values: Vec<T>,
    /// `Σ |min(x̂_i, 0)|` over the deleted entries.
    pub negative_mass_removed: T,
}

impl<T: Real> Projection<T> {
    pub fn support(&self) -> usize {
        self.values.iter().filter(|&&v| v > T::zero()).count()
    }
}

/// Closest probability vector to a unit-sum vector. Runs in O(N log N).
pub fn sgs_project<T: Real>(x: &[T], tolerance: T) -> Result<Projection<T>> {
    if x.is_empty() {
        return Err(QremError::Precondition("cannot project an empty vector".into()));
    }
    let sum: T = x.iter().copied().sum();
    if !sum.is_finite() || (sum - T::one()).abs() > tolerance {
        return Err(QremError::Precondition(format!(
            "element sum {sum} is not 1 within {tolerance}; apply a sum correction first"
        )));
    }
    project_with_mass(x, T::one())
}

/// Euclidean projection onto `{v ≥ 0, Σv = mass}`, using the same cascade.
pub fn project_with_mass<T: Real>(x: &[T], mass: T) -> Result<Projection<T>> {
    if x.is_empty() {
        return Err(QremError::Precondition("cannot project an empty vector".into()));
    }
    if !mass.is_finite() || mass <= T::zero() {
        return Err(QremError::DegenerateConstraint(format!(
            "target mass {mass} must be positive"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(QremError::Domain("non-finite entry in projection input".into()));
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a]
            .partial_cmp(&x[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b)));

    let total: T = x.iter().copied().sum();
    // Mass that has to leave the survivors: deleted entries plus any excess.
    let mut deficit = mass - total;
    let mut remaining = x.len();
    let mut deleted = 0;
    while deleted < order.len() {
        let v = x[order[deleted]];
        let share = deficit / T::from_usize_lossy(remaining);
        if v + share > T::zero() {
            break;
        }
        deficit = deficit + v;
        remaining -= 1;
        deleted += 1;
    }
    if remaining == 0 {
        return Err(QremError::DegenerateConstraint(
            "no entry survives the projection".into(),
        ));
    }

    let shift = deficit / T::from_usize_lossy(remaining);
    let mut values = vec![T::zero(); x.len()];
    let mut negative_mass_removed = T::zero();
    for (rank, &i) in order.iter().enumerate() {
        if rank < deleted {
            if x[i] < T::zero() {
                negative_mass_removed = negative_mass_removed - x[i];
            }
        } else {
            values[i] = x[i] + shift;
        }
    }
    Ok(Projection {
        values,
        negative_mass_removed,
    })
}
