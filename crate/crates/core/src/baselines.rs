//! Reference mitigators: exponential-cost inversion over the full state space,
//! and sequential per-block inversion with truncation.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::correction;
use crate::distributions::{BitString, SparseDistribution};
use crate::error::{QremError, Result};
use crate::mitigator::{error_bound, MitigationReport, StepTimings};
use crate::noise_model::TensorNoiseModel;
use crate::scalar::Real;
use crate::simplex;

/// Default cap on the intermediate support of [`mooney_mitigate`].
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 20;

/// `‖A⁻¹‖₁²` over the full space, the product of block inverse norms squared.
pub fn full_space_overhead<T: Real>(model: &TensorNoiseModel<T>) -> T {
    let norm = model
        .block_inverses()
        .iter()
        .map(|m| m.one_norm())
        .fold(T::one(), |a, b| a * b);
    norm * norm
}

/// Apply every block inverse to a dense `2^n` vector in place.
fn apply_dense_inverse<T: Real>(model: &TensorNoiseModel<T>, x: &mut [T]) {
    let n = model.width();
    for (block, inv) in model.blocks().iter().zip(model.block_inverses()) {
        let qubits = block.qubits();
        let dim = 1usize << qubits.len();
        let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << (n - 1 - q)).collect();
        let block_mask: usize = masks.iter().sum();
        // Offsets of each block state relative to a base index.
        let offsets: Vec<usize> = (0..dim)
            .map(|state| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| (state >> (qubits.len() - 1 - pos)) & 1 == 1)
                    .map(|(_, &m)| m)
                    .sum()
            })
            .collect();
        let mut gathered = vec![T::zero(); dim];
        for base in 0..x.len() {
            if base & block_mask != 0 {
                continue;
            }
            for (g, &off) in gathered.iter_mut().zip(&offsets) {
                *g = x[base + off];
            }
            for (row, &off) in offsets.iter().enumerate() {
                x[base + off] = (0..dim).map(|col| inv[(row, col)] * gathered[col]).sum();
            }
        }
    }
}

/// Invert the full calibration matrix exactly, then least-norm and SGS.
/// Cost is exponential in the qubit count; `qubit_cap` guards it.
pub fn rigorous_mitigate<T: Real>(
    y: &SparseDistribution<T>,
    model: &TensorNoiseModel<T>,
    qubit_cap: usize,
) -> Result<MitigationReport<T>> {
    let started = Instant::now();
    model.check_width(y.width())?;
    if y.is_empty() {
        return Err(QremError::EmptyDistribution);
    }
    let n = y.width();
    if n > qubit_cap || n >= usize::BITS as usize - 1 {
        return Err(QremError::SizeCap {
            what: "qubit count for rigorous inversion",
            size: n,
            cap: qubit_cap,
        });
    }
    let mut x = vec![T::zero(); 1usize << n];
    for (s, w) in y.iter() {
        let idx = s.to_index().expect("width checked against cap") as usize;
        x[idx] = w;
    }
    apply_dense_inverse(model, &mut x);
    let pre_correction_sum: T = x.iter().copied().sum();
    let t_inverse = started.elapsed();

    let t2 = Instant::now();
    let corrected = correction::least_norm(&x)?;
    let t_correction = t2.elapsed();

    let t3 = Instant::now();
    let projected = simplex::sgs_project(&corrected.corrected, T::lit(simplex::DEFAULT_SUM_TOLERANCE))?;
    let t_projection = t3.elapsed();

    let mitigated = SparseDistribution::from_weights(
        n,
        projected
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > T::zero())
            .map(|(i, &v)| (BitString::from_index(i as u64, n), v)),
        y.shots(),
    )?;
    let overhead = full_space_overhead(model);
    Ok(MitigationReport {
        mitigated,
        overhead,
        sigma: y.shots().map(|s| error_bound(overhead, s)).transpose()?,
        pre_correction_sum,
        corrected_sum: corrected.achieved_sum,
        negative_mass_removed: projected.negative_mass_removed,
        subspace_size: x.len(),
        method: "rigorous".into(),
        elapsed: StepTimings {
            inverse: t_inverse,
            correction: t_correction,
            projection: t_projection,
            total: started.elapsed(),
        },
    })
}

/// Sequential truncated inversion: apply each block inverse in ascending
/// lowest-qubit order, dropping entries with `|value| < threshold`
/// (probability units) after every block, then least-norm and SGS.
pub fn mooney_mitigate<T: Real>(
    y: &SparseDistribution<T>,
    model: &TensorNoiseModel<T>,
    threshold: T,
    support_cap: usize,
) -> Result<MitigationReport<T>> {
    let started = Instant::now();
    model.check_width(y.width())?;
    if y.is_empty() {
        return Err(QremError::EmptyDistribution);
    }
    if !(threshold >= T::zero() && threshold < T::one()) {
        return Err(QremError::Domain(format!(
            "truncation threshold {threshold} must lie in [0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..model.blocks().len()).collect();
    order.sort_by_key(|&b| model.blocks()[b].qubits().iter().min().copied());

    let mut current: BTreeMap<BitString, T> = y.iter().map(|(k, v)| (k.clone(), v)).collect();
    for b in order {
        let qubits = model.blocks()[b].qubits();
        let inv = &model.block_inverses()[b];
        let mut next: BTreeMap<BitString, T> = BTreeMap::new();
        for (s, &v) in &current {
            let col = s.block_index(qubits);
            for row in 0..inv.rows() {
                let coeff = inv[(row, col)];
                if coeff == T::zero() {
                    continue;
                }
                let mut t = s.clone();
                t.set_block(qubits, row);
                let e = next.entry(t).or_insert_with(T::zero);
                *e = *e + coeff * v;
            }
            if next.len() > support_cap {
                return Err(QremError::SizeCap {
                    what: "sequential-inversion support",
                    size: next.len(),
                    cap: support_cap,
                });
            }
        }
        next.retain(|_, v| v.abs() >= threshold && *v != T::zero());
        current = next;
    }
    if current.is_empty() {
        return Err(QremError::DegenerateConstraint(
            "truncation removed every entry".into(),
        ));
    }
    let (keys, x): (Vec<BitString>, Vec<T>) = current.into_iter().unzip();
    let pre_correction_sum: T = x.iter().copied().sum();
    let t_inverse = started.elapsed();

    let t2 = Instant::now();
    let corrected = correction::least_norm(&x)?;
    let t_correction = t2.elapsed();

    let t3 = Instant::now();
    let projected = simplex::sgs_project(&corrected.corrected, T::lit(simplex::DEFAULT_SUM_TOLERANCE))?;
    let t_projection = t3.elapsed();

    let subspace_size = keys.len();
    let mitigated = SparseDistribution::from_weights(
        y.width(),
        keys.into_iter()
            .zip(projected.values)
            .filter(|(_, v)| *v > T::zero()),
        y.shots(),
    )?;
    let overhead = full_space_overhead(model);
    Ok(MitigationReport {
        mitigated,
        overhead,
        sigma: y.shots().map(|s| error_bound(overhead, s)).transpose()?,
        pre_correction_sum,
        corrected_sum: corrected.achieved_sum,
        negative_mass_removed: projected.negative_mass_removed,
        subspace_size,
        method: format!("mooney:{threshold}"),
        elapsed: StepTimings {
            inverse: t_inverse,
            correction: t_correction,
            projection: t_projection,
            total: started.elapsed(),
        },
    })
}
