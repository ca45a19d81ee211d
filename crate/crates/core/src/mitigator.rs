//! Step 1 of the pipeline: restrict the exact tensor inverse to the measured
//! subspace, either as an explicit matrix or applied matrix-free, plus the
//! exact overhead and the full three-step `mitigate` driver.
//!
//! Every element is a product of block-inverse entries. Consecutive blocks are
//! grouped into chunks of at most [`CHUNK_QUBITS`] qubits whose Kronecker
//! products are tabulated once, so an element costs one lookup per chunk
//! instead of one per qubit. Each subspace element stores its chunk codes
//! (the reduction table).

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::correction::{self, Correction, CorrectionResult};
use crate::distributions::{BitString, SparseDistribution};
use crate::error::{QremError, Result};
use crate::linalg::Matrix;
use crate::noise_model::TensorNoiseModel;
use crate::scalar::Real;
use crate::simplex;

/// Hard cap on |S|.
pub const SUBSPACE_HARD_CAP: usize = 1 << 20;
/// Cap on |S|² for the explicit reduced inverse.
pub const EXPLICIT_ENTRY_CAP: usize = 1 << 30;
/// Qubits per tabulated chunk of block inverses.
pub const CHUNK_QUBITS: usize = 8;
/// Fixed number of row bands used to accumulate column norms matrix-free.
/// Independent of the thread count, which keeps results bit-reproducible.
const NORM_BANDS: usize = 64;

/// Tabulated products of block inverses over a subspace.
pub(crate) struct ProductKernel<T> {
    /// Row-major `dim x dim` Kronecker product of the chunk's block inverses.
    tables: Vec<(usize, Vec<T>)>,
    /// `codes[c][s]`: state of chunk `c` for subspace element `s`.
    codes: Vec<Vec<u16>>,
    len: usize,
}

impl<T: Real> ProductKernel<T> {
    pub(crate) fn new(model: &TensorNoiseModel<T>, subspace: &[BitString]) -> Result<Self> {
        for s in subspace {
            model.check_width(s.width())?;
        }
        let blocks = model.blocks();
        let inverses = model.block_inverses();

        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut bits = 0usize;
        for (b, block) in blocks.iter().enumerate() {
            let k = block.qubits().len();
            match groups.last_mut() {
                Some(g) if bits + k <= CHUNK_QUBITS => {
                    g.push(b);
                    bits += k;
                }
                _ => {
                    groups.push(vec![b]);
                    bits = k;
                }
            }
        }

        let mut tables = Vec::with_capacity(groups.len());
        let mut codes = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut table = Matrix::identity(1);
            for &b in g {
                table = table.kron(&inverses[b]);
            }
            let chunk_codes: Vec<u16> = subspace
                .iter()
                .map(|s| {
                    g.iter().fold(0usize, |acc, &b| {
                        (acc << blocks[b].qubits().len()) | s.block_index(blocks[b].qubits())
                    }) as u16
                })
                .collect();
            tables.push((table.rows(), table.as_slice().to_vec()));
            codes.push(chunk_codes);
        }
        Ok(Self {
            tables,
            codes,
            len: subspace.len(),
        })
    }

    /// Fill `out[j] = (A⁻¹)_{S[row], S[j]}`.
    pub(crate) fn fill_row(&self, row: usize, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.len);
        out.fill(T::one());
        for ((dim, table), codes) in self.tables.iter().zip(&self.codes) {
            let base = codes[row] as usize * dim;
            let row_table = &table[base..base + dim];
            for (o, &c) in out.iter_mut().zip(codes.iter()) {
                *o = *o * row_table[c as usize];
            }
        }
    }
}

/// `(A⁻¹)` restricted to rows and columns in `subspace`.
#[derive(Clone, Debug)]
pub struct ReducedInverse<T: Real = f64> {
    subspace: Vec<BitString>,
    matrix: Matrix<T>,
    one_norm: T,
}

impl<T: Real> ReducedInverse<T> {
    pub fn subspace(&self) -> &[BitString] {
        &self.subspace
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> T {
        self.one_norm
    }

    pub fn apply(&self, y: &[T]) -> Vec<T> {
        self.matrix.matvec(y)
    }
}

fn check_subspace_size(len: usize, cap: usize) -> Result<()> {
    if len == 0 {
        return Err(QremError::EmptyDistribution);
    }
    let cap = cap.min(SUBSPACE_HARD_CAP);
    if len > cap {
        return Err(QremError::SizeCap {
            what: "subspace size",
            size: len,
            cap,
        });
    }
    Ok(())
}

/// Build the explicit reduced inverse over `subspace` (kept in the given
/// order). Rows are computed independently and in parallel.
pub fn reduced_inverse<T: Real>(
    model: &TensorNoiseModel<T>,
    subspace: &[BitString],
) -> Result<ReducedInverse<T>> {
    let len = subspace.len();
    check_subspace_size(len, SUBSPACE_HARD_CAP)?;
    if len.saturating_mul(len) > EXPLICIT_ENTRY_CAP {
        return Err(QremError::SizeCap {
            what: "explicit reduced-inverse entry count",
            size: len.saturating_mul(len),
            cap: EXPLICIT_ENTRY_CAP,
        });
    }
    let kernel = ProductKernel::new(model, subspace)?;
    let mut matrix = Matrix::zeros(len, len);
    matrix
        .as_mut_slice()
        .par_chunks_mut(len)
        .enumerate()
        .for_each(|(i, row)| kernel.fill_row(i, row));
    let one_norm = matrix.one_norm();
    Ok(ReducedInverse {
        subspace: subspace.to_vec(),
        matrix,
        one_norm,
    })
}

/// Roughly mitigated vector over `y`'s subspace (canonical order) without
/// storing the reduced inverse.
pub fn apply_inverse_matrix_free<T: Real>(
    model: &TensorNoiseModel<T>,
    y: &SparseDistribution<T>,
) -> Result<Vec<T>> {
    model.check_width(y.width())?;
    let subspace = y.subspace();
    check_subspace_size(subspace.len(), SUBSPACE_HARD_CAP)?;
    let kernel = ProductKernel::new(model, &subspace)?;
    Ok(matrix_free_pass(&kernel, &y.weights(), false).0)
}

/// One pass over the rows of the reduced inverse computing `x = R y` and,
/// when asked, the exact 1-norm of `R`. Memory is O(|S|).
fn matrix_free_pass<T: Real>(kernel: &ProductKernel<T>, y: &[T], with_norm: bool) -> (Vec<T>, T) {
    let len = y.len();
    let bands = NORM_BANDS.min(len);
    let band_len = len.div_ceil(bands);
    let per_band: Vec<(Vec<T>, Vec<T>)> = (0..bands)
        .into_par_iter()
        .map(|b| {
            let start = b * band_len;
            let end = (start + band_len).min(len);
            let mut row = vec![T::zero(); len];
            let mut xs = Vec::with_capacity(end.saturating_sub(start));
            let mut colsum = if with_norm { vec![T::zero(); len] } else { Vec::new() };
            for i in start..end {
                kernel.fill_row(i, &mut row);
                xs.push(row.iter().zip(y).map(|(&r, &v)| r * v).sum());
                if with_norm {
                    for (c, &r) in colsum.iter_mut().zip(&row) {
                        *c = *c + r.abs();
                    }
                }
            }
            (xs, colsum)
        })
        .collect();

    let mut x = Vec::with_capacity(len);
    let mut colsum = vec![T::zero(); if with_norm { len } else { 0 }];
    for (xs, band_cols) in per_band {
        x.extend(xs);
        for (c, b) in colsum.iter_mut().zip(band_cols) {
            *c = *c + b;
        }
    }
    let norm = colsum.into_iter().fold(T::zero(), T::max);
    (x, norm)
}

/// Union of Hamming balls of radius `radius` around the elements of `subspace`,
/// deduplicated and canonically ordered.
pub fn extend_subspace(subspace: &[BitString], radius: usize, cap: usize) -> Result<Vec<BitString>> {
    let mut out: std::collections::BTreeSet<BitString> = subspace.iter().cloned().collect();
    if radius > 0 {
        let check = |len: usize| -> Result<()> {
            if len > cap {
                return Err(QremError::SizeCap {
                    what: "extended subspace size",
                    size: len,
                    cap,
                });
            }
            Ok(())
        };
        for s in subspace {
            let width = s.width();
            let radius = radius.min(width);
            // Enumerate flip sets as increasing index combinations.
            for flips in 1..=radius {
                let mut idx: Vec<usize> = (0..flips).collect();
                loop {
                    let mut t = s.clone();
                    for &q in &idx {
                        t.flip(q);
                    }
                    out.insert(t);
                    check(out.len())?;
                    // Next combination.
                    let mut pos = flips;
                    while pos > 0 && idx[pos - 1] == width - flips + pos - 1 {
                        pos -= 1;
                    }
                    if pos == 0 {
                        break;
                    }
                    idx[pos - 1] += 1;
                    for p in pos..flips {
                        idx[p] = idx[p - 1] + 1;
                    }
                }
            }
        }
    }
    check_subspace_size(out.len(), cap)?;
    Ok(out.into_iter().collect())
}

/// Mitigation overhead `M = ‖(A⁻¹)_S‖₁²`.
pub fn mitigation_overhead<T: Real>(r: &ReducedInverse<T>) -> T {
    r.one_norm * r.one_norm
}

/// Upper bound `sqrt(M / s)` on the standard deviation of a bounded
/// observable.
pub fn error_bound<T: Real>(overhead: T, shots: u64) -> Result<T> {
    if shots == 0 {
        return Err(QremError::Domain("shot count must be at least 1".into()));
    }
    if !overhead.is_finite() || overhead < T::zero() {
        return Err(QremError::Domain(format!("invalid overhead {overhead}")));
    }
    Ok((overhead / T::lit(shots as f64)).sqrt())
}

#[derive(Clone, Debug)]
pub struct MitigateOptions {
    pub correction: Correction,
    /// Hamming radius used to extend the measured subspace; 0 keeps it.
    pub hamming_radius: usize,
    pub matrix_free: bool,
    pub subspace_cap: usize,
    /// Allowed `|Σx̂ − 1|` entering the simplex projection.
    pub sum_tolerance: f64,
}

impl Default for MitigateOptions {
    fn default() -> Self {
        Self {
            correction: Correction::LeastNorm,
            hamming_radius: 0,
            matrix_free: false,
            subspace_cap: SUBSPACE_HARD_CAP,
            sum_tolerance: simplex::DEFAULT_SUM_TOLERANCE,
        }
    }
}

impl MitigateOptions {
    pub fn with_correction(mut self, correction: Correction) -> Self {
        self.correction = correction;
        self
    }

    pub fn matrix_free(mut self, on: bool) -> Self {
        self.matrix_free = on;
        self
    }

    pub fn with_radius(mut self, radius: usize) -> Self {
        self.hamming_radius = radius;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepTimings {
    pub inverse: Duration,
    pub correction: Duration,
    pub projection: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug)]
pub struct MitigationReport<T: Real = f64> {
    pub mitigated: SparseDistribution<T>,
    /// Mitigation overhead M.
    pub overhead: T,
    /// `sqrt(M / shots)`; `None` when the input carries no shot count.
    pub sigma: Option<T>,
    /// Element sum after Step 1.
    pub pre_correction_sum: T,
    /// Element sum after Step 2.
    pub corrected_sum: T,
    pub negative_mass_removed: T,
    pub subspace_size: usize,
    pub method: String,
    pub elapsed: StepTimings,
}

impl<T: Real> MitigationReport<T> {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "qrem.mitigation-report/v1",
            "method": self.method,
            "width": self.mitigated.width(),
            "shots": self.mitigated.shots(),
            "subspace_size": self.subspace_size,
            "overhead": self.overhead.as_f64(),
            "sigma": self.sigma.map(Real::as_f64),
            "pre_correction_sum": self.pre_correction_sum.as_f64(),
            "corrected_sum": self.corrected_sum.as_f64(),
            "negative_mass_removed": self.negative_mass_removed.as_f64(),
            "timings_s": {
                "inverse": self.elapsed.inverse.as_secs_f64(),
                "correction": self.elapsed.correction.as_secs_f64(),
                "projection": self.elapsed.projection.as_secs_f64(),
                "total": self.elapsed.total.as_secs_f64(),
            },
        })
    }
}

/// Run the three-step pipeline: reduced inverse, sum correction, simplex
/// projection.
pub fn mitigate<T: Real>(
    y: &SparseDistribution<T>,
    model: &TensorNoiseModel<T>,
    options: &MitigateOptions,
) -> Result<MitigationReport<T>> {
    let started = Instant::now();
    model.check_width(y.width())?;
    if y.is_empty() {
        return Err(QremError::EmptyDistribution);
    }
    let measured = y.subspace();
    let subspace = if options.hamming_radius > 0 {
        extend_subspace(&measured, options.hamming_radius, options.subspace_cap)?
    } else {
        check_subspace_size(measured.len(), options.subspace_cap)?;
        measured
    };
    let y_vec: Vec<T> = subspace.iter().map(|s| y.get(s)).collect();

    // Step 1
    let (x, one_norm) = if options.matrix_free {
        let kernel = ProductKernel::new(model, &subspace)?;
        matrix_free_pass(&kernel, &y_vec, true)
    } else {
        let r = reduced_inverse(model, &subspace)?;
        (r.apply(&y_vec), r.one_norm)
    };
    let overhead = one_norm * one_norm;
    let t_inverse = started.elapsed();

    // Step 2
    let t2 = Instant::now();
    let pre_correction_sum: T = x.iter().copied().sum();
    let CorrectionResult {
        corrected,
        achieved_sum,
        ..
    } = correction::apply(options.correction, &x, &subspace, model)?;
    let t_correction = t2.elapsed();

    // Step 3
    let t3 = Instant::now();
    let projected = if options.correction.targets_unit_sum() {
        simplex::sgs_project(&corrected, T::lit(options.sum_tolerance))?
    } else {
        // The delta corrections do not reach a unit sum; keep their mass.
        simplex::project_with_mass(&corrected, achieved_sum)?
    };
    let t_projection = t3.elapsed();

    let mitigated = SparseDistribution::from_weights(
        y.width(),
        subspace
            .into_iter()
            .zip(projected.values)
            .filter(|(_, v)| *v > T::zero()),
        y.shots(),
    )?;
    let sigma = y.shots().map(|s| error_bound(overhead, s)).transpose()?;
    Ok(MitigationReport {
        mitigated,
        overhead,
        sigma,
        pre_correction_sum,
        corrected_sum: achieved_sum,
        negative_mass_removed: projected.negative_mass_removed,
        subspace_size: y_vec.len(),
        method: options.correction.tag(),
        elapsed: StepTimings {
            inverse: t_inverse,
            correction: t_correction,
            projection: t_projection,
            total: started.elapsed(),
        },
    })
}
