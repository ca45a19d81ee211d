//! Tensor-product readout noise: per-block calibration matrices, their
//! inverses, and the per-block SVD factors used by the delta correction.
//!
//! Block-state indexing: inside a block the first listed qubit is the most
//! significant bit. Matrix entry `(i, j)` is the probability of reading block
//! state `i` after preparing block state `j`, so every column sums to one.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::BitString;
use crate::error::{QremError, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;

/// Largest supported calibration block, in qubits.
pub const MAX_BLOCK_QUBITS: usize = 6;

/// Default cap on the qubit count for anything that materializes `2^n` states.
pub const DEFAULT_FULL_QUBIT_CAP: usize = 14;

const STOCHASTIC_TOL: f64 = 1e-9;
const DET_TOL: f64 = 1e-12;
const LOAD_RENORMALIZE_WARN: f64 = 1e-6;

/// Calibration matrix of one block of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalCalibration<T: Real = f64> {
    qubits: Vec<usize>,
    matrix: Matrix<T>,
}

impl<T: Real> LocalCalibration<T> {
    pub fn new(qubits: Vec<usize>, matrix: Matrix<T>) -> Result<Self> {
        let k = qubits.len();
        if k == 0 || k > MAX_BLOCK_QUBITS {
            return Err(QremError::InvalidModel(format!(
                "block size {k} outside 1..={MAX_BLOCK_QUBITS}"
            )));
        }
        let dim = 1usize << k;
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(QremError::InvalidModel(format!(
                "block on qubits {qubits:?} needs a {dim}x{dim} matrix, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let mut seen = HashSet::new();
        if !qubits.iter().all(|q| seen.insert(*q)) {
            return Err(QremError::InvalidModel(format!(
                "block lists a qubit twice: {qubits:?}"
            )));
        }
        let tol = T::lit(STOCHASTIC_TOL).max(T::epsilon() * T::lit(64.0));
        for &v in matrix.as_slice() {
            if !v.is_finite() || v < -tol || v > T::one() + tol {
                return Err(QremError::InvalidModel(format!(
                    "calibration entry {v} outside [0, 1] on qubits {qubits:?}"
                )));
            }
        }
        for (j, s) in matrix.column_sums().into_iter().enumerate() {
            if (s - T::one()).abs() > tol {
                return Err(QremError::InvalidModel(format!(
                    "column {j} of block {qubits:?} sums to {s}, not 1"
                )));
            }
        }
        Ok(Self { qubits, matrix })
    }

    /// Build from raw calibration tallies (column `j` = outcomes observed
    /// after preparing block state `j`), normalizing every column.
    pub fn from_measured(qubits: Vec<usize>, tallies: Matrix<T>) -> Result<Self> {
        let sums = tallies.column_sums();
        let mut m = tallies;
        let mut worst = T::zero();
        for (j, &s) in sums.iter().enumerate() {
            if s <= T::zero() {
                return Err(QremError::InvalidModel(format!(
                    "calibration column {j} of block {qubits:?} is empty"
                )));
            }
            worst = worst.max((s - T::one()).abs());
            for i in 0..m.rows() {
                m[(i, j)] = m[(i, j)] / s;
            }
        }
        if worst.as_f64() > LOAD_RENORMALIZE_WARN {
            log::warn!(
                "calibration block {qubits:?}: columns renormalized (max deviation {worst})"
            );
        }
        Self::new(qubits, m)
    }

    /// Single-qubit block `[[1-p10, p01], [p10, 1-p01]]`.
    pub fn single_qubit(qubit: usize, p01: T, p10: T) -> Result<Self> {
        let half = T::lit(0.5);
        for (name, p) in [("p01", p01), ("p10", p10)] {
            if !(p >= T::zero() && p < half) {
                return Err(QremError::Domain(format!(
                    "{name} = {p} must lie in [0, 0.5)"
                )));
            }
        }
        let m = Matrix::from_vec(
            2,
            2,
            vec![T::one() - p10, p01, p10, T::one() - p01],
        );
        Self::new(vec![qubit], m)
    }

    #[inline]
    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        let singular = |det: f64| QremError::NonInvertible {
            qubits: self.qubits.clone(),
            det,
        };
        let (inv, det) = linalg::invert(&self.matrix).ok_or_else(|| singular(0.0))?;
        if det.abs().as_f64() <= DET_TOL || inv.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(singular(det.as_f64()));
        }
        Ok(inv)
    }
}

/// SVD factors of one block, right singular vectors oriented so their
/// element sum is non-negative.
#[derive(Clone, Debug)]
pub struct BlockSvd<T: Real = f64> {
    /// Descending singular values.
    pub sigma: Vec<T>,
    /// `1ᵀ v_i` for every right singular vector; exact zeros are snapped.
    pub colsum: Vec<T>,
    pub u: Matrix<T>,
    /// Right singular vectors as columns.
    pub v: Matrix<T>,
}

impl<T: Real> BlockSvd<T> {
    fn compute(block: &LocalCalibration<T>) -> Result<Self> {
        let linalg::Svd { mut u, sigma, mut v } = linalg::svd(block.matrix());
        let dim = block.dim();
        if sigma.iter().any(|&s| s <= T::zero()) {
            return Err(QremError::NonInvertible {
                qubits: block.qubits.clone(),
                det: 0.0,
            });
        }
        let zero_tol = T::epsilon() * T::lit(64.0) * T::from_usize_lossy(dim).sqrt();
        let mut colsum = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut s: T = (0..dim).map(|i| v[(i, j)]).sum();
            let flip = if s.abs() <= zero_tol {
                s = T::zero();
                let first = (0..dim)
                    .map(|i| v[(i, j)])
                    .find(|x| x.abs() > zero_tol)
                    .unwrap_or_else(T::zero);
                first < T::zero()
            } else {
                s < T::zero()
            };
            if flip {
                s = -s;
                for i in 0..dim {
                    v[(i, j)] = -v[(i, j)];
                    u[(i, j)] = -u[(i, j)];
                }
            }
            colsum.push(s);
        }
        Ok(Self { sigma, colsum, u, v })
    }
}

/// Per-block SVDs; a tensor singular direction is one index per block and its
/// singular value, column sum and vector entries are products over blocks.
#[derive(Clone, Debug)]
pub struct SvdCache<T: Real = f64> {
    blocks: Vec<BlockSvd<T>>,
}

/// A tensor-product singular direction: one singular index per block.
pub type Direction = Vec<usize>;

impl<T: Real> SvdCache<T> {
    pub fn blocks(&self) -> &[BlockSvd<T>] {
        &self.blocks
    }

    pub fn sigma(&self, dir: &[usize]) -> T {
        self.blocks
            .iter()
            .zip(dir)
            .map(|(b, &i)| b.sigma[i])
            .fold(T::one(), |a, b| a * b)
    }

    pub fn colsum(&self, dir: &[usize]) -> T {
        self.blocks
            .iter()
            .zip(dir)
            .map(|(b, &i)| b.colsum[i])
            .fold(T::one(), |a, b| a * b)
    }

    /// Entry of the direction's right singular vector at the state whose
    /// per-block sub-indices are `sub`.
    #[inline]
    pub fn vector_entry(&self, dir: &[usize], sub: &[usize]) -> T {
        let mut p = T::one();
        for ((b, &d), &s) in self.blocks.iter().zip(dir).zip(sub) {
            p = p * b.v[(s, d)];
        }
        p
    }

    /// The direction with every block at its largest singular value.
    pub fn leading(&self) -> Direction {
        vec![0; self.blocks.len()]
    }

    /// The `k` directions with the largest `|1ᵀ v|`, best first. Ties are
    /// broken by per-block rank order, so the selection is deterministic.
    pub fn top_directions(&self, k: usize) -> Vec<Direction> {
        // Per-block singular indices ranked by |colsum|, descending.
        let ranked: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| {
                let mut idx: Vec<usize> = (0..b.colsum.len()).collect();
                idx.sort_by(|&x, &y| {
                    b.colsum[y]
                        .abs()
                        .partial_cmp(&b.colsum[x].abs())
                        .unwrap_or(Ordering::Equal)
                        .then(x.cmp(&y))
                });
                idx
            })
            .collect();
        let score = |ranks: &[usize]| -> f64 {
            ranks
                .iter()
                .zip(&ranked)
                .zip(&self.blocks)
                .map(|((&r, order), b)| b.colsum[order[r]].abs().as_f64())
                .product()
        };

        #[derive(PartialEq)]
        struct Node(f64, Vec<usize>);
        impl Eq for Node {}
        impl Ord for Node {
            fn cmp(&self, other: &Self) -> Ordering {
                self.0
                    .total_cmp(&other.0)
                    .then_with(|| other.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Node {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let start = vec![0usize; self.blocks.len()];
        let mut heap = BinaryHeap::new();
        let mut seen = HashSet::new();
        heap.push(Node(score(&start), start.clone()));
        seen.insert(start);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let Some(Node(_, ranks)) = heap.pop() else { break };
            for b in 0..ranks.len() {
                if ranks[b] + 1 < ranked[b].len() {
                    let mut next = ranks.clone();
                    next[b] += 1;
                    if seen.insert(next.clone()) {
                        heap.push(Node(score(&next), next));
                    }
                }
            }
            out.push(
                ranks
                    .iter()
                    .zip(&ranked)
                    .map(|(&r, order)| order[r])
                    .collect(),
            );
        }
        out
    }
}

/// Product of per-block calibrations covering qubits `0..width` exactly once.
#[derive(Clone, Debug)]
pub struct TensorNoiseModel<T: Real = f64> {
    width: usize,
    blocks: Vec<LocalCalibration<T>>,
    inverses: Vec<Matrix<T>>,
    svd: SvdCache<T>,
}

impl<T: Real> TensorNoiseModel<T> {
    pub fn new(width: usize, blocks: Vec<LocalCalibration<T>>) -> Result<Self> {
        if width == 0 {
            return Err(QremError::InvalidModel("width must be at least 1".into()));
        }
        let mut covered = vec![false; width];
        for b in &blocks {
            for &q in b.qubits() {
                if q >= width {
                    return Err(QremError::InvalidModel(format!(
                        "qubit {q} outside width {width}"
                    )));
                }
                if covered[q] {
                    return Err(QremError::InvalidModel(format!(
                        "qubit {q} appears in more than one block"
                    )));
                }
                covered[q] = true;
            }
        }
        if let Some(q) = covered.iter().position(|c| !c) {
            return Err(QremError::InvalidModel(format!(
                "qubit {q} is not covered by any block"
            )));
        }
        let inverses = blocks
            .iter()
            .map(LocalCalibration::inverse)
            .collect::<Result<Vec<_>>>()?;
        let svd = SvdCache {
            blocks: blocks.iter().map(BlockSvd::compute).collect::<Result<_>>()?,
        };
        Ok(Self {
            width,
            blocks,
            inverses,
            svd,
        })
    }

    /// `n` independent qubits sharing the same flip probabilities.
    pub fn synth_uniform(n: usize, p01: T, p10: T) -> Result<Self> {
        let blocks = (0..n)
            .map(|q| LocalCalibration::single_qubit(q, p01, p10))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, blocks)
    }

    /// Independent qubits with per-qubit `(p01, p10)`.
    pub fn synth_per_qubit(probs: &[(T, T)]) -> Result<Self> {
        let blocks = probs
            .iter()
            .enumerate()
            .map(|(q, &(p01, p10))| LocalCalibration::single_qubit(q, p01, p10))
            .collect::<Result<Vec<_>>>()?;
        Self::new(probs.len(), blocks)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::synth_uniform(n, T::zero(), T::zero())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn blocks(&self) -> &[LocalCalibration<T>] {
        &self.blocks
    }

    #[inline]
    pub fn block_inverses(&self) -> &[Matrix<T>] {
        &self.inverses
    }

    #[inline]
    pub fn svd_cache(&self) -> &SvdCache<T> {
        &self.svd
    }

    pub fn check_width(&self, width: usize) -> Result<()> {
        if width != self.width {
            return Err(QremError::WidthMismatch {
                expected: self.width,
                found: width,
            });
        }
        Ok(())
    }

    /// Per-block sub-indices of `s`, in block order.
    pub fn sub_indices(&self, s: &BitString) -> Vec<usize> {
        self.blocks.iter().map(|b| s.block_index(b.qubits())).collect()
    }

    /// Dense `2^n x 2^n` calibration matrix, rows and columns in
    /// [`BitString::from_index`] order.
    pub fn full_matrix(&self, qubit_cap: usize) -> Result<Matrix<T>> {
        let factors: Vec<&Matrix<T>> = self.blocks.iter().map(|b| b.matrix()).collect();
        self.full_product(qubit_cap, &factors)
    }

    /// Dense inverse assembled from the block inverses.
    pub fn full_inverse(&self, qubit_cap: usize) -> Result<Matrix<T>> {
        let factors: Vec<&Matrix<T>> = self.inverses.iter().collect();
        self.full_product(qubit_cap, &factors)
    }

    fn full_product(&self, qubit_cap: usize, factors: &[&Matrix<T>]) -> Result<Matrix<T>> {
        let n = self.width;
        if n > qubit_cap || n >= 31 {
            return Err(QremError::SizeCap {
                what: "qubit count for the full matrix",
                size: n,
                cap: qubit_cap.min(30),
            });
        }
        let dim = 1usize << n;
        let subs: Vec<Vec<usize>> = (0..dim)
            .map(|i| self.sub_indices(&BitString::from_index(i as u64, n)))
            .collect();
        let mut out = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut p = T::one();
                for (b, f) in factors.iter().enumerate() {
                    p = p * f[(subs[i][b], subs[j][b])];
                }
                out[(i, j)] = p;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = CalibrationFile {
            width: self.width,
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockFile {
                    qubits: b.qubits.clone(),
                    matrix: b
                        .matrix
                        .to_rows()
                        .into_iter()
                        .map(|r| r.into_iter().map(Real::as_f64).collect())
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(file).expect("calibration serializes")
    }

    /// Parse calibration JSON. Columns are renormalized on load, so raw
    /// calibration tallies are accepted as well as stochastic matrices.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CalibrationFile = serde_json::from_str(text)?;
        let blocks = file
            .blocks
            .into_iter()
            .map(|b| {
                let rows: Vec<Vec<T>> = b
                    .matrix
                    .into_iter()
                    .map(|r| r.into_iter().map(T::lit).collect())
                    .collect();
                let m = Matrix::from_rows(&rows).ok_or_else(|| {
                    QremError::Parse(format!("ragged matrix for block {:?}", b.qubits))
                })?;
                LocalCalibration::from_measured(b.qubits, m)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.width, blocks)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationFile {
    width: usize,
    blocks: Vec<BlockFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockFile {
    qubits: Vec<usize>,
    matrix: Vec<Vec<f64>>,
}
