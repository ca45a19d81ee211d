#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qrem_core::{BitString, LocalCalibration, Matrix, SparseDistribution, TensorNoiseModel};
use rand::Rng;

/// Dense `A` assembled entry by entry from the block matrices.
pub fn dense_calibration(model: &TensorNoiseModel<f64>) -> DMatrix<f64> {
    let n = model.width();
    let dim = 1usize << n;
    let labels: Vec<BitString> = (0..dim as u64).map(|i| BitString::from_index(i, n)).collect();
    DMatrix::from_fn(dim, dim, |i, j| {
        model
            .blocks()
            .iter()
            .map(|b| b.matrix()[(labels[i].block_index(b.qubits()), labels[j].block_index(b.qubits()))])
            .product()
    })
}

pub fn dense_vector(d: &SparseDistribution<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(1usize << d.width());
    for (s, w) in d.iter() {
        v[s.to_index().unwrap() as usize] = w;
    }
    v
}

/// Euclidean projection onto the simplex by sorting and thresholding.
pub fn simplex_oracle(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &x) in u.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Dense reference pipeline: LU solve, uniform sum shift, simplex projection.
pub fn dense_pipeline(model: &TensorNoiseModel<f64>, y: &SparseDistribution<f64>) -> Vec<f64> {
    let a = dense_calibration(model);
    let x = a.lu().solve(&dense_vector(y)).expect("invertible");
    let shift = (1.0 - x.sum()) / x.len() as f64;
    let corrected: Vec<f64> = x.iter().map(|v| v + shift).collect();
    simplex_oracle(&corrected)
}

fn random_column_stochastic<R: Rng>(dim: usize, max_error: f64, rng: &mut R) -> Matrix<f64> {
    let mut m = Matrix::zeros(dim, dim);
    for col in 0..dim {
        let leak = rng.random_range(0.0..max_error);
        let weights: Vec<f64> = (0..dim).map(|r| if r == col { 0.0 } else { rng.random() }).collect();
        let total: f64 = weights.iter().sum();
        for row in 0..dim {
            m[(row, col)] = if row == col { 1.0 - leak } else { leak * weights[row] / total };
        }
    }
    m
}

/// Independent single-qubit flips with `p01`, `p10` drawn from `[0, max_p)`.
pub fn random_per_qubit_model<R: Rng>(n: usize, max_p: f64, rng: &mut R) -> TensorNoiseModel<f64> {
    let probs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..max_p), rng.random_range(0.0..max_p)))
        .collect();
    TensorNoiseModel::synth_per_qubit(&probs).unwrap()
}

/// Random shuffled partition into blocks of up to `max_block` qubits.
pub fn random_block_model<R: Rng>(n: usize, max_block: usize, max_error: f64, rng: &mut R) -> TensorNoiseModel<f64> {
    let mut qubits: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        qubits.swap(i, rng.random_range(0..=i));
    }
    let mut blocks = Vec::new();
    let mut rest = &qubits[..];
    while !rest.is_empty() {
        let k = rng.random_range(1..=max_block.min(rest.len()));
        let (head, tail) = rest.split_at(k);
        let m = random_column_stochastic(1 << k, max_error, rng);
        blocks.push(LocalCalibration::new(head.to_vec(), m).unwrap());
        rest = tail;
    }
    TensorNoiseModel::new(n, blocks).unwrap()
}

/// Noisy counts over the full space of `n` qubits.
pub fn random_counts<R: Rng>(n: usize, rng: &mut R) -> SparseDistribution<f64> {
    SparseDistribution::from_counts(
        (0..1u64 << n).map(|i| (BitString::from_index(i, n), rng.random_range(1..200u64))),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dense_of(d: &SparseDistribution<f64>) -> Vec<f64> {
    dense_vector(d).iter().copied().collect()
}
