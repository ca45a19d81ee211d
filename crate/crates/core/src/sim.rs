//! Ideal outcome distributions, forward readout noise and seeded shot sampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::distributions::{BitString, SparseDistribution};
use crate::error::{QremError, Result};
use crate::noise_model::TensorNoiseModel;
use crate::observables::{min_angle_count, mqc_angles, MqcSignalSet};
use crate::scalar::Real;

/// Default cap on the support of [`apply_noise_exact`].
pub const DEFAULT_SIM_SUPPORT_CAP: usize = 1 << 22;
/// Entries below this are dropped by [`apply_noise_exact`].
pub const NOISE_TRUNCATION: f64 = 1e-12;
/// Default number of residual strings in [`grover_ideal`].
pub const DEFAULT_RESIDUAL_SUPPORT: usize = 64;

const RESIDUAL_STREAM: u64 = 0x7265_7369_6475_616c;

/// Root seed. Independent generators are derived by keying it, so the draw
/// for a grid point never depends on evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandomSeed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomSeed {
    /// Generator for the given key path, e.g. `[m, trial]`.
    pub fn rng(self, keys: &[u64]) -> ChaCha8Rng {
        let mut state = splitmix64(self.0);
        for &k in keys {
            state = splitmix64(state ^ splitmix64(k.wrapping_add(0x632b_e59b_d9b4_e019)));
        }
        let mut bytes = [0u8; 32];
        for (i, chunk) in bytes.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&splitmix64(state.wrapping_add(i as u64)).to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}

/// `{0…0: ½, 1…1: ½}`
pub fn ghz_ideal<T: Real>(n: usize) -> Result<SparseDistribution<T>> {
    if n < 2 {
        return Err(QremError::Domain("GHZ needs n >= 2".into()));
    }
    let half = T::lit(0.5);
    SparseDistribution::from_probabilities(
        n,
        [(BitString::zeros(n), half), (BitString::ones(n), half)],
        None,
    )
}

/// `A·p`, one block at a time on the sparse support.
pub fn apply_noise_exact<T: Real>(
    p: &SparseDistribution<T>,
    model: &TensorNoiseModel<T>,
    support_cap: usize,
) -> Result<SparseDistribution<T>> {
    model.check_width(p.width())?;
    let cutoff = T::lit(NOISE_TRUNCATION);
    let mut current: BTreeMap<BitString, T> = p.iter().map(|(k, v)| (k.clone(), v)).collect();
    for block in model.blocks() {
        let qubits = block.qubits();
        let a = block.matrix();
        let mut next: BTreeMap<BitString, T> = BTreeMap::new();
        for (s, &v) in &current {
            let col = s.block_index(qubits);
            for row in 0..a.rows() {
                let w = a[(row, col)] * v;
                if w == T::zero() {
                    continue;
                }
                let mut t = s.clone();
                t.set_block(qubits, row);
                let e = next.entry(t).or_insert_with(T::zero);
                *e = *e + w;
            }
        }
        next.retain(|_, w| w.abs() >= cutoff);
        if next.len() > support_cap {
            return Err(QremError::SizeCap {
                what: "simulated noisy support",
                size: next.len(),
                cap: support_cap,
            });
        }
        current = next;
    }
    SparseDistribution::from_weights(p.width(), current, p.shots())
}

/// Multinomial draw of `shots` outcomes, as sequential binomials over the
/// entries in bitstring order.
pub fn sample_counts<T: Real, R: Rng + ?Sized>(
    p: &SparseDistribution<T>,
    shots: u64,
    rng: &mut R,
) -> Result<SparseDistribution<T>> {
    if shots == 0 {
        return Err(QremError::Domain("shots must be at least 1".into()));
    }
    if !p.is_probability() {
        return Err(QremError::Precondition(
            "sampling needs a probability distribution".into(),
        ));
    }
    let mut remaining_shots = shots;
    let mut remaining_mass = p.element_sum().as_f64();
    let mut counts = Vec::with_capacity(p.len());
    let last = p.len() - 1;
    for (i, (s, w)) in p.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        let w = w.as_f64();
        let c = if i == last {
            remaining_shots
        } else {
            let q = (w / remaining_mass).clamp(0.0, 1.0);
            Binomial::new(remaining_shots, q)
                .map_err(|e| QremError::Domain(e.to_string()))?
                .sample(rng)
        };
        remaining_shots -= c;
        remaining_mass -= w;
        if c > 0 {
            counts.push((s.clone(), c));
        }
    }
    SparseDistribution::from_counts(counts)
}

/// Per-shot readout flips applied to already sampled ideal counts. Same law
/// as sampling from `A·p`, at O(shots·n) cost regardless of the noisy support.
pub fn sample_noisy_counts<T: Real, R: Rng + ?Sized>(
    p: &SparseDistribution<T>,
    model: &TensorNoiseModel<T>,
    shots: u64,
    rng: &mut R,
) -> Result<SparseDistribution<T>> {
    model.check_width(p.width())?;
    let ideal = sample_counts(p, shots, rng)?;
    let shots = ideal.shots().unwrap_or(shots);
    let mut tallies: BTreeMap<BitString, u64> = BTreeMap::new();
    for (s, w) in ideal.iter() {
        let count = (w.as_f64() * shots as f64).round() as u64;
        for _ in 0..count {
            let mut t = s.clone();
            for block in model.blocks() {
                let a = block.matrix();
                let col = t.block_index(block.qubits());
                let mut u: f64 = rng.random();
                let mut row = a.rows() - 1;
                for r in 0..a.rows() {
                    let w = a[(r, col)].as_f64();
                    if u < w {
                        row = r;
                        break;
                    }
                    u -= w;
                }
                t.set_block(block.qubits(), row);
            }
            *tallies.entry(t).or_insert(0) += 1;
        }
    }
    SparseDistribution::from_counts(tallies)
}

/// Noisy GHZ tallies with exactly `distinct` outcomes: shots are drawn with
/// independent flips of probability `p` on each qubit until the support
/// reaches the target. If that stalls (target close to `2^n`), the remainder
/// is filled with uniformly random strings of count one. Used to build large
/// sparse benchmark inputs.
pub fn synthetic_ghz_counts<R: Rng + ?Sized>(
    n: usize,
    distinct: usize,
    p: f64,
    rng: &mut R,
) -> Result<SparseDistribution<f64>> {
    if n < 2 || distinct == 0 {
        return Err(QremError::Domain("need n >= 2 and at least one outcome".into()));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(QremError::Domain(format!("flip probability {p} must lie in (0, 0.5)")));
    }
    if n < 20 && distinct > 1usize << n {
        return Err(QremError::Domain(format!("{distinct} outcomes exceed 2^{n}")));
    }
    let mut tallies: BTreeMap<BitString, u64> = BTreeMap::new();
    let budget = 64 * distinct as u64 + 100_000;
    for _ in 0..budget {
        let mut s = if rng.random::<bool>() {
            BitString::ones(n)
        } else {
            BitString::zeros(n)
        };
        for q in 0..n {
            if rng.random::<f64>() < p {
                s.flip(q);
            }
        }
        *tallies.entry(s).or_insert(0) += 1;
        if tallies.len() == distinct {
            return SparseDistribution::from_counts(tallies);
        }
    }
    while tallies.len() < distinct {
        let mut s = BitString::zeros(n);
        for q in 0..n {
            s.set(q, rng.random());
        }
        tallies.entry(s).or_insert(1);
    }
    SparseDistribution::from_counts(tallies)
}

/// `S_φ = cos²(nφ/2)` on the uniform grid of `count` angles.
pub fn mqc_ideal_signals<T: Real>(n: usize, count: usize) -> Result<MqcSignalSet<T>> {
    let required = min_angle_count(n);
    if count < required {
        return Err(QremError::Aliasing {
            angles: count,
            order: n,
            required,
        });
    }
    let nn = T::from_usize_lossy(n);
    let half = T::lit(0.5);
    let signals = mqc_angles::<T>(count)
        .into_iter()
        .map(|phi| {
            let c = (nn * phi * half).cos();
            c * c
        })
        .collect();
    MqcSignalSet::new(n, signals)
}

/// Ideal readout of the MQC circuit at angle `φ`: after the phase rotation
/// and the disentangling ladder the register is `0…0` with probability
/// `cos²(nφ/2)`, else `10…0`. The signal is the `0…0` weight.
pub fn mqc_measurement_ideal<T: Real>(n: usize, phi: T) -> Result<SparseDistribution<T>> {
    if n < 2 {
        return Err(QremError::Domain("MQC needs n >= 2".into()));
    }
    let c = (T::from_usize_lossy(n) * phi * T::lit(0.5)).cos();
    let stay = c * c;
    let mut flag = BitString::zeros(n);
    flag.set(0, true);
    SparseDistribution::from_weights(
        n,
        [(BitString::zeros(n), stay), (flag, T::one() - stay)],
        None,
    )
}

/// The fixed residual support of [`grover_ideal`]: distinct `(n+1)`-bit
/// strings ending in 1, drawn from a stream keyed by `n` only.
pub fn residual_strings(n: usize, count: usize, seed: RandomSeed) -> Result<Vec<BitString>> {
    if count == 0 {
        return Err(QremError::Domain("residual support must be at least 1".into()));
    }
    if n < usize::BITS as usize - 1 && count > 1usize << n {
        return Err(QremError::Domain(format!(
            "only 2^{n} strings end in 1; {count} requested"
        )));
    }
    let mut rng = seed.rng(&[RESIDUAL_STREAM, n as u64]);
    let mut chosen = BTreeSet::new();
    while chosen.len() < count {
        let mut s = BitString::zeros(n + 1);
        for q in 0..n {
            s.set(q, rng.random());
        }
        s.set(n, true);
        chosen.insert(s);
    }
    Ok(chosen.into_iter().collect())
}

/// Outcome law after `m` modified Grover iterations: `0…0` (width `n+1`) with
/// `cos²(2mθ)`, the rest spread evenly over the residual strings.
pub fn grover_ideal<T: Real>(
    n: usize,
    m: u64,
    theta: T,
    residual_support: usize,
    seed: RandomSeed,
) -> Result<SparseDistribution<T>> {
    if m == 0 {
        return Err(QremError::Domain("iteration count m must be >= 1".into()));
    }
    let residual = residual_strings(n, residual_support, seed)?;
    let c = (T::lit(2.0 * m as f64) * theta).cos();
    let zero = c * c;
    let share = (T::one() - zero) / T::from_usize_lossy(residual.len());
    let entries = std::iter::once((BitString::zeros(n + 1), zero))
        .chain(residual.into_iter().map(|s| (s, share)));
    SparseDistribution::from_weights(n + 1, entries, None)
}

/// Continuous and discretized targets of the amplitude estimation task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetAmplitude {
    /// `S = Σ_x 2^{−n} sin²((x+½) b_max / 2^n)`
    pub discrete: f64,
    /// `I = (1/b_max)(b_max/2 − sin(2b_max)/4)`
    pub continuous: f64,
    /// `arcsin √S`
    pub theta: f64,
}

pub fn target_amplitude(n: usize, b_max: f64) -> Result<TargetAmplitude> {
    if n == 0 || n > 40 {
        return Err(QremError::Domain(format!("target needs 1 <= n <= 40, got {n}")));
    }
    if !b_max.is_finite() || b_max <= 0.0 {
        return Err(QremError::Domain(format!("b_max = {b_max} must be positive")));
    }
    let points = 1u64 << n;
    let step = b_max / points as f64;
    let sum: f64 = (0..points)
        .map(|x| ((x as f64 + 0.5) * step).sin().powi(2))
        .sum();
    let discrete = sum / points as f64;
    let continuous = (b_max / 2.0 - (2.0 * b_max).sin() / 4.0) / b_max;
    Ok(TargetAmplitude {
        discrete,
        continuous,
        theta: discrete.sqrt().asin(),
    })
}
