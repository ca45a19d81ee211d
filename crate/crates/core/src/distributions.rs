//! Sparse outcome distributions keyed by fixed-width bitstrings.
//!
//! Text convention: qubit 0 is the leftmost character of a serialized label,
//! and the canonical order of a subspace is lexicographic on that text.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QremError, Result};
use crate::scalar::Real;

/// A measured (or prepared) computational basis state of `width` qubits.
///
/// Bits are packed most-significant-first so the derived word order is the
/// lexicographic order of the text form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    width: usize,
    words: Box<[u64]>,
}

impl BitString {
    pub fn zeros(width: usize) -> Self {
        assert!(width >= 1, "bitstring width must be at least 1");
        Self {
            width,
            words: vec![0u64; width.div_ceil(64)].into_boxed_slice(),
        }
    }

    pub fn ones(width: usize) -> Self {
        let mut b = Self::zeros(width);
        for q in 0..width {
            b.set(q, true);
        }
        b
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.is_empty() {
            return Err(QremError::InvalidLabel(String::new()));
        }
        let mut b = Self::zeros(bits.len());
        for (q, &v) in bits.iter().enumerate() {
            b.set(q, v);
        }
        Ok(b)
    }

    /// Parse a `0`/`1` label; qubit 0 is the first character.
    pub fn parse(label: &str) -> Result<Self> {
        if label.is_empty() {
            return Err(QremError::InvalidLabel(label.to_string()));
        }
        let mut b = Self::zeros(label.len());
        for (q, c) in label.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => b.set(q, true),
                _ => return Err(QremError::InvalidLabel(label.to_string())),
            }
        }
        Ok(b)
    }

    /// Interpret `index` as a `width`-bit integer with qubit 0 as the most
    /// significant bit. This is the row/column order of the full calibration
    /// matrix.
    pub fn from_index(index: u64, width: usize) -> Self {
        assert!(width <= 64, "from_index supports at most 64 qubits");
        let mut b = Self::zeros(width);
        for q in 0..width {
            b.set(q, (index >> (width - 1 - q)) & 1 == 1);
        }
        b
    }

    /// Inverse of [`BitString::from_index`]; `None` above 64 qubits.
    pub fn to_index(&self) -> Option<u64> {
        if self.width > 64 {
            return None;
        }
        Some(self.words[0] >> (64 - self.width))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn bit(&self, qubit: usize) -> bool {
        debug_assert!(qubit < self.width);
        (self.words[qubit / 64] >> (63 - qubit % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, qubit: usize, value: bool) {
        assert!(qubit < self.width, "qubit {qubit} out of range");
        let mask = 1u64 << (63 - qubit % 64);
        if value {
            self.words[qubit / 64] |= mask;
        } else {
            self.words[qubit / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, qubit: usize) {
        assert!(qubit < self.width, "qubit {qubit} out of range");
        self.words[qubit / 64] ^= 1u64 << (63 - qubit % 64);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn hamming_distance(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Sub-index of this string inside a block: the listed qubits read as a
    /// binary number, first listed qubit most significant.
    #[inline]
    pub fn block_index(&self, qubits: &[usize]) -> usize {
        qubits
            .iter()
            .fold(0usize, |acc, &q| (acc << 1) | self.bit(q) as usize)
    }

    /// Overwrite the bits of `qubits` with the block state `index`.
    pub fn set_block(&mut self, qubits: &[usize], index: usize) {
        let k = qubits.len();
        for (pos, &q) in qubits.iter().enumerate() {
            self.set(q, (index >> (k - 1 - pos)) & 1 == 1);
        }
    }
}

impl Ord for BitString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.words
            .cmp(&other.words)
            .then(self.width.cmp(&other.width))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.width)
            .map(|q| if self.bit(q) { '1' } else { '0' })
            .collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl std::str::FromStr for BitString {
    type Err = QremError;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn probability_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e3))
}

/// Map from bitstrings to real weights. Zero weights are never stored, so the
/// key set is exactly the measured subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDistribution<T: Real = f64> {
    width: usize,
    entries: BTreeMap<BitString, T>,
    shots: Option<u64>,
    probability: bool,
}

impl<T: Real> SparseDistribution<T> {
    /// Normalize integer tallies into frequencies.
    pub fn from_counts<I>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, u64)>,
    {
        let mut tallies: BTreeMap<BitString, u64> = BTreeMap::new();
        let mut width = None;
        for (key, count) in counts {
            check_width(&mut width, &key)?;
            if count == 0 {
                continue;
            }
            *tallies.entry(key).or_insert(0) += count;
        }
        let width = width.ok_or(QremError::EmptyDistribution)?;
        let total: u64 = tallies.values().sum();
        if total == 0 {
            return Err(QremError::EmptyDistribution);
        }
        let denom = T::lit(total as f64);
        let entries = tallies
            .into_iter()
            .map(|(k, c)| (k, T::lit(c as f64) / denom))
            .collect();
        Ok(Self {
            width,
            entries,
            shots: Some(total),
            probability: true,
        })
    }

    /// Build from arbitrary finite weights, e.g. a quasi-probability vector.
    /// An empty entry set is allowed and yields an empty distribution.
    pub fn from_weights<I>(width: usize, weights: I, shots: Option<u64>) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, T)>,
    {
        if width == 0 {
            return Err(QremError::Domain("width must be at least 1".into()));
        }
        let mut entries = BTreeMap::new();
        for (key, w) in weights {
            if key.width() != width {
                return Err(QremError::WidthMismatch {
                    expected: width,
                    found: key.width(),
                });
            }
            if !w.is_finite() {
                return Err(QremError::Domain(format!("non-finite weight for {key}")));
            }
            if w != T::zero() {
                *entries.entry(key).or_insert(T::zero()) = w;
            }
        }
        let mut d = Self {
            width,
            entries,
            shots,
            probability: false,
        };
        d.probability = d.check_probability();
        Ok(d)
    }

    /// Like [`SparseDistribution::from_weights`] but requires a probability
    /// vector.
    pub fn from_probabilities<I>(width: usize, weights: I, shots: Option<u64>) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, T)>,
    {
        let d = Self::from_weights(width, weights, shots)?;
        if d.is_empty() {
            return Err(QremError::EmptyDistribution);
        }
        if !d.probability {
            return Err(QremError::Domain(format!(
                "weights are not a probability vector (sum = {})",
                d.element_sum()
            )));
        }
        Ok(d)
    }

    fn check_probability(&self) -> bool {
        !self.entries.is_empty()
            && self.entries.values().all(|&w| w >= T::zero())
            && (self.element_sum() - T::one()).abs() <= probability_tolerance::<T>()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shots(&self) -> Option<u64> {
        self.shots
    }

    pub fn with_shots(mut self, shots: Option<u64>) -> Self {
        self.shots = shots;
        self
    }

    /// Non-negative weights summing to one (within 1e-9 for `f64`).
    #[inline]
    pub fn is_probability(&self) -> bool {
        self.probability
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &BitString) -> T {
        self.entries.get(key).copied().unwrap_or_else(T::zero)
    }

    /// Entries in canonical subspace order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&BitString, T)> + '_ {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    /// The measured subspace in canonical order.
    pub fn subspace(&self) -> Vec<BitString> {
        self.entries.keys().cloned().collect()
    }

    /// Weights aligned with [`SparseDistribution::subspace`].
    pub fn weights(&self) -> Vec<T> {
        self.entries.values().copied().collect()
    }

    pub fn element_sum(&self) -> T {
        self.entries.values().copied().sum()
    }

    pub fn cast<U: Real>(&self) -> SparseDistribution<U> {
        let entries = self
            .entries
            .iter()
            .map(|(k, &v)| (k.clone(), U::lit(v.as_f64())))
            .collect();
        let mut d = SparseDistribution {
            width: self.width,
            entries,
            shots: self.shots,
            probability: false,
        };
        d.probability = d.check_probability();
        d
    }

    /// Serialize as `{"width", "shots", "probs"}`.
    pub fn to_json(&self) -> serde_json::Value {
        let file = DistributionFile {
            width: self.width,
            shots: self.shots,
            counts: None,
            probs: Some(
                self.entries
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.as_f64()))
                    .collect(),
            ),
        };
        serde_json::to_value(file).expect("distribution serializes")
    }

    /// Serialize as integer `counts` when the weights are exact shot
    /// frequencies, falling back to [`SparseDistribution::to_json`].
    pub fn to_counts_json(&self) -> serde_json::Value {
        let Some(shots) = self.shots.filter(|_| self.probability) else {
            return self.to_json();
        };
        let mut counts = BTreeMap::new();
        for (k, v) in &self.entries {
            let c = v.as_f64() * shots as f64;
            if (c - c.round()).abs() > 1e-6 {
                return self.to_json();
            }
            counts.insert(k.to_string(), c.round());
        }
        let file = DistributionFile {
            width: self.width,
            shots: Some(shots),
            counts: Some(counts),
            probs: None,
        };
        serde_json::to_value(file).expect("distribution serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let file: DistributionFile = serde_json::from_value(value)?;
        file.into_distribution()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(text)?;
        file.into_distribution()
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn check_width(width: &mut Option<usize>, key: &BitString) -> Result<()> {
    match *width {
        None => *width = Some(key.width()),
        Some(w) if w != key.width() => {
            return Err(QremError::WidthMismatch {
                expected: w,
                found: key.width(),
            })
        }
        _ => {}
    }
    Ok(())
}

/// On-disk layout of a distribution.
#[derive(Debug, Serialize, Deserialize)]
struct DistributionFile {
    width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<BTreeMap<String, f64>>,
}

impl DistributionFile {
    fn parse_labels(
        width: usize,
        map: BTreeMap<String, f64>,
    ) -> Result<Vec<(BitString, f64)>> {
        map.into_iter()
            .map(|(label, v)| {
                let key = BitString::parse(&label)?;
                if key.width() != width {
                    return Err(QremError::WidthMismatch {
                        expected: width,
                        found: key.width(),
                    });
                }
                Ok((key, v))
            })
            .collect()
    }

    fn into_distribution<T: Real>(self) -> Result<SparseDistribution<T>> {
        match (self.counts, self.probs) {
            (Some(_), Some(_)) => Err(QremError::Parse(
                "distribution has both \"counts\" and \"probs\"".into(),
            )),
            (None, None) => Err(QremError::Parse(
                "distribution needs \"counts\" or \"probs\"".into(),
            )),
            (Some(counts), None) => {
                let entries = Self::parse_labels(self.width, counts)?;
                if entries.is_empty() {
                    return Err(QremError::EmptyDistribution);
                }
                let integral = entries
                    .iter()
                    .all(|(_, c)| *c >= 0.0 && c.fract() == 0.0 && *c <= u64::MAX as f64);
                if integral {
                    let d = SparseDistribution::from_counts(
                        entries.into_iter().map(|(k, c)| (k, c as u64)),
                    )?;
                    if let Some(s) = self.shots {
                        if Some(s) != d.shots {
                            return Err(QremError::Parse(format!(
                                "\"shots\" is {s} but counts sum to {}",
                                d.shots.unwrap_or(0)
                            )));
                        }
                    }
                    Ok(d)
                } else {
                    // Real-valued quasi counts: scale by the declared shot total.
                    let total: f64 = entries.iter().map(|(_, c)| c).sum();
                    let denom = self.shots.map(|s| s as f64).unwrap_or(total);
                    if denom == 0.0 {
                        return Err(QremError::EmptyDistribution);
                    }
                    SparseDistribution::from_weights(
                        self.width,
                        entries.into_iter().map(|(k, c)| (k, T::lit(c / denom))),
                        self.shots,
                    )
                }
            }
            (None, Some(probs)) => {
                let entries = Self::parse_labels(self.width, probs)?;
                SparseDistribution::from_weights(
                    self.width,
                    entries.into_iter().map(|(k, p)| (k, T::lit(p))),
                    self.shots,
                )
            }
        }
    }
}
