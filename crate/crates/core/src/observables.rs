//! Diagonal observables, GHZ population and MQC fidelity.

use std::fmt;
use std::sync::Arc;

use crate::distributions::{BitString, SparseDistribution};
use crate::error::{QremError, Result};
use crate::scalar::Real;

/// Observable diagonal in the computational basis: `O(i)` per outcome.
#[derive(Clone)]
pub struct DiagonalObservable<T: Real = f64> {
    name: String,
    bound: T,
    eval: Arc<dyn Fn(&BitString) -> T + Send + Sync>,
}

impl<T: Real> DiagonalObservable<T> {
    /// `bound` must dominate `|O(i)|` for every outcome; it is what turns the
    /// overhead into an error bar.
    pub fn new<F>(name: impl Into<String>, bound: T, eval: F) -> Result<Self>
    where
        F: Fn(&BitString) -> T + Send + Sync + 'static,
    {
        if !bound.is_finite() || bound < T::zero() {
            return Err(QremError::Domain(format!("observable bound {bound} must be finite and >= 0")));
        }
        Ok(Self {
            name: name.into(),
            bound,
            eval: Arc::new(eval),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> T {
        self.bound
    }

    pub fn eval(&self, s: &BitString) -> T {
        (self.eval)(s)
    }
}

impl<T: Real> fmt::Debug for DiagonalObservable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiagonalObservable")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish()
    }
}

/// `Z⊗…⊗Z`: `+1` for even Hamming weight, `−1` for odd.
pub fn parity_observable<T: Real>(n: usize) -> Result<DiagonalObservable<T>> {
    if n == 0 {
        return Err(QremError::Domain("parity needs n >= 1".into()));
    }
    DiagonalObservable::new("parity", T::one(), |s: &BitString| {
        if s.count_ones().is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        }
    })
}

/// Indicator of a single outcome, e.g. the all-zeros string.
pub fn projector_observable<T: Real>(target: BitString) -> DiagonalObservable<T> {
    DiagonalObservable::new(format!("projector:{target}"), T::one(), move |s: &BitString| {
        if *s == target {
            T::one()
        } else {
            T::zero()
        }
    })
    .expect("unit bound is valid")
}

/// `Σ O(i) p_i / Σ p_i`.
pub fn expval_normalized<T: Real>(p: &SparseDistribution<T>, o: &DiagonalObservable<T>) -> Result<T> {
    let sum = p.element_sum();
    if sum == T::zero() {
        return Err(QremError::DegenerateConstraint(
            "element sum is zero; normalized expectation undefined".into(),
        ));
    }
    Ok(expval_raw(p, o) / sum)
}

/// `Σ O(i) p_i` without normalization; zero for an empty distribution.
pub fn expval_raw<T: Real>(p: &SparseDistribution<T>, o: &DiagonalObservable<T>) -> T {
    p.iter().map(|(s, w)| o.eval(s) * w).sum()
}

/// Weight on `0…0` plus weight on `1…1`.
pub fn ghz_population<T: Real>(p: &SparseDistribution<T>) -> T {
    let n = p.width();
    p.get(&BitString::zeros(n)) + p.get(&BitString::ones(n))
}

/// Smallest angle count that resolves the `q = n` Fourier line.
pub fn min_angle_count(n: usize) -> usize {
    2 * n + 2
}

/// Overlap signals `S_φ` on the uniform grid `φ_j = 2πj/𝒩`.
#[derive(Clone, Debug, PartialEq)]
pub struct MqcSignalSet<T: Real = f64> {
    n: usize,
    signals: Vec<T>,
}

impl<T: Real> MqcSignalSet<T> {
    pub fn new(n: usize, signals: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(QremError::Domain("MQC needs n >= 1".into()));
        }
        let required = min_angle_count(n);
        if signals.len() < required {
            return Err(QremError::Aliasing {
                angles: signals.len(),
                order: n,
                required,
            });
        }
        // Mitigated signals can overshoot by rounding only.
        let slack = T::lit(1e-9);
        if let Some(bad) = signals
            .iter()
            .find(|&&s| !(s >= -slack && s <= T::one() + slack))
        {
            return Err(QremError::Domain(format!("signal {bad} outside [0, 1]")));
        }
        Ok(Self { n, signals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn signals(&self) -> &[T] {
        &self.signals
    }

    pub fn angle_count(&self) -> usize {
        self.signals.len()
    }

    pub fn angles(&self) -> Vec<T> {
        mqc_angles(self.signals.len())
    }

    /// `I_q = 𝒩⁻¹ |Σ_j e^{iqφ_j} S_j|`
    pub fn fourier_magnitude(&self, q: usize) -> T {
        let count = self.signals.len();
        let (mut re, mut im) = (T::zero(), T::zero());
        for (j, &s) in self.signals.iter().enumerate() {
            let phase = T::lit(std::f64::consts::TAU * ((q * j) % count) as f64 / count as f64);
            re = re + phase.cos() * s;
            im = im + phase.sin() * s;
        }
        re.hypot(im) / T::from_usize_lossy(count)
    }
}

pub fn mqc_angles<T: Real>(count: usize) -> Vec<T> {
    (0..count)
        .map(|j| T::lit(std::f64::consts::TAU * j as f64 / count as f64))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fidelity<T> {
    pub fidelity: T,
    pub coherence: T,
    pub population: T,
    /// `I_n`
    pub fourier: T,
}

/// `F = (P + C)/2` with `C = 2√I_n`.
pub fn mqc_fidelity<T: Real>(population: T, signals: &MqcSignalSet<T>) -> Result<Fidelity<T>> {
    if !(population >= T::zero() && population <= T::one()) {
        return Err(QremError::Domain(format!("population {population} outside [0, 1]")));
    }
    let fourier = signals.fourier_magnitude(signals.n());
    let coherence = T::lit(2.0) * fourier.sqrt();
    Ok(Fidelity {
        fidelity: (population + coherence) / T::lit(2.0),
        coherence,
        population,
        fourier,
    })
}

/// Sample mean and standard deviation (`n − 1` denominator; zero for one run).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn dist(pairs: &[(&str, f64)]) -> SparseDistribution<f64> {
        let width = pairs[0].0.len();
        SparseDistribution::from_weights(width, pairs.iter().map(|&(k, v)| (bs(k), v)), None).unwrap()
    }

    #[test]
    fn parity_values() {
        let o = parity_observable::<f64>(2).unwrap();
        assert_eq!(o.eval(&bs("00")), 1.0);
        assert_eq!(o.eval(&bs("01")), -1.0);
        assert_eq!(o.eval(&bs("11")), 1.0);
        let o = parity_observable::<f64>(3).unwrap();
        assert_eq!(o.eval(&bs("111")), -1.0);
        assert!(parity_observable::<f64>(0).is_err());
    }

    #[test]
    fn normalized_and_raw() {
        let o = parity_observable(2).unwrap();
        assert_eq!(expval_normalized(&dist(&[("00", 0.5), ("11", 0.5)]), &o).unwrap(), 1.0);
        let v = expval_normalized(&dist(&[("00", 0.45), ("11", 0.45), ("01", 0.1)]), &o).unwrap();
        assert!((v - 0.8).abs() < 1e-15);
        let d = dist(&[("00", 0.45), ("11", 0.45)]);
        assert!((expval_normalized(&d, &o).unwrap() - 1.0).abs() < 1e-15);
        assert!((expval_raw(&d, &o) - 0.9).abs() < 1e-15);
        let empty = SparseDistribution::<f64>::from_weights(2, [], None).unwrap();
        assert_eq!(expval_raw(&empty, &o), 0.0);
        assert!(expval_normalized(&empty, &o).is_err());
    }

    #[test]
    fn ideal_ghz_fidelity() {
        for n in [2usize, 4, 7] {
            let count = min_angle_count(n);
            let signals: Vec<f64> = mqc_angles::<f64>(count)
                .into_iter()
                .map(|phi| (n as f64 * phi / 2.0).cos().powi(2))
                .collect();
            let set = MqcSignalSet::new(n, signals).unwrap();
            let f = mqc_fidelity(1.0, &set).unwrap();
            assert!((f.fourier - 0.25).abs() < 1e-12);
            assert!((f.fidelity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_fidelities() {
        let zero = MqcSignalSet::new(2, vec![0.0; 6]).unwrap();
        assert_eq!(mqc_fidelity(0.0, &zero).unwrap().fidelity, 0.0);
        assert_eq!(mqc_fidelity(1.0, &zero).unwrap().fidelity, 0.5);
        assert!(mqc_fidelity(1.5, &zero).is_err());
    }

    #[test]
    fn aliasing_rejected() {
        assert!(matches!(
            MqcSignalSet::<f64>::new(4, vec![0.5; 9]),
            Err(QremError::Aliasing { required: 10, .. })
        ));
    }

    #[test]
    fn population_reads_extremes() {
        let d = dist(&[("000", 0.4), ("111", 0.35), ("010", 0.25)]);
        assert!((ghz_population(&d) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sample_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }
}
