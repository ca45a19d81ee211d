//! Maximum likelihood amplitude estimation over `p(0; θ, m) = cos²(2mθ)`, and
//! the noisy-readout experiment driver.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{mooney_mitigate, rigorous_mitigate, DEFAULT_SUPPORT_CAP};
use crate::correction::Correction;
use crate::distributions::{BitString, SparseDistribution};
use crate::error::{QremError, Result};
use crate::mitigator::{mitigate, MitigateOptions};
use crate::noise_model::{TensorNoiseModel, DEFAULT_FULL_QUBIT_CAP};
use crate::observables::mean_std;
use crate::sim::{
    apply_noise_exact, grover_ideal, sample_counts, sample_noisy_counts, target_amplitude, RandomSeed,
    DEFAULT_RESIDUAL_SUPPORT, DEFAULT_SIM_SUPPORT_CAP,
};

/// Probability clamp inside the log-likelihood.
pub const LIKELIHOOD_EPS: f64 = 1e-12;
pub const DEFAULT_GRID_POINTS: usize = 100_000;
/// The likelihood is symmetric under `θ → π/2 − θ`, so the search covers
/// `(0, π/4]` only.
pub const THETA_MAX: f64 = std::f64::consts::FRAC_PI_4;
const GOLDEN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MlaeSchedule {
    iterations: Vec<u64>,
    shots: u64,
}

impl MlaeSchedule {
    pub fn new(iterations: Vec<u64>, shots: u64) -> Result<Self> {
        if iterations.is_empty() {
            return Err(QremError::Domain("schedule needs at least one depth".into()));
        }
        if iterations[0] == 0 || iterations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QremError::Domain(format!(
                "depths {iterations:?} must be >= 1 and strictly increasing"
            )));
        }
        if shots == 0 {
            return Err(QremError::Domain("shots per circuit must be >= 1".into()));
        }
        Ok(Self { iterations, shots })
    }

    /// Depths `1, 2, 4, …, 64`.
    pub fn doubling(shots: u64) -> Self {
        Self::new((0..7).map(|k| 1u64 << k).collect(), shots).expect("valid schedule")
    }

    pub fn iterations(&self) -> &[u64] {
        &self.iterations
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// `N_q` after each prefix: `N_shot · Σ_{k≤K} m_k`.
    pub fn query_counts(&self) -> Vec<u64> {
        self.iterations
            .iter()
            .scan(0u64, |acc, &m| {
                *acc += m * self.shots;
                Some(*acc)
            })
            .collect()
    }
}

/// One circuit depth: `hits` zero outcomes out of `total`. `hits` may be
/// fractional when it comes from a mitigated probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub m: u64,
    pub hits: f64,
    pub total: f64,
}

pub fn log_likelihood(theta: f64, observations: &[Observation]) -> f64 {
    observations
        .iter()
        .map(|o| {
            let p = (2.0 * o.m as f64 * theta)
                .cos()
                .powi(2)
                .clamp(LIKELIHOOD_EPS, 1.0 - LIKELIHOOD_EPS);
            o.hits * p.ln() + (o.total - o.hits) * (1.0 - p).ln()
        })
        .sum()
}

/// Grid argmax over `(0, π/4]` followed by golden-section refinement of the
/// bracketing cell.
pub fn maximize_likelihood(observations: &[Observation], grid_points: usize) -> f64 {
    let grid_points = grid_points.max(2);
    if observations.iter().all(|o| o.total == 0.0) {
        log::warn!("likelihood is flat: every observation is empty; returning the boundary");
        return THETA_MAX;
    }
    let step = THETA_MAX / grid_points as f64;
    let (best, _) = (1..=grid_points)
        .map(|i| (i, log_likelihood(i as f64 * step, observations)))
        .fold((1, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let lo = (best as f64 - 1.0) * step;
    let hi = ((best as f64 + 1.0) * step).min(THETA_MAX);
    golden_section(|t| log_likelihood(t, observations), lo.max(f64::MIN_POSITIVE), hi)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / 2.0;
    // Keep the grid winner if refinement landed on a lower value.
    [mid, a, b]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(mid)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MlaeResult {
    pub theta_hat: f64,
    pub amplitude_hat: f64,
    /// Cumulative oracle queries `N_q`.
    pub queries: u64,
    pub theta_error: Option<f64>,
    pub amplitude_error: Option<f64>,
}

/// One estimate per schedule prefix. `observations[k]` must belong to depth
/// `schedule.iterations()[k]`; `truth` fills the error fields.
pub fn mle_theta(
    observations: &[Observation],
    schedule: &MlaeSchedule,
    truth: Option<f64>,
    grid_points: usize,
) -> Result<Vec<MlaeResult>> {
    if observations.len() != schedule.iterations().len() {
        return Err(QremError::Precondition(format!(
            "{} observations for a schedule of {} depths",
            observations.len(),
            schedule.iterations().len()
        )));
    }
    for (o, &m) in observations.iter().zip(schedule.iterations()) {
        if o.m != m || !(o.hits >= 0.0 && o.hits <= o.total) {
            return Err(QremError::Precondition(format!(
                "observation {o:?} does not match depth {m} or has hits outside [0, total]"
            )));
        }
    }
    Ok(schedule
        .query_counts()
        .into_par_iter()
        .enumerate()
        .map(|(k, queries)| {
            let theta_hat = maximize_likelihood(&observations[..=k], grid_points);
            let amplitude_hat = theta_hat.sin().powi(2);
            MlaeResult {
                theta_hat,
                amplitude_hat,
                queries,
                theta_error: truth.map(|t| (theta_hat - t).abs()),
                amplitude_error: truth.map(|t| (amplitude_hat - t.sin().powi(2)).abs()),
            }
        })
        .collect())
}

/// Constant of the `c/N_q` reference passing through `(queries, error)`.
pub fn heisenberg_constant(queries: u64, error: f64) -> f64 {
    error * queries as f64
}

pub fn heisenberg_reference(constant: f64, queries: u64) -> f64 {
    constant / queries as f64
}

/// Post-processing applied to the sampled counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MlaeMethod {
    Raw,
    Proposed(Correction),
    Rigorous,
    Mooney(f64),
}

impl fmt::Display for MlaeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MlaeMethod::Raw => f.write_str("raw"),
            MlaeMethod::Proposed(c) => write!(f, "proposed-{c}"),
            MlaeMethod::Rigorous => f.write_str("rigorous"),
            MlaeMethod::Mooney(t) => write!(f, "mooney:{t}"),
        }
    }
}

impl FromStr for MlaeMethod {
    type Err = QremError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "raw" {
            return Ok(MlaeMethod::Raw);
        }
        if s == "rigorous" {
            return Ok(MlaeMethod::Rigorous);
        }
        if let Some(c) = s.strip_prefix("proposed-") {
            return Ok(MlaeMethod::Proposed(c.parse()?));
        }
        if let Some(t) = s.strip_prefix("mooney:") {
            let t: f64 = t
                .parse()
                .map_err(|_| QremError::Parse(format!("bad truncation threshold in {s:?}")))?;
            return Ok(MlaeMethod::Mooney(t));
        }
        Err(QremError::Parse(format!("unknown method {s:?}")))
    }
}

/// Zero-string weight of `counts` after the method's post-processing.
pub fn mitigated_zero_weight(
    counts: &SparseDistribution<f64>,
    model: &TensorNoiseModel<f64>,
    method: MlaeMethod,
) -> Result<f64> {
    let zero = BitString::zeros(counts.width());
    let out = match method {
        MlaeMethod::Raw => return Ok(counts.get(&zero)),
        MlaeMethod::Proposed(c) => mitigate(counts, model, &MitigateOptions::default().with_correction(c))?,
        MlaeMethod::Rigorous => rigorous_mitigate(counts, model, DEFAULT_FULL_QUBIT_CAP)?,
        MlaeMethod::Mooney(t) => mooney_mitigate(counts, model, t, DEFAULT_SUPPORT_CAP)?,
    };
    Ok(out.mitigated.get(&zero))
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub n: usize,
    pub b_max: f64,
    pub schedule: MlaeSchedule,
    /// Symmetric per-qubit flip probabilities.
    pub noise: Vec<f64>,
    pub methods: Vec<MlaeMethod>,
    pub trials: usize,
    pub seed: RandomSeed,
    pub residual_support: usize,
    pub grid_points: usize,
    pub sim_support_cap: usize,
}

impl ExperimentConfig {
    pub fn new(n: usize, shots: u64) -> Self {
        Self {
            n,
            b_max: 0.5,
            schedule: MlaeSchedule::doubling(shots),
            noise: vec![0.0],
            methods: vec![MlaeMethod::Raw],
            trials: 10,
            seed: RandomSeed(0),
            residual_support: DEFAULT_RESIDUAL_SUPPORT,
            grid_points: DEFAULT_GRID_POINTS,
            sim_support_cap: DEFAULT_SIM_SUPPORT_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: u64,
    pub queries: u64,
    pub theta_error_mean: f64,
    pub theta_error_std: f64,
    pub amplitude_error_mean: f64,
    pub amplitude_error_std: f64,
    /// Mean zero-string count per circuit before post-processing.
    pub raw_zero_count: f64,
    /// Mean zero-string quasi-count after post-processing.
    pub zero_count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodCurve {
    pub noise: f64,
    pub method: String,
    pub points: Vec<CurvePoint>,
}

impl MethodCurve {
    pub fn final_error(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.theta_error_mean)
    }

    /// Least-squares slope of `log(mean error)` against `log N_q`.
    pub fn loglog_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .map(|p| ((p.queries as f64).ln(), p.theta_error_mean.ln()))
            .collect();
        loglog_fit(&pts)
    }
}

pub fn loglog_fit(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub b_max: f64,
    pub shots: u64,
    pub iterations: Vec<u64>,
    pub trials: usize,
    pub seed: u64,
    pub theta_true: f64,
    pub amplitude_true: f64,
    /// Noiseless zero-string count per circuit, `N_shot·cos²(2mθ)`.
    pub ideal_zero_count: Vec<f64>,
    /// `c` of the `c/N_q` reference, from the first noiseless raw point.
    pub heisenberg_constant: Option<f64>,
    pub curves: Vec<MethodCurve>,
}

impl ExperimentReport {
    pub fn curve(&self, noise: f64, method: &str) -> Option<&MethodCurve> {
        self.curves.iter().find(|c| c.noise == noise && c.method == method)
    }
}

struct TrialTrace {
    raw_zero: Vec<f64>,
    zero: Vec<f64>,
    results: Vec<MlaeResult>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.trials == 0 {
        return Err(QremError::Domain("trials must be >= 1".into()));
    }
    if config.methods.is_empty() || config.noise.is_empty() {
        return Err(QremError::Domain("need at least one method and one noise level".into()));
    }
    let target = target_amplitude(config.n, config.b_max)?;
    let theta = target.theta;
    let width = config.n + 1;
    let shots = config.schedule.shots();
    let ideal: Vec<SparseDistribution<f64>> = config
        .schedule
        .iterations()
        .iter()
        .map(|&m| grover_ideal(config.n, m, theta, config.residual_support, config.seed))
        .collect::<Result<_>>()?;

    let mut curves = Vec::new();
    for (noise_idx, &p) in config.noise.iter().enumerate() {
        let model = TensorNoiseModel::synth_uniform(width, p, p)?;
        let noisy: Vec<Option<SparseDistribution<f64>>> = ideal
            .iter()
            .map(|d| match apply_noise_exact(d, &model, config.sim_support_cap) {
                Ok(y) => Ok(Some(y)),
                Err(e) if e.is_size_cap() => {
                    log::info!("noisy support over cap; sampling flips per shot instead");
                    Ok(None)
                }
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;

        // Counts depend on (noise level, depth, trial) only, so every method
        // sees the same samples.
        let samples: Vec<Vec<SparseDistribution<f64>>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                config
                    .schedule
                    .iterations()
                    .iter()
                    .enumerate()
                    .map(|(k, &m)| {
                        let mut rng = config.seed.rng(&[noise_idx as u64, m, trial as u64]);
                        match &noisy[k] {
                            Some(y) => sample_counts(y, shots, &mut rng),
                            None => sample_noisy_counts(&ideal[k], &model, shots, &mut rng),
                        }
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        for &method in &config.methods {
            let traces: Vec<TrialTrace> = samples
                .par_iter()
                .map(|counts| {
                    let zero = BitString::zeros(width);
                    let mut observations = Vec::with_capacity(counts.len());
                    let mut raw_zero = Vec::with_capacity(counts.len());
                    let mut zeros = Vec::with_capacity(counts.len());
                    for (c, &m) in counts.iter().zip(config.schedule.iterations()) {
                        let w = mitigated_zero_weight(c, &model, method)?;
                        let hits = (w * shots as f64).clamp(0.0, shots as f64);
                        raw_zero.push(c.get(&zero) * shots as f64);
                        zeros.push(hits);
                        observations.push(Observation {
                            m,
                            hits,
                            total: shots as f64,
                        });
                    }
                    let results = mle_theta(&observations, &config.schedule, Some(theta), config.grid_points)?;
                    Ok(TrialTrace {
                        raw_zero,
                        zero: zeros,
                        results,
                    })
                })
                .collect::<Result<_>>()?;
            curves.push(MethodCurve {
                noise: p,
                method: method.to_string(),
                points: aggregate(&traces, &config.schedule),
            });
        }
    }

    let heisenberg = curves
        .iter()
        .find(|c| c.noise == 0.0 && c.method == "raw")
        .and_then(|c| c.points.first())
        .map(|pt| heisenberg_constant(pt.queries, pt.theta_error_mean));
    Ok(ExperimentReport {
        n: config.n,
        b_max: config.b_max,
        shots,
        iterations: config.schedule.iterations().to_vec(),
        trials: config.trials,
        seed: config.seed.0,
        theta_true: theta,
        amplitude_true: target.discrete,
        ideal_zero_count: config
            .schedule
            .iterations()
            .iter()
            .map(|&m| shots as f64 * (2.0 * m as f64 * theta).cos().powi(2))
            .collect(),
        heisenberg_constant: heisenberg,
        curves,
    })
}

fn aggregate(traces: &[TrialTrace], schedule: &MlaeSchedule) -> Vec<CurvePoint> {
    let queries = schedule.query_counts();
    (0..queries.len())
        .map(|k| {
            let column = |f: &dyn Fn(&TrialTrace) -> f64| -> Vec<f64> { traces.iter().map(f).collect() };
            let (te, ts) = mean_std(&column(&|t| t.results[k].theta_error.unwrap_or(f64::NAN)));
            let (ae, as_) = mean_std(&column(&|t| t.results[k].amplitude_error.unwrap_or(f64::NAN)));
            CurvePoint {
                m: schedule.iterations()[k],
                queries: queries[k],
                theta_error_mean: te,
                theta_error_std: ts,
                amplitude_error_mean: ae,
                amplitude_error_std: as_,
                raw_zero_count: mean_std(&column(&|t| t.raw_zero[k])).0,
                zero_count: mean_std(&column(&|t| t.zero[k])).0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_observations(theta: f64, schedule: &MlaeSchedule) -> Vec<Observation> {
        schedule
            .iterations()
            .iter()
            .map(|&m| Observation {
                m,
                hits: schedule.shots() as f64 * (2.0 * m as f64 * theta).cos().powi(2),
                total: schedule.shots() as f64,
            })
            .collect()
    }

    #[test]
    fn schedule_rules() {
        let s = MlaeSchedule::doubling(100);
        assert_eq!(s.iterations(), &[1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(s.query_counts(), vec![100, 300, 700, 1500, 3100, 6300, 12700]);
        assert!(MlaeSchedule::new(vec![1, 1], 10).is_err());
        assert!(MlaeSchedule::new(vec![0, 1], 10).is_err());
        assert!(MlaeSchedule::new(vec![1], 0).is_err());
    }

    #[test]
    fn likelihood_value() {
        let obs = [Observation {
            m: 1,
            hits: 50.0,
            total: 100.0,
        }];
        let v = log_likelihood(std::f64::consts::FRAC_PI_8, &obs);
        assert!((v - 100.0 * 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn boundary_estimate_for_all_hits() {
        let obs = [Observation {
            m: 1,
            hits: 100.0,
            total: 100.0,
        }];
        let t = maximize_likelihood(&obs, 10_000);
        assert!(t < 1e-4);
    }

    #[test]
    fn exact_counts_recover_theta() {
        let schedule = MlaeSchedule::doubling(100);
        let theta = target_amplitude(10, 0.5).unwrap().theta;
        let obs = exact_observations(theta, &schedule);
        let res = mle_theta(&obs, &schedule, Some(theta), DEFAULT_GRID_POINTS).unwrap();
        for r in &res {
            assert!(r.theta_error.unwrap() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn heisenberg_reference_scales() {
        let c = heisenberg_constant(100, 0.01);
        assert!(c > 0.0);
        assert_eq!(heisenberg_reference(c, 200), heisenberg_reference(c, 100) / 2.0);
    }

    #[test]
    fn method_parsing() {
        for s in ["raw", "rigorous", "proposed-least-norm", "proposed-delta-exact:3", "mooney:0.01"] {
            assert_eq!(s.parse::<MlaeMethod>().unwrap().to_string(), s);
        }
        assert!("proposed-nope".parse::<MlaeMethod>().is_err());
    }

    #[test]
    fn small_experiment_is_reproducible() {
        let mut cfg = ExperimentConfig::new(4, 50);
        cfg.schedule = MlaeSchedule::new(vec![1, 2, 4], 50).unwrap();
        cfg.noise = vec![0.0, 0.05];
        cfg.methods = vec![MlaeMethod::Raw, MlaeMethod::Proposed(Correction::LeastNorm)];
        cfg.trials = 3;
        cfg.residual_support = 8;
        cfg.grid_points = 2_000;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.curves.len(), 4);
        assert!(a.heisenberg_constant.unwrap() > 0.0);
    }
}
