use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use qrem_core::baselines::{mooney_mitigate, rigorous_mitigate};
use qrem_core::mitigator::{mitigate, MitigateOptions, MitigationReport};
use qrem_core::mlae::{heisenberg_reference, run_experiment, ExperimentConfig, MlaeMethod, MlaeSchedule};
use qrem_core::observables::{
    expval_normalized, expval_raw, ghz_population, min_angle_count, mqc_angles, mqc_fidelity, parity_observable,
    projector_observable, DiagonalObservable, MqcSignalSet,
};
use qrem_core::sim::{
    apply_noise_exact, ghz_ideal, grover_ideal, mqc_measurement_ideal, sample_counts, sample_noisy_counts,
    synthetic_ghz_counts, target_amplitude, RandomSeed,
};
use qrem_core::{BitString, QremError, Result, SparseDistribution, TensorNoiseModel};

use crate::args::*;
use crate::output::*;

/// Name the file in I/O errors.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        QremError::Io(io) => QremError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn read_counts(path: &Path) -> Result<SparseDistribution<f64>> {
    at(path, SparseDistribution::read_json(path))
}

fn read_model(path: &Path) -> Result<TensorNoiseModel<f64>> {
    at(path, TensorNoiseModel::read_json(path))
}

fn resolve_method(args: &MethodArgs) -> Result<MlaeMethod> {
    if args.method == "proposed" {
        Ok(MlaeMethod::Proposed(args.correction))
    } else {
        args.method.parse()
    }
}

/// `None` for `raw`.
fn run_method(
    y: &SparseDistribution<f64>,
    model: &TensorNoiseModel<f64>,
    args: &MethodArgs,
    caps: &Caps,
) -> Result<Option<MitigationReport<f64>>> {
    let report = match resolve_method(args)? {
        MlaeMethod::Raw => return Ok(None),
        MlaeMethod::Proposed(correction) => {
            let options = MitigateOptions {
                correction,
                hamming_radius: args.radius,
                matrix_free: args.matrix_free,
                subspace_cap: caps.subspace_cap,
                ..MitigateOptions::default()
            };
            mitigate(y, model, &options)?
        }
        MlaeMethod::Rigorous => rigorous_mitigate(y, model, caps.rigorous_max_qubits)?,
        MlaeMethod::Mooney(t) => mooney_mitigate(y, model, t, caps.mooney_support_cap)?,
    };
    Ok(Some(report))
}

fn noise_model(args: &NoiseArgs, width: usize) -> Result<TensorNoiseModel<f64>> {
    match &args.noise_model {
        Some(path) => {
            let model = read_model(path)?;
            model.check_width(width)?;
            Ok(model)
        }
        None => TensorNoiseModel::synth_uniform(width, args.p01, args.p10),
    }
}

/// Noisy readout of `ideal`: exact for `shots == 0`, otherwise sampled. When
/// the exact noisy support would exceed the cap, flips are drawn per shot.
fn noisy_readout<R: Rng>(
    ideal: &SparseDistribution<f64>,
    model: &TensorNoiseModel<f64>,
    shots: u64,
    rng: &mut R,
    cap: usize,
) -> Result<SparseDistribution<f64>> {
    if shots == 0 {
        return apply_noise_exact(ideal, model, cap);
    }
    match apply_noise_exact(ideal, model, cap) {
        Ok(y) => sample_counts(&y, shots, rng),
        Err(e) if e.is_size_cap() => sample_noisy_counts(ideal, model, shots, rng),
        Err(e) => Err(e),
    }
}

pub fn mitigate_cmd(args: &MitigateArgs, caps: &Caps) -> Result<()> {
    check_output(args.out.as_deref())?;
    check_output(args.report.as_deref())?;
    let y = read_counts(&args.counts)?;
    let model = read_model(&args.calibration)?;
    let report = run_method(&y, &model, &args.method, caps)?
        .ok_or_else(|| QremError::Parse("`raw` is not a mitigation method".into()))?;
    emit_json(&distribution_json(&report.mitigated), args.out.as_deref())?;
    if let Some(path) = &args.report {
        emit_json(&report.summary_json(), Some(path))?;
    }
    log::info!(
        "{}: |S| = {}, M = {:.4}, total {:.3?}",
        report.method,
        report.subspace_size,
        report.overhead,
        report.elapsed.total
    );
    Ok(())
}

fn parse_per_qubit(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| QremError::Parse(format!("expected p01:p10, got {pair:?}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| QremError::Parse(format!("bad probability {s:?}")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

pub fn calibrate_cmd(args: &CalibrateArgs) -> Result<()> {
    check_output(args.out.as_deref())?;
    let model = match &args.per_qubit {
        Some(text) => {
            let probs = parse_per_qubit(text)?;
            if probs.len() != args.n {
                return Err(QremError::Parse(format!(
                    "{} pairs given for {} qubits",
                    probs.len(),
                    args.n
                )));
            }
            TensorNoiseModel::synth_per_qubit(&probs)?
        }
        None => TensorNoiseModel::synth_uniform(args.n, args.p01, args.p10)?,
    };
    emit_json(&tagged(CALIBRATION_SCHEMA, model.to_json()), args.out.as_deref())
}

fn with_meta(mut value: serde_json::Value, meta: serde_json::Value) -> serde_json::Value {
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("meta".into(), meta);
    }
    value
}

pub fn ghz_cmd(args: &GhzArgs, caps: &Caps) -> Result<()> {
    check_output(args.out.as_deref())?;
    let model = noise_model(&args.noise, args.n)?;
    let mut rng = RandomSeed(args.seed).rng(&[]);
    let y = noisy_readout(&ghz_ideal(args.n)?, &model, args.shots, &mut rng, caps.sim_support_cap)?;
    let meta = json!({ "source": "ghz", "n": args.n, "seed": args.seed });
    emit_json(&with_meta(distribution_json(&y), meta), args.out.as_deref())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MqcManifest {
    pub schema: String,
    pub n: usize,
    pub angles: Vec<f64>,
    /// Paths relative to the manifest.
    pub population: PathBuf,
    pub signals: Vec<PathBuf>,
}

pub fn mqc_cmd(args: &MqcArgs, caps: &Caps) -> Result<()> {
    let count = args.angles.unwrap_or_else(|| min_angle_count(args.n));
    if count < min_angle_count(args.n) {
        return Err(QremError::Aliasing {
            angles: count,
            order: args.n,
            required: min_angle_count(args.n),
        });
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let model = noise_model(&args.noise, args.n)?;
    let seed = RandomSeed(args.seed);

    let population = noisy_readout(&ghz_ideal(args.n)?, &model, args.shots, &mut seed.rng(&[0]), caps.sim_support_cap)?;
    emit_json(&distribution_json(&population), Some(&args.out_dir.join("population.json")))?;

    let angles = mqc_angles::<f64>(count);
    let mut signals = Vec::with_capacity(count);
    for (j, &phi) in angles.iter().enumerate() {
        let ideal = mqc_measurement_ideal(args.n, phi)?;
        let y = noisy_readout(&ideal, &model, args.shots, &mut seed.rng(&[1, j as u64]), caps.sim_support_cap)?;
        let name = PathBuf::from(format!("phi_{j:03}.json"));
        emit_json(&distribution_json(&y), Some(&args.out_dir.join(&name)))?;
        signals.push(name);
    }
    let manifest = MqcManifest {
        schema: MQC_MANIFEST_SCHEMA.into(),
        n: args.n,
        angles,
        population: "population.json".into(),
        signals,
    };
    emit_json(&serde_json::to_value(&manifest)?, Some(&args.out_dir.join("manifest.json")))
}

pub fn grover_cmd(args: &GroverArgs, caps: &Caps) -> Result<()> {
    check_output(args.out.as_deref())?;
    let theta = match args.theta {
        Some(t) => t,
        None => target_amplitude(args.n, args.bmax)?.theta,
    };
    let seed = RandomSeed(args.seed);
    let ideal = grover_ideal(args.n, args.m, theta, args.residual, seed)?;
    let model = noise_model(&args.noise, args.n + 1)?;
    let y = noisy_readout(&ideal, &model, args.shots, &mut seed.rng(&[args.m]), caps.sim_support_cap)?;
    let meta = json!({
        "source": "grover",
        "n": args.n,
        "m": args.m,
        "theta": theta,
        "ideal_zero_probability": (2.0 * args.m as f64 * theta).cos().powi(2),
        "seed": args.seed,
    });
    emit_json(&with_meta(distribution_json(&y), meta), args.out.as_deref())
}

fn observable(kind: ObservableKind, n: usize) -> Result<DiagonalObservable<f64>> {
    match kind {
        ObservableKind::Parity => parity_observable(n),
        ObservableKind::Zeros => Ok(projector_observable(BitString::zeros(n))),
        ObservableKind::Ghz => {
            let (zeros, ones) = (BitString::zeros(n), BitString::ones(n));
            DiagonalObservable::new("ghz-population", 1.0, move |s: &BitString| {
                if *s == zeros || *s == ones {
                    1.0
                } else {
                    0.0
                }
            })
        }
    }
}

pub fn expval_cmd(args: &ExpvalArgs, caps: &Caps) -> Result<()> {
    check_output(args.out.as_deref())?;
    let y = read_counts(&args.counts)?;
    let report = match &args.calibration {
        Some(path) => run_method(&y, &read_model(path)?, &args.method, caps)?,
        None => None,
    };
    let o = observable(args.observable, y.width())?;
    let p = report.as_ref().map_or(&y, |r| &r.mitigated);
    let value = match args.convention {
        Convention::Normalized => expval_normalized(p, &o)?,
        Convention::Raw => expval_raw(p, &o),
    };
    let out = json!({
        "schema": EXPVAL_SCHEMA,
        "value": value,
        "sigma": report.as_ref().and_then(|r| r.sigma).map(|s| s * o.bound()),
        "method": report.as_ref().map_or_else(|| "raw".to_string(), |r| r.method.clone()),
        "n": y.width(),
        "observable": o.name(),
        "convention": match args.convention {
            Convention::Normalized => "normalized",
            Convention::Raw => "raw",
        },
        "element_sum": p.element_sum(),
    });
    emit_json(&out, args.out.as_deref())
}

pub fn fidelity_cmd(args: &FidelityArgs, caps: &Caps) -> Result<()> {
    check_output(args.out.as_deref())?;
    let text = at(&args.manifest, std::fs::read_to_string(&args.manifest).map_err(QremError::from))?;
    let manifest: MqcManifest = serde_json::from_str(&text)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let model = args
        .calibration
        .as_ref()
        .map(|p| read_model(p))
        .transpose()?;
    let process = |path: &Path| -> Result<(SparseDistribution<f64>, String)> {
        let y = read_counts(&base.join(path))?;
        match &model {
            Some(m) => match run_method(&y, m, &args.method, caps)? {
                Some(r) => Ok((r.mitigated, r.method)),
                None => Ok((y, "raw".into())),
            },
            None => Ok((y, "raw".into())),
        }
    };
    let (pop, method) = process(&manifest.population)?;
    let zero = BitString::zeros(manifest.n);
    let signals: Vec<f64> = manifest
        .signals
        .iter()
        .map(|p| process(p).map(|(d, _)| d.get(&zero)))
        .collect::<Result<_>>()?;
    let set = MqcSignalSet::new(manifest.n, signals)?;
    let f = mqc_fidelity(ghz_population(&pop).clamp(0.0, 1.0), &set)?;
    let out = json!({
        "schema": FIDELITY_SCHEMA,
        "n": manifest.n,
        "method": method,
        "angles": set.angle_count(),
        "population": f.population,
        "coherence": f.coherence,
        "fourier_magnitude": f.fourier,
        "fidelity": f.fidelity,
        "signals": set.signals(),
    });
    emit_json(&out, args.out.as_deref())
}

#[derive(Serialize)]
struct CurveRow<'a> {
    noise: f64,
    method: &'a str,
    m: u64,
    queries: u64,
    theta_error_mean: f64,
    theta_error_std: f64,
    amplitude_error_mean: f64,
    amplitude_error_std: f64,
    raw_zero_count: f64,
    zero_count: f64,
    heisenberg_reference: Option<f64>,
}

pub fn mlae_cmd(args: &MlaeArgs, caps: &Caps) -> Result<()> {
    check_output(args.out.as_deref())?;
    check_output(args.csv.as_deref())?;
    let methods = args
        .methods
        .iter()
        .map(|m| {
            if m == "proposed" {
                Ok(MlaeMethod::Proposed(qrem_core::Correction::LeastNorm))
            } else {
                m.parse()
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = ExperimentConfig::new(args.n, args.shots);
    cfg.b_max = args.bmax;
    cfg.schedule = MlaeSchedule::new(args.iterations.clone(), args.shots)?;
    cfg.noise = args.noise.clone();
    cfg.methods = methods;
    cfg.trials = args.trials;
    cfg.seed = RandomSeed(args.seed);
    cfg.residual_support = args.residual;
    cfg.grid_points = args.grid;
    cfg.sim_support_cap = caps.sim_support_cap;
    let report = run_experiment(&cfg)?;

    let reference: Option<Vec<f64>> = report.heisenberg_constant.map(|c| {
        cfg.schedule
            .query_counts()
            .into_iter()
            .map(|q| heisenberg_reference(c, q))
            .collect()
    });
    let mut value = tagged(MLAE_SCHEMA, serde_json::to_value(&report)?);
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("queries".into(), json!(cfg.schedule.query_counts()));
        map.insert("heisenberg_reference".into(), json!(reference));
    }
    emit_json(&value, args.out.as_deref())?;

    if let Some(path) = &args.csv {
        let rows: Vec<CurveRow> = report
            .curves
            .iter()
            .flat_map(|c| {
                c.points.iter().enumerate().map(|(k, p)| CurveRow {
                    noise: c.noise,
                    method: &c.method,
                    m: p.m,
                    queries: p.queries,
                    theta_error_mean: p.theta_error_mean,
                    theta_error_std: p.theta_error_std,
                    amplitude_error_mean: p.amplitude_error_mean,
                    amplitude_error_std: p.amplitude_error_std,
                    raw_zero_count: p.raw_zero_count,
                    zero_count: p.zero_count,
                    heisenberg_reference: reference.as_ref().map(|r| r[k]),
                })
            })
            .collect();
        emit_csv(&rows, Some(path))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    subspace: usize,
    correction: String,
    mode: &'static str,
    threads: usize,
    step1_s: f64,
    step2_s: f64,
    step3_s: f64,
    total_s: f64,
    overhead: f64,
    rigorous_s: Option<f64>,
}

pub fn bench_cmd(args: &BenchArgs, caps: &Caps) -> Result<()> {
    check_output(args.csv.as_deref())?;
    let seed = RandomSeed(args.seed);
    let options = MitigateOptions {
        correction: args.correction,
        matrix_free: args.matrix_free,
        subspace_cap: caps.subspace_cap,
        ..MitigateOptions::default()
    };
    let mut rows = Vec::new();
    for &n in &args.qubits {
        let model = TensorNoiseModel::synth_uniform(n, args.p, args.p)?;
        for &size in &args.sizes {
            if n < 63 && size as u64 > 1u64 << n {
                log::warn!("skipping |S| = {size} at n = {n}: only 2^{n} outcomes exist");
                continue;
            }
            let y = synthetic_ghz_counts(n, size, args.p, &mut seed.rng(&[n as u64, size as u64]))?;
            let mut best: Option<MitigationReport<f64>> = None;
            for _ in 0..args.repeats.max(1) {
                let r = mitigate(&y, &model, &options)?;
                if best.as_ref().is_none_or(|b| r.elapsed.total < b.elapsed.total) {
                    best = Some(r);
                }
            }
            let best = best.expect("at least one repeat");
            let rigorous_s = if n <= caps.rigorous_max_qubits {
                let start = Instant::now();
                rigorous_mitigate(&y, &model, caps.rigorous_max_qubits)?;
                Some(start.elapsed().as_secs_f64())
            } else {
                None
            };
            log::info!("n = {n}, |S| = {size}: {:.3?}", best.elapsed.total);
            rows.push(BenchRow {
                n,
                subspace: best.subspace_size,
                correction: args.correction.to_string(),
                mode: if args.matrix_free { "matrix-free" } else { "explicit" },
                threads: rayon::current_num_threads(),
                step1_s: best.elapsed.inverse.as_secs_f64(),
                step2_s: best.elapsed.correction.as_secs_f64(),
                step3_s: best.elapsed.projection.as_secs_f64(),
                total_s: best.elapsed.total.as_secs_f64(),
                overhead: best.overhead,
                rigorous_s,
            });
        }
    }
    emit_csv(&rows, args.csv.as_deref())
}
