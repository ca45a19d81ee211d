//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector};
use qrem_core::correction::{delta_approx, delta_exact, least_norm};
use qrem_core::mlae::{run_experiment, ExperimentConfig, MlaeMethod, MlaeSchedule};
use qrem_core::observables::{
    expval_normalized, expval_raw, ghz_population, min_angle_count, mqc_angles, mqc_fidelity, parity_observable,
    MqcSignalSet,
};
use qrem_core::sim::{
    apply_noise_exact, ghz_ideal, mqc_ideal_signals, mqc_measurement_ideal, sample_counts, synthetic_ghz_counts,
    RandomSeed,
};
use qrem_core::{
    mitigate, mooney_mitigate, rigorous_mitigate, sgs_project, BitString, Correction, MitigateOptions,
    SparseDistribution, TensorNoiseModel,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn c1_step1_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomSeed(101).rng(&[]);
    let mut worst_rig: f64 = 0.0;
    let mut worst_dense: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let model = random_per_qubit_model(n, 0.1, &mut rng);
        let y = random_counts(n, &mut rng);
        let ours = dense_of(&mitigate(&y, &model, &MitigateOptions::default()).unwrap().mitigated);
        let rig = dense_of(&rigorous_mitigate(&y, &model, 14).unwrap().mitigated);
        worst_rig = worst_rig.max(max_abs_diff(&ours, &rig));
        worst_dense = worst_dense.max(max_abs_diff(&ours, &dense_pipeline(&model, &y)));
    }
    let t = start.elapsed();
    outcome(
        worst_rig < 1e-9 && worst_dense < 1e-9 && within(t, 10.0),
        format!("50 models: max diff vs rigorous {worst_rig:.1e}, vs dense LU {worst_dense:.1e}, {t:.2?}"),
    )
}

fn c2_simplex_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomSeed(102).rng(&[]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.random_range(1..=64);
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..1.0)).collect();
        let shift = (1.0 - v.iter().sum::<f64>()) / dim as f64;
        v.iter_mut().for_each(|x| *x += shift);
        let p = sgs_project(&v, 1e-9).unwrap();
        worst = worst.max(max_abs_diff(&p.values, &simplex_oracle(&v)));
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-9 && within(t, 5.0),
        format!("1000 vectors: max diff vs sort-and-threshold {worst:.1e}, {t:.2?}"),
    )
}

fn kkt_objective(gram: &DMatrix<f64>, a: &DMatrix<f64>, r: f64) -> f64 {
    let dim = gram.nrows();
    let mut kkt = DMatrix::zeros(dim + 1, dim + 1);
    kkt.view_mut((0, 0), (dim, dim)).copy_from(&(gram * 2.0));
    for i in 0..dim {
        kkt[(i, dim)] = 1.0;
        kkt[(dim, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(dim + 1);
    rhs[dim] = r;
    let sol = kkt.lu().solve(&rhs).unwrap();
    (a * sol.rows(0, dim)).norm_squared()
}

fn c3_correction_identities() -> Outcome {
    let mut rng = RandomSeed(103).rng(&[]);

    let mut ln_sum: f64 = 0.0;
    let mut ln_oracle: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(1..100);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-0.2..0.5)).collect();
        let r = least_norm(&x).unwrap();
        ln_sum = ln_sum.max((r.achieved_sum - 1.0).abs());
        let gram = DMatrix::identity(len, len);
        let oracle_obj = kkt_objective(&gram, &gram, 1.0 - x.iter().sum::<f64>());
        ln_oracle = ln_oracle.max((r.correction_norm.powi(2) - oracle_obj).abs());
    }

    // Symmetric models: leading direction is uniform, so the shift is (1 − Σx)/2^n.
    let mut approx_rel: f64 = 0.0;
    for n in 1..=10 {
        let p = rng.random_range(0.0..0.1);
        let model = TensorNoiseModel::synth_uniform(n, p, p).unwrap();
        let mut subspace: Vec<BitString> = (0..rng.random_range(1..50))
            .map(|_| BitString::from_index(rng.random_range(0..1u64 << n), n))
            .collect();
        subspace.sort();
        subspace.dedup();
        let x: Vec<f64> = (0..subspace.len()).map(|_| rng.random_range(0.0..0.05)).collect();
        let r = delta_approx(&x, &subspace, &model).unwrap();
        let ln_shift = (1.0 - x.iter().sum::<f64>()) / subspace.len() as f64;
        let expected = ln_shift * subspace.len() as f64 / (1u64 << n) as f64;
        for (c, v) in r.corrected.iter().zip(&x) {
            approx_rel = approx_rel.max(((c - v) - expected).abs() / expected.abs());
        }
    }

    let mut exact_gap: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..=4);
        let model = random_block_model(n, 2, 0.1, &mut rng);
        let a = dense_calibration(&model);
        let subspace: Vec<BitString> = (0..1u64 << n).map(|i| BitString::from_index(i, n)).collect();
        let x: Vec<f64> = (0..1usize << n).map(|_| rng.random_range(-0.05..0.2)).collect();
        let r = 1.0 - x.iter().sum::<f64>();
        let ours = delta_exact(&x, &subspace, &model, 1 << n).unwrap();
        let delta = DVector::from_iterator(x.len(), ours.corrected.iter().zip(&x).map(|(c, v)| c - v));
        let obj = (&a * delta).norm_squared();
        exact_gap = exact_gap.max((obj - kkt_objective(&(a.transpose() * &a), &a, r)).abs());
    }

    outcome(
        ln_sum < 1e-12 && ln_oracle < 1e-12 && approx_rel < 1e-12 && exact_gap < 1e-8,
        format!(
            "least-norm |sum-1| {ln_sum:.1e}, vs QP {ln_oracle:.1e}; delta vs scaled uniform rel {approx_rel:.1e}; \
             delta-exact objective gap {exact_gap:.1e}"
        ),
    )
}

fn c4_ghz_expectation() -> Outcome {
    let start = Instant::now();
    let (n, p, shots) = (10usize, 0.03f64, 8192u64);
    let model = TensorNoiseModel::synth_uniform(n, p, p).unwrap();
    let noisy = apply_noise_exact(&ghz_ideal(n).unwrap(), &model, 1 << 20).unwrap();
    let parity = parity_observable(n).unwrap();
    let (mut raw, mut mit, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..10 {
        let y = sample_counts(&noisy, shots, &mut RandomSeed(seed).rng(&[4])).unwrap();
        raw.push(expval_raw(&y, &parity));
        let rep = mitigate(&y, &model, &MitigateOptions::default()).unwrap();
        mit.push(expval_normalized(&rep.mitigated, &parity).unwrap());
        sigma.push(parity.bound() * rep.sigma.unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let expected = (1.0 - 2.0 * p).powi(n as i32);
    let (raw_mean, mit_mean, sigma_mean) = (mean(&raw), mean(&mit), mean(&sigma));
    let t = start.elapsed();
    outcome(
        (raw_mean - expected).abs() <= 0.05 && (mit_mean - 1.0).abs() <= 3.0 * sigma_mean && within(t, 30.0),
        format!(
            "raw parity {raw_mean:.4} vs (1-2p)^n = {expected:.4}; mitigated {mit_mean:.4}, sigma_O {sigma_mean:.4}, {t:.2?}"
        ),
    )
}

fn noisy_sample(
    ideal: &SparseDistribution<f64>,
    model: &TensorNoiseModel<f64>,
    shots: u64,
    rng: &mut impl Rng,
) -> SparseDistribution<f64> {
    sample_counts(&apply_noise_exact(ideal, model, 1 << 20).unwrap(), shots, rng).unwrap()
}

fn c5_fidelity() -> Outcome {
    let mut ideal_gap: f64 = 0.0;
    for n in [4usize, 8, 12] {
        let f = mqc_fidelity(1.0f64, &mqc_ideal_signals(n, min_angle_count(n)).unwrap()).unwrap();
        ideal_gap = ideal_gap.max((f.fidelity - 1.0).abs());
    }

    let (n, p, shots) = (8usize, 0.03, 8192u64);
    let model = TensorNoiseModel::synth_uniform(n, p, p).unwrap();
    let zero = BitString::zeros(n);
    let angles = mqc_angles::<f64>(min_angle_count(n));
    let mut wins = 0;
    let mut last = (0.0, 0.0);
    for seed in 0..10u64 {
        let mut rng = RandomSeed(seed).rng(&[5]);
        let pop = noisy_sample(&ghz_ideal(n).unwrap(), &model, shots, &mut rng);
        let pop_mit = mitigate(&pop, &model, &MitigateOptions::default()).unwrap().mitigated;
        let (mut raw_s, mut mit_s) = (Vec::new(), Vec::new());
        for &phi in &angles {
            let y = noisy_sample(&mqc_measurement_ideal(n, phi).unwrap(), &model, shots, &mut rng);
            raw_s.push(y.get(&zero));
            mit_s.push(mitigate(&y, &model, &MitigateOptions::default()).unwrap().mitigated.get(&zero));
        }
        let raw = mqc_fidelity(ghz_population(&pop), &MqcSignalSet::new(n, raw_s).unwrap()).unwrap();
        let mit = mqc_fidelity(ghz_population(&pop_mit).min(1.0), &MqcSignalSet::new(n, mit_s).unwrap()).unwrap();
        if mit.fidelity > raw.fidelity {
            wins += 1;
        }
        last = (raw.fidelity, mit.fidelity);
    }
    outcome(
        ideal_gap < 1e-9 && wins >= 9,
        format!(
            "ideal |F-1| {ideal_gap:.1e} (n = 4, 8, 12); noisy n={n}: mitigated > raw in {wins}/10 seeds \
             (last seed raw {:.4}, mitigated {:.4})",
            last.0, last.1
        ),
    )
}

fn c6_mlae() -> Outcome {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::new(10, 100);
    cfg.schedule = MlaeSchedule::doubling(100);
    cfg.noise = vec![0.0, 0.03];
    cfg.methods = vec![MlaeMethod::Raw, MlaeMethod::Proposed(Correction::LeastNorm)];
    cfg.trials = 10;
    cfg.seed = RandomSeed(106);
    let report = run_experiment(&cfg).unwrap();
    let noiseless = report.curve(0.0, "raw").unwrap();
    let raw = report.curve(0.03, "raw").unwrap();
    let mitigated = report.curve(0.03, "proposed-least-norm").unwrap();
    let plateau = raw.final_error() > 3.0 * noiseless.final_error();
    let slope = mitigated.loglog_slope();
    let t = start.elapsed();
    outcome(
        plateau && (-1.3..=-0.7).contains(&slope) && mitigated.final_error() < raw.final_error() && within(t, 300.0),
        format!(
            "final error noiseless {:.2e}, raw {:.2e}, mitigated {:.2e}; mitigated slope {slope:.2}; {t:.2?}",
            noiseless.final_error(),
            raw.final_error(),
            mitigated.final_error()
        ),
    )
}

fn timed_mitigation(y: &SparseDistribution<f64>, model: &TensorNoiseModel<f64>, threads: usize) -> (f64, f64) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let rep = pool.install(|| mitigate(y, model, &MitigateOptions::default()).unwrap());
    (rep.elapsed.total.as_secs_f64(), rep.elapsed.inverse.as_secs_f64())
}

fn c7_performance() -> Outcome {
    let n = 65;
    let model = TensorNoiseModel::synth_uniform(n, 0.03, 0.03).unwrap();
    let mut rng = RandomSeed(107).rng(&[]);
    let y = synthetic_ghz_counts(n, 8192, 0.03, &mut rng).unwrap();
    let (single, _) = timed_mitigation(&y, &model, 1);
    let (four, _) = timed_mitigation(&y, &model, 4);

    let mut points = Vec::new();
    let mut times = Vec::new();
    for size in [1024usize, 2048, 4096, 8192] {
        let ys = synthetic_ghz_counts(n, size, 0.03, &mut rng).unwrap();
        let step1 = (0..5).map(|_| timed_mitigation(&ys, &model, 1).1).fold(f64::INFINITY, f64::min);
        points.push(((size as f64).ln(), step1.ln()));
        times.push(format!("{size}:{:.3}s", step1));
    }
    let slope = qrem_core::mlae::loglog_fit(&points);
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    outcome(
        single <= 30.0 && four <= 10.0 && (slope - 2.0).abs() <= 0.3,
        format!(
            "n=65 |S|=8192: 1 thread {single:.2}s, 4 threads {four:.2}s ({cores} core(s) available); \
             step-1 log-log slope {slope:.2} ({})",
            times.join(" ")
        ),
    )
}

fn c8_baselines() -> Outcome {
    let mut rng = RandomSeed(108).rng(&[]);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.random_range(1..=6);
        let model = random_per_qubit_model(n, 0.1, &mut rng);
        let y = random_counts(n, &mut rng);
        let a = dense_of(&mooney_mitigate(&y, &model, 0.0, 1 << 20).unwrap().mitigated);
        let b = dense_of(&rigorous_mitigate(&y, &model, 14).unwrap().mitigated);
        worst = worst.max(max_abs_diff(&a, &b));
    }

    let mut fixtures = 0;
    let mut held = 0;
    for n in [4usize, 6, 8, 10] {
        let model = TensorNoiseModel::synth_uniform(n, 0.03, 0.03).unwrap();
        for seed in 0..3 {
            let y = noisy_sample(&ghz_ideal(n).unwrap(), &model, 8192, &mut RandomSeed(seed).rng(&[8, n as u64]));
            let m = mooney_mitigate(&y, &model, 0.01, 1 << 20).unwrap();
            fixtures += 1;
            if ghz_population(&m.mitigated) >= ghz_population(&y) {
                held += 1;
            }
        }
    }
    outcome(
        worst < 1e-9 && held == fixtures,
        format!("t=0 vs rigorous max diff {worst:.1e}; t=0.01 population >= raw in {held}/{fixtures} GHZ fixtures"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 step-1 oracle equivalence", c1_step1_oracle),
        ("2 simplex projection oracle", c2_simplex_oracle),
        ("3 correction identities", c3_correction_identities),
        ("4 GHZ parity recovery", c4_ghz_expectation),
        ("5 fidelity pipeline", c5_fidelity),
        ("6 MLAE under readout noise", c6_mlae),
        ("7 performance at n=65", c7_performance),
        ("8 baseline consistency", c8_baselines),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = check();
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
