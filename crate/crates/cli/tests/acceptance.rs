//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use kconv::audiofeat::{compute_spectrogram, design_filterbank, AudioClip, FilterbankSpec};
use kconv::decoder::{
    fit_dual, fit_ml, fit_primal_ridge, gram_matrix, select_lambda_loo, FitOptions, KernelSpec,
    LambdaGrid,
};
use kconv::eval::{
    feature_score, fold_pairs, lag_sweep, leave_two_out_cv, pair_correlation_test, CvConfig,
    PairFilter,
};
use kconv::lagging::{build_lagged_design, BuildOptions, LagSpec, LaggedDesign, RowIndex, TargetMatrix};
use kconv::synth::{generate, FrameCount, SynthConfig};
use kconv::tensorio::{Dataset, Spectrogram};
use kconv::Error;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn raw() -> FitOptions {
    FitOptions {
        standardize: false,
        ..FitOptions::default()
    }
}

fn system(x: DMatrix<f64>, y: DMatrix<f64>) -> (LaggedDesign, TargetMatrix) {
    let row_index: Vec<RowIndex> = (0..x.nrows())
        .map(|frame| RowIndex {
            stimulus_id: "s".into(),
            frame,
        })
        .collect();
    (
        LaggedDesign {
            channel_names: (0..x.ncols()).map(|i| format!("c{i}")).collect(),
            rows: x,
            row_index: row_index.clone(),
            lag_spec: LagSpec::new(0.0, 10.0).unwrap(),
        },
        TargetMatrix {
            center_freqs_hz: (0..y.ncols()).map(|f| (f + 1) as f64).collect(),
            values: y,
            row_index,
        },
    )
}

fn all_ids(ds: &Dataset) -> Vec<String> {
    ds.ids().map(str::to_string).collect()
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(10..=60);
        let d = rng.random_range(5..=200);
        let f = rng.random_range(1..=4);
        let (design, targets) = system(normal(n, d, &mut rng), normal(n, f, &mut rng));
        let lambdas: Vec<f64> = (0..f)
            .map(|k| [1e-3, 1.0, 1e3][k % 3] * n as f64)
            .collect();
        let p = fit_primal_ridge(&design, &targets, &lambdas, &raw()).map_err(|e| e.to_string())?;
        let q = fit_dual(&design, &targets, &lambdas, KernelSpec::Linear, &raw()).map_err(|e| e.to_string())?;
        let g = p.primal_g.as_ref().unwrap();
        worst = worst.max(rel(&q.implied_primal().unwrap(), g));
        let test = normal(7, d, &mut rng);
        let via_primal = &test * g;
        let via_dual = gram_matrix(&test, &design.rows, &KernelSpec::Linear).unwrap() * q.dual_alpha.as_ref().unwrap();
        worst = worst.max(rel(&via_dual, &via_primal));
    }
    check(worst < 1e-8, format!("max relative disagreement {worst:.2e} over 50 instances"))
}

fn brute_force_loo(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64, kernel: &KernelSpec) -> Vec<f64> {
    let n = x.nrows();
    let mut sq = vec![0.0; y.ncols()];
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let xk = x.select_rows(keep.iter());
        let yk = y.select_rows(keep.iter());
        let xi = x.rows(i, 1).into_owned();
        let k = gram_matrix(&xk, &xk, kernel).unwrap();
        let alpha = LU::new(k + DMatrix::identity(n - 1, n - 1) * lambda).solve(&yk).unwrap();
        let pred = gram_matrix(&xi, &xk, kernel).unwrap() * alpha;
        for f in 0..y.ncols() {
            sq[f] += (y[(i, f)] - pred[(0, f)]).powi(2);
        }
    }
    sq.iter().map(|s| s / n as f64).collect()
}

fn fast_loo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let grid = LambdaGrid::new(vec![0.1, 1.0, 10.0]).unwrap();
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let n = rng.random_range(8..=30);
        let d = rng.random_range(2..=40);
        let f = rng.random_range(1..=3);
        let kernel = if inst % 2 == 0 {
            KernelSpec::Linear
        } else {
            KernelSpec::gaussian(1.0 / d as f64).unwrap()
        };
        let x = normal(n, d, &mut rng);
        let y = normal(n, f, &mut rng);
        let (design, targets) = system(x.clone(), y.clone());
        let sel = select_lambda_loo(&design, &targets, &grid, kernel, &raw()).map_err(|e| e.to_string())?;
        for (g, &lambda) in grid.values().iter().enumerate() {
            let oracle = brute_force_loo(&x, &y, lambda, &kernel);
            for (k, o) in oracle.iter().enumerate() {
                worst = worst.max((sel.loo_errors[(g, k)] - o).abs() / o.max(1.0));
            }
        }
    }
    check(worst <= 1e-8, format!("max LOO error discrepancy {worst:.2e} over 20 instances"))
}

fn ml_recovery() -> Outcome {
    let cfg = SynthConfig {
        n_stimuli: 6,
        channels: 6,
        freq_channels: 8,
        frames: FrameCount::Fixed(80),
        lag_bins_true: 4,
        snr: f64::INFINITY,
        seed: 303,
        ..SynthConfig::default()
    };
    let (ds, truth) = generate(&cfg).map_err(|e| e.to_string())?;
    let ids = all_ids(&ds);
    let (design, targets) = build_lagged_design(&ds, &cfg.true_lag(), &ids, BuildOptions::default()).unwrap();
    let g = fit_ml(&design, &targets, &raw()).map_err(|e| e.to_string())?.primal_g.unwrap();
    let err = rel(&g, &truth.true_g);

    let mixed = SynthConfig {
        mixing_rank: Some(3),
        ..cfg.clone()
    };
    let (ds, _) = generate(&mixed).map_err(|e| e.to_string())?;
    let (design, targets) = build_lagged_design(&ds, &mixed.true_lag(), &ids, BuildOptions::default()).unwrap();
    let refused = matches!(fit_ml(&design, &targets, &raw()), Err(Error::IllConditioned { .. }));
    check(
        err < 1e-8 && refused,
        format!("recovery error {err:.2e}; correlated channels refused: {refused}"),
    )
}

fn base_synth(seed: u64, snr: f64) -> SynthConfig {
    SynthConfig {
        n_stimuli: 12,
        channels: 8,
        freq_channels: 16,
        frames: FrameCount::Fixed(100),
        lag_bins_true: 3,
        snr,
        seed,
        ..SynthConfig::default()
    }
}

fn synthetic_decoding() -> Outcome {
    let cfg = base_synth(404, 10.0);
    let (ds, _) = generate(&cfg).map_err(|e| e.to_string())?;
    let high = leave_two_out_cv(&ds, &CvConfig::new(cfg.true_lag())).map_err(|e| e.to_string())?;

    let (mut correct, mut total) = (0, 0);
    for seed in 0..10 {
        let cfg = base_synth(4040 + seed, 1e-6);
        let (ds, _) = generate(&cfg).map_err(|e| e.to_string())?;
        let r = leave_two_out_cv(&ds, &CvConfig::new(cfg.true_lag())).map_err(|e| e.to_string())?;
        correct += r.n_correct;
        total += r.n_pairs;
    }
    let acc = correct as f64 / total as f64;
    let half_width = 1.96 * (0.25 / total as f64).sqrt();
    let in_ci = (acc - 0.5).abs() <= half_width;
    check(
        high.n_pairs == 66 && high.accuracy >= 0.95 && in_ci,
        format!(
            "SNR 10: {:.3} over {} pairs; SNR 1e-6: {acc:.3} over {total} pairs (interval 0.5 ± {half_width:.3})",
            high.accuracy, high.n_pairs
        ),
    )
}

fn lag_sweep_shape() -> Outcome {
    let lags = [LagSpec::new(20.0, 10.0).unwrap(), LagSpec::new(420.0, 10.0).unwrap()];
    let (mut short, mut long) = (0.0, 0.0);
    for seed in 0..5 {
        let cfg = SynthConfig {
            lag_bins_true: 41,
            lag_support: Some((20, 40)),
            extra_samples: 10,
            seed: 505 + seed,
            ..base_synth(0, 10.0)
        };
        let (ds, _) = generate(&cfg).map_err(|e| e.to_string())?;
        let reports = lag_sweep(&ds, &lags, &CvConfig::new(lags[0])).map_err(|e| e.to_string())?;
        short += reports[0].accuracy / 5.0;
        long += reports[1].accuracy / 5.0;
    }
    check(
        long - short >= 0.10,
        format!("mean accuracy 20 ms: {short:.3}, 420 ms: {long:.3}"),
    )
}

fn protocol_counts() -> Outcome {
    let cfg = SynthConfig {
        n_stimuli: 44,
        channels: 3,
        freq_channels: 4,
        frames: FrameCount::Fixed(50),
        seed: 606,
        ..SynthConfig::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let (ds, _) = generate(&cfg).map_err(|e| e.to_string())?;
    let folds = fold_pairs(&ds, &PairFilter::All).unwrap().len();
    kconv::tensorio::save_dataset(&ds, &data).map_err(|e| e.to_string())?;
    let out = tmp.path().join("sweep");
    let code = kconv_cli::run([
        "kconv", "sweep", "--dataset", path(&data), "--out", path(&out), "--pair-sample", "12", "--seed", "6",
    ]);
    let rows = fs::read_to_string(out.join("sweep.csv"))
        .map(|t| t.lines().count() - 1)
        .unwrap_or(0);
    check(
        folds == 946 && code == 0 && rows == 10,
        format!("{folds} folds for 44 stimuli; sweep exit {code}, {rows} rows"),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sg(id: &str, m: DMatrix<f64>) -> Spectrogram {
    let freqs = (1..=m.nrows()).map(|f| f as f64 * 100.0).collect();
    Spectrogram::new(id, m, 10.0, freqs).unwrap()
}

fn pair_battery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let s1 = sg("a", normal(4, 20, &mut rng));
    let s2 = sg("b", normal(4, 20, &mut rng));
    let perfect = pair_correlation_test(&s1, &s2, &s1, &s2).unwrap().correct;
    let swapped = pair_correlation_test(&s1, &s2, &s2, &s1).unwrap().correct;
    let mut flips = 0;
    for _ in 0..1000 {
        let (rows, cols) = (rng.random_range(1..6), rng.random_range(2..30));
        let s1 = sg("a", normal(rows, cols, &mut rng));
        let s2 = sg("b", normal(rows, cols, &mut rng));
        let p1 = sg("a", normal(rows, cols, &mut rng));
        let p2 = sg("b", normal(rows, cols, &mut rng));
        let before = pair_correlation_test(&s1, &s2, &p1, &p2).unwrap().correct;
        let a: f64 = rng.random_range(1e-3..1e3);
        let b: f64 = rng.random_range(-100.0..100.0);
        let q1 = sg("a", p1.data.map(|v| a * v + b));
        let c: f64 = rng.random_range(1e-3..1e3);
        let q2 = sg("b", p2.data.map(|v| c * v - b));
        if pair_correlation_test(&s1, &s2, &q1, &q2).unwrap().correct != before {
            flips += 1;
        }
    }
    check(
        perfect && !swapped && flips == 0,
        format!("perfect correct: {perfect}; swapped correct: {swapped}; affine flips: {flips}/1000"),
    )
}

fn feature_battery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let origs: Vec<DMatrix<f64>> = (0..12).map(|_| normal(5, 9, &mut rng)).collect();
    let preds: Vec<DMatrix<f64>> = origs.iter().map(|o| o + normal(5, 9, &mut rng) * 0.5).collect();
    let mean = origs.iter().fold(DMatrix::zeros(5, 9), |acc, o| acc + o) / origs.len() as f64;

    let same: Vec<_> = origs.iter().map(|o| (o, o)).collect();
    let perfect = feature_score(&same).unwrap();
    let perfect_ok = perfect.per_cell.iter().chain(&perfect.per_frequency).all(|v| *v == Some(1.0));

    let base: Vec<_> = origs.iter().map(|o| (o, &mean)).collect();
    let baseline = feature_score(&base).unwrap();
    let baseline_worst = baseline
        .per_cell
        .iter()
        .chain(&baseline.per_frequency)
        .map(|v| v.unwrap().abs())
        .fold(0.0, f64::max);

    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let (o1, o3, p2) = (one(1.0), one(3.0), one(2.0));
    let toy = feature_score(&[(&o1, &p2), (&o3, &p2)]).unwrap().per_cell[(0, 0)];

    let pairs: Vec<_> = origs.iter().zip(&preds).collect();
    let forward = feature_score(&pairs).unwrap();
    let mut reordered = pairs.clone();
    reordered.reverse();
    reordered.rotate_left(5);
    let backward = feature_score(&reordered).unwrap();
    let drift = forward
        .per_cell
        .iter()
        .zip(backward.per_cell.iter())
        .chain(forward.per_frequency.iter().zip(&backward.per_frequency))
        .map(|(a, b)| (a.unwrap() - b.unwrap()).abs())
        .fold(0.0, f64::max);

    check(
        perfect_ok && baseline_worst < 1e-12 && toy == Some(0.0) && drift < 1e-12,
        format!(
            "perfect all 1: {perfect_ok}; baseline max |score| {baseline_worst:.1e}; toy {toy:?}; reorder drift {drift:.1e}"
        ),
    )
}

fn filterbank() -> Outcome {
    let spec = FilterbankSpec::default();
    let sr = 16000;
    let bank = design_filterbank(&spec, sr).map_err(|e| e.to_string())?;
    let c = &bank.center_freqs_hz;
    let ratios: Vec<f64> = c.windows(2).map(|w| w[1] / w[0]).collect();
    let log_spaced = ratios.iter().all(|r| (r / ratios[0] - 1.0).abs() < 1e-9);
    let span = (c[0] - 180.0).abs() < 1e-9 && (c[127] - 7246.0).abs() < 1e-9;

    let mut misses = Vec::new();
    for k in (0..128).step_by(9).chain([127]) {
        let f = c[k];
        let samples = (0..sr / 2)
            .map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / sr as f64).sin())
            .collect();
        let clip = AudioClip::new("tone", samples, sr).unwrap();
        let s = compute_spectrogram(&clip, &spec).unwrap();
        let energy: Vec<f64> = (0..s.n_freqs()).map(|ch| s.data.row(ch).sum()).collect();
        let peak = energy
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        if peak != k {
            misses.push((k, peak));
        }
    }
    let second = AudioClip::new("silence", vec![0.0; sr as usize], sr).unwrap();
    let frames = compute_spectrogram(&second, &spec).unwrap().n_frames();
    check(
        c.len() == 128 && span && log_spaced && misses.is_empty() && frames == 100,
        format!(
            "{} channels {:.1}–{:.1} Hz, log-spaced: {log_spaced}; tone peak misses {misses:?}; {frames} frames per second",
            c.len(),
            c[0],
            c[127]
        ),
    )
}

fn pipeline(dir: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let data = dir.join("data");
    let eval = dir.join("eval");
    let sweep = dir.join("sweep");
    let runs: [Vec<&str>; 3] = [
        vec!["synth", "--out", path(&data), "--stimuli", "8", "--channels", "4", "--freqs", "6", "--frames", "50", "--seed", "10"],
        vec!["evaluate", "--dataset", path(&data), "--out", path(&eval), "--lag-ms", "20", "--kernel", "gaussian:0.05"],
        vec!["sweep", "--dataset", path(&data), "--out", path(&sweep), "--lags-ms", "0,20,60", "--pair-sample", "10", "--seed", "4", "--gnuplot"],
    ];
    for args in runs {
        let mut full = vec!["kconv", "--threads", threads];
        full.extend(args);
        assert_eq!(kconv_cli::run(full), 0);
    }
    let mut files = Vec::new();
    for (sub, names) in [
        (&data, vec!["manifest.json", "rec_0003.f64", "spec_0007.f64", "truth.json"]),
        (&eval, vec!["pairs.csv", "summary.json"]),
        (&sweep, vec!["sweep.csv", "summaries.json", "sweep.dat"]),
    ] {
        for name in names {
            files.push((name.to_string(), fs::read(sub.join(name)).unwrap()));
        }
    }
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let k = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4).max(2).to_string();
    let runs: Vec<_> = [("a", "1"), ("b", "1"), ("c", k.as_str()), ("d", k.as_str())]
        .iter()
        .map(|(name, threads)| pipeline(&tmp.path().join(name), threads))
        .collect();
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    check(
        identical,
        format!("{} report files byte-identical across 2 runs × threads {{1, {k}}}", runs[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("1 duality identity", duality, Duration::from_secs(10)),
        ("2 fast LOO equals brute force", fast_loo, Duration::from_secs(30)),
        ("3 ML recovery", ml_recovery, Duration::from_secs(5)),
        ("4 synthetic end-to-end decoding", synthetic_decoding, Duration::from_secs(120)),
        ("5 lag-sweep shape", lag_sweep_shape, Duration::from_secs(180)),
        ("6 protocol counts", protocol_counts, Duration::from_secs(180)),
        ("7 pair-test battery", pair_battery, Duration::from_secs(60)),
        ("8 feature-score battery", feature_battery, Duration::from_secs(60)),
        ("9 filterbank sanity", filterbank, Duration::from_secs(60)),
        ("10 determinism", determinism, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
