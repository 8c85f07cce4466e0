//! `kconv` command-line driver.
//!
//! Every command writes into its `--out` directory, together with
//! `config.json` (the resolved arguments) and `rerun.txt` (a command line that
//! reproduces the run). Failures exit with 1 (usage), 2 (data or validation)
//! or 3 (numerical), print a message to stderr and, when the output
//! directory is known, leave an `error.json` record there.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use kconv::audiofeat::{compute_spectrogram, FilterbankSpec};
use kconv::decoder::{
    fit_ml, fit_selected, load_model, predict, save_model, FitOptions, GridSpec, KernelSpec,
    LambdaGrid, Solver,
};
use kconv::eval::{
    lag_sweep, leave_two_out_cv, write_gnuplot, write_pairs_csv, write_summary_json,
    write_sweep_csv, CvConfig, EvalSummary, PairFilter,
};
use kconv::lagging::{build_lagged_design, lag_grid_from_ms, BuildOptions, LagSpec};
use kconv::synth::{generate, save_truth, FrameCount, SynthConfig};
use kconv::tensorio::{
    baseline_correct, downsample, load_audio_clips, load_dataset, save_dataset,
    save_spectrogram_set, select_channels, Dataset,
};
use kconv::{with_threads, Error};

/// The lags (ms) of the usual accuracy-vs-lag sweep.
pub const DEFAULT_SWEEP_LAGS_MS: [f64; 10] =
    [20.0, 100.0, 180.0, 260.0, 340.0, 420.0, 500.0, 580.0, 740.0, 980.0];

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser, Serialize)]
#[command(name = "kconv", version, about = "Decode stimulus spectrograms from multichannel neural recordings")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Select channels, baseline-correct and downsample a dataset.
    Prepare(PrepareArgs),
    /// Compute filterbank spectrograms from PCM audio.
    Spectrogram(SpectrogramArgs),
    /// Fit a decoder on a dataset.
    Fit(FitArgs),
    /// Predict spectrograms with a fitted decoder.
    Predict(PredictArgs),
    /// Leave-two-out cross-validation at one lag.
    Evaluate(EvaluateArgs),
    /// Leave-two-out cross-validation over several lags.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset with a planted mapping.
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::Spectrogram(_) => "spectrogram",
            Command::Fit(_) => "fit",
            Command::Predict(_) => "predict",
            Command::Evaluate(_) => "evaluate",
            Command::Sweep(_) => "sweep",
            Command::Synth(_) => "synth",
        }
    }

    pub fn out_dir(&self) -> &Path {
        match self {
            Command::Prepare(a) => &a.out,
            Command::Spectrogram(a) => &a.out,
            Command::Fit(a) => &a.out,
            Command::Predict(a) => &a.out,
            Command::Evaluate(a) => &a.out,
            Command::Sweep(a) => &a.out,
            Command::Synth(a) => &a.out,
        }
    }
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn display_opt<T: std::fmt::Display, S: serde::Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

/// Comma-separated list of values.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: std::str::FromStr> std::str::FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

impl<T: std::fmt::Display> std::fmt::Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

fn fixed_len<T: std::str::FromStr>(s: &str, n: usize) -> Result<List<T>, String>
where
    T::Err: std::fmt::Display,
{
    let list: List<T> = s.parse()?;
    if list.0.len() != n {
        return Err(format!("expected {n} comma-separated values, got {}", list.0.len()));
    }
    Ok(list)
}

fn parse_pair(s: &str) -> Result<List<f64>, String> {
    fixed_len(s, 2)
}

fn parse_usize_pair(s: &str) -> Result<List<usize>, String> {
    fixed_len(s, 2)
}

fn parse_filterbank(s: &str) -> Result<List<f64>, String> {
    fixed_len(s, 4)
}

/// `min,max,count`: `count` log-spaced values from `min` to `max`.
fn parse_grid(s: &str) -> Result<List<f64>, String> {
    let list: List<f64> = fixed_len(s, 3)?;
    let count = list.0[2];
    if count.fract() != 0.0 || count < 1.0 {
        return Err(format!("grid count must be a positive integer, got {count}"));
    }
    LambdaGrid::log_spaced(list.0[0], list.0[1], count as usize).map_err(|e| e.to_string())?;
    Ok(list)
}

fn parse_solver(s: &str) -> Result<Solver, String> {
    match s {
        "auto" => Ok(Solver::Auto),
        "primal" => Ok(Solver::Primal),
        "dual" => Ok(Solver::Dual),
        _ => Err(format!("unknown solver {s:?} (auto, primal, dual)")),
    }
}

fn parse_frames(s: &str) -> Result<String, String> {
    frames_of(s).map(|_| s.to_string())
}

fn frames_of(s: &str) -> Result<FrameCount, String> {
    let num = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    match s.split_once('-') {
        Some((a, b)) => Ok(FrameCount::Range { min: num(a)?, max: num(b)? }),
        None => Ok(FrameCount::Fixed(num(s)?)),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PrepareArgs {
    /// Dataset directory or its `manifest.json`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Baseline window `start,end` in ms relative to onset.
    #[arg(long, value_parser = parse_pair)]
    #[serde(serialize_with = "display_opt")]
    pub baseline: Option<List<f64>>,
    /// Target sample period in ms (block averaging).
    #[arg(long)]
    pub downsample: Option<f64>,
    /// File with one channel name per line.
    #[arg(long)]
    pub channels: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrogramArgs {
    /// Audio directory or its `audio.json`.
    #[arg(long)]
    pub audio: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// `n,fmin,fmax,hop_ms`.
    #[arg(long, value_parser = parse_filterbank)]
    #[serde(serialize_with = "display_opt")]
    pub filterbank: Option<List<f64>>,
    /// Pair the spectrograms with this dataset's recordings and write a full dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ModelOpts {
    /// `linear` or `gaussian:GAMMA`.
    #[arg(long, default_value = "linear")]
    #[serde(serialize_with = "display")]
    pub kernel: KernelSpec,
    /// `min,max,count` log-spaced λ values (default scales with training rows).
    #[arg(long, value_parser = parse_grid)]
    #[serde(serialize_with = "display_opt")]
    pub lambda_grid: Option<List<f64>>,
    /// `auto`, `primal` or `dual`.
    #[arg(long, default_value = "auto", value_parser = parse_solver)]
    #[serde(serialize_with = "solver_name")]
    pub solver: Solver,
    /// Fit on raw rather than standardized features and targets.
    #[arg(long)]
    pub no_standardize: bool,
}

fn solver_name<S: serde::Serializer>(v: &Solver, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match v {
        Solver::Auto => "auto",
        Solver::Primal => "primal",
        Solver::Dual => "dual",
    })
}

impl ModelOpts {
    fn grid(&self) -> GridSpec {
        match &self.lambda_grid {
            Some(List(v)) => GridSpec::Fixed {
                grid: LambdaGrid::log_spaced(v[0], v[1], v[2] as usize).expect("validated by parser"),
            },
            None => GridSpec::default(),
        }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            standardize: !self.no_standardize,
            build: BuildOptions::default(),
        }
    }

    fn cv_config(&self, lag: LagSpec, pairs: PairFilter) -> CvConfig {
        CvConfig {
            lag,
            kernel: self.kernel,
            grid: self.grid(),
            solver: self.solver,
            fit: self.fit_options(),
            pair_filter: pairs,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Dataset directory or its `manifest.json`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Lag window length in ms, onset to last lag.
    #[arg(long)]
    pub lag_ms: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    /// Unregularized least squares instead of leave-one-out ridge.
    #[arg(long)]
    pub ml: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Model directory or its `model.json`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory or its `manifest.json`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated stimulus ids (default: all).
    #[arg(long)]
    #[serde(serialize_with = "display_opt")]
    pub ids: Option<List<String>>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Dataset directory or its `manifest.json`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Lag window length in ms, onset to last lag.
    #[arg(long)]
    pub lag_ms: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    /// Evaluate a seeded random subset of this many pairs.
    #[arg(long)]
    pub pair_sample: Option<usize>,
    /// Seed for pair sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Dataset directory or its `manifest.json`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated lags in ms.
    #[arg(long, default_value = "20,100,180,260,340,420,500,580,740,980")]
    #[serde(serialize_with = "display")]
    pub lags_ms: List<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    /// Evaluate a seeded random subset of this many pairs.
    #[arg(long)]
    pub pair_sample: Option<usize>,
    /// Seed for pair sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write `sweep.dat` for gnuplot.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Number of stimuli.
    #[arg(long, default_value_t = 12)]
    pub stimuli: usize,
    /// Recording channels.
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    /// Spectrogram frequency channels.
    #[arg(long, default_value_t = 16)]
    pub freqs: usize,
    /// Frames per stimulus: `N` or `MIN-MAX`.
    #[arg(long, default_value = "100", value_parser = parse_frames)]
    pub frames: String,
    /// Lag bins of the planted mapping (lag 0 included).
    #[arg(long, default_value_t = 3)]
    pub lag_bins: usize,
    /// Signal-to-noise variance ratio; `inf` for noiseless.
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    /// Seed for all random draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frequency channels carrying signal, comma-separated.
    #[arg(long)]
    #[serde(serialize_with = "display_opt")]
    pub g_support: Option<List<usize>>,
    /// Inclusive lag-bin range `lo,hi` carrying signal.
    #[arg(long, value_parser = parse_usize_pair)]
    #[serde(serialize_with = "display_opt")]
    pub lag_support: Option<List<usize>>,
    /// Number of latent sources mixed into the channels.
    #[arg(long)]
    pub mixing_rank: Option<usize>,
    /// Extra response samples recorded past each stimulus.
    #[arg(long, default_value_t = 0)]
    pub extra_samples: usize,
    /// Frame and sample period in ms.
    #[arg(long, default_value_t = 10.0)]
    pub frame_period_ms: f64,
}

/// Outcome of a failed command, as recorded in `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub exit_code: i32,
    pub kind: &'static str,
    pub message: String,
}

fn record(err: &Error) -> ErrorRecord {
    let (exit_code, kind) = if err.is_numerical() {
        (EXIT_NUMERICAL, "numerical")
    } else {
        (EXIT_DATA, "data")
    };
    ErrorRecord {
        exit_code,
        kind,
        message: err.to_string(),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                let rec = ErrorRecord {
                    exit_code: code,
                    kind: "usage",
                    message: e.to_string().trim().to_string(),
                };
                eprintln!("{}", serde_json::to_string(&rec).expect("plain record"));
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let rec = record(&err);
            eprintln!("error: {err}");
            eprintln!("{}", serde_json::to_string(&rec).expect("plain record"));
            let out = cli.command.out_dir();
            if fs::create_dir_all(out).is_ok() {
                let text = serde_json::to_string_pretty(&rec).expect("plain record") + "\n";
                let _ = fs::write(out.join("error.json"), text);
            }
            rec.exit_code
        }
    }
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> kconv::Result<()> {
    let out = cli.command.out_dir();
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let _ = fs::remove_file(out.join("error.json"));
    write_provenance(cli)?;
    with_threads(cli.threads, || match &cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Spectrogram(a) => spectrogram(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
    })?
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Flags reproducing `cli`, with every resolved value spelled out.
pub fn rerun_line(cli: &Cli) -> String {
    let mut words = vec!["kconv".to_string(), cli.command.name().to_string()];
    let value = serde_json::to_value(cli).expect("arguments serialize");
    if let Value::Object(map) = value {
        for (key, v) in map {
            let flag = format!("--{}", key.replace('_', "-"));
            match v {
                Value::Null | Value::Bool(false) => {}
                Value::Bool(true) => words.push(flag),
                Value::String(s) => words.extend([flag, s]),
                other => words.extend([flag, other.to_string()]),
            }
        }
    }
    shell_words::join(words)
}

fn write_provenance(cli: &Cli) -> kconv::Result<()> {
    let out = cli.command.out_dir();
    let config = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "args": cli,
    });
    let text = serde_json::to_string_pretty(&config).expect("arguments serialize") + "\n";
    let path = out.join("config.json");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    let path = out.join("rerun.txt");
    fs::write(&path, rerun_line(cli) + "\n").map_err(|e| io_err(&path, e))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> kconv::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Accepts a directory or the manifest inside it.
fn manifest(path: &Path, name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(name)
    } else {
        path.to_path_buf()
    }
}

fn open_dataset(path: &Path) -> kconv::Result<Dataset> {
    load_dataset(&manifest(path, "manifest.json"))
}

fn frame_period(ds: &Dataset) -> kconv::Result<f64> {
    ds.spectrograms()
        .first()
        .map(|s| s.frame_period_ms)
        .ok_or_else(|| Error::InvalidConfig("dataset has no stimuli".into()))
}

fn read_channel_list(path: &Path) -> kconv::Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn prepare(a: &PrepareArgs) -> kconv::Result<()> {
    let mut ds = open_dataset(&a.dataset)?;
    if let Some(path) = &a.channels {
        let names = read_channel_list(path)?;
        ds = ds.map_recordings(|r| select_channels(r, &names))?;
    }
    if let Some(List(w)) = &a.baseline {
        ds = ds.map_recordings(|r| baseline_correct(r, w[0], w[1]))?;
    }
    if let Some(period) = a.downsample {
        ds = ds.map_recordings(|r| downsample(r, period))?;
    }
    save_dataset(&ds, &a.out)?;
    Ok(())
}

fn spectrogram(a: &SpectrogramArgs) -> kconv::Result<()> {
    let mut spec = FilterbankSpec::default();
    if let Some(List(v)) = &a.filterbank {
        if v[0].fract() != 0.0 || v[0] < 2.0 {
            return Err(Error::InvalidConfig(format!("filterbank needs an integer channel count ≥ 2, got {}", v[0])));
        }
        spec.n_channels = v[0] as usize;
        spec.f_min_hz = v[1];
        spec.f_max_hz = v[2];
        spec.frame_period_ms = v[3];
    }
    let clips = load_audio_clips(&manifest(&a.audio, "audio.json"))?;
    let specs = clips
        .iter()
        .map(|c| compute_spectrogram(c, &spec))
        .collect::<kconv::Result<Vec<_>>>()?;
    match &a.dataset {
        Some(dir) => {
            let ds = open_dataset(dir)?.with_spectrograms(specs)?;
            save_dataset(&ds, &a.out)?;
        }
        None => {
            save_spectrogram_set(&specs, &a.out)?;
        }
    }
    Ok(())
}

fn fit(a: &FitArgs) -> kconv::Result<()> {
    let ds = open_dataset(&a.dataset)?;
    let lag = LagSpec::new(a.lag_ms, frame_period(&ds)?)?;
    let ids: Vec<&str> = ds.ids().collect();
    let opts = a.model.fit_options();
    let (design, targets) = build_lagged_design(&ds, &lag, &ids, opts.build)?;
    if a.ml {
        let model = fit_ml(&design, &targets, &opts)?;
        save_model(&model, &a.out)?;
        return Ok(());
    }
    let (model, selection) = fit_selected(&design, &targets, &a.model.grid(), a.model.kernel, a.model.solver, &opts)?;
    save_model(&model, &a.out)?;
    let loo: Vec<Vec<f64>> = selection
        .loo_errors
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    write_json_file(
        &a.out.join("selection.json"),
        &json!({
            "grid": selection.grid.values(),
            "lambdas": selection.lambdas,
            "loo_errors": loo,
            "center_freqs_hz": targets.center_freqs_hz,
        }),
    )
}

fn run_predict(a: &PredictArgs) -> kconv::Result<()> {
    let model = load_model(&manifest(&a.model, "model.json"))?;
    let ds = open_dataset(&a.dataset)?;
    let ids: Vec<String> = match &a.ids {
        Some(List(ids)) => ids.clone(),
        None => ds.ids().map(str::to_string).collect(),
    };
    let preds = predict(&model, &ds, &ids, BuildOptions::default())?;
    save_spectrogram_set(&preds, &a.out)?;
    Ok(())
}

fn pair_filter(sample: Option<usize>, seed: u64) -> PairFilter {
    match sample {
        Some(count) => PairFilter::Sample { count, seed },
        None => PairFilter::All,
    }
}

fn evaluate(a: &EvaluateArgs) -> kconv::Result<()> {
    let ds = open_dataset(&a.dataset)?;
    let lag = LagSpec::new(a.lag_ms, frame_period(&ds)?)?;
    let cfg = a.model.cv_config(lag, pair_filter(a.pair_sample, a.seed));
    let report = leave_two_out_cv(&ds, &cfg)?;
    write_pairs_csv(&report, &a.out.join("pairs.csv"))?;
    write_summary_json(&report, &a.out.join("summary.json"))
}

fn sweep(a: &SweepArgs) -> kconv::Result<()> {
    let ds = open_dataset(&a.dataset)?;
    let lags = lag_grid_from_ms(&a.lags_ms.0, frame_period(&ds)?)?;
    let first = *lags
        .first()
        .ok_or_else(|| Error::InvalidConfig("no lags given".into()))?;
    let cfg = a.model.cv_config(first, pair_filter(a.pair_sample, a.seed));
    let reports = lag_sweep(&ds, &lags, &cfg)?;
    write_sweep_csv(&reports, &a.out.join("sweep.csv"))?;
    let summaries = reports
        .iter()
        .map(EvalSummary::from_report)
        .collect::<kconv::Result<Vec<_>>>()?;
    write_json_file(&a.out.join("summaries.json"), &summaries)?;
    if a.gnuplot {
        write_gnuplot(&reports, &a.out.join("sweep.dat"))?;
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> kconv::Result<()> {
    let lag_support = match &a.lag_support {
        Some(List(v)) => Some((v[0], v[1])),
        None => None,
    };
    let cfg = SynthConfig {
        n_stimuli: a.stimuli,
        channels: a.channels,
        freq_channels: a.freqs,
        frames: frames_of(&a.frames).map_err(Error::InvalidConfig)?,
        lag_bins_true: a.lag_bins,
        snr: a.snr,
        seed: a.seed,
        g_support: a.g_support.as_ref().map(|l| l.0.clone()),
        lag_support,
        mixing_rank: a.mixing_rank,
        extra_samples: a.extra_samples,
        frame_period_ms: a.frame_period_ms,
    };
    let (ds, truth) = generate(&cfg)?;
    save_dataset(&ds, &a.out)?;
    save_truth(&truth, &a.out)?;
    Ok(())
}
