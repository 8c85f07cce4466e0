//! Synthetic forward-model datasets with a planted response mapping.
//!
//! Each stimulus gets white Gaussian responses (optionally mixed through a
//! low-rank channel mixing matrix), and its spectrogram is the lagged
//! response window times `true_g`, plus i.i.d. Gaussian noise scaled to the
//! requested signal-to-noise ratio. Everything derives from one seed; each
//! stimulus draws from its own ChaCha stream, so output does not depend on
//! the thread count.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{leave_two_out_cv, CvConfig};
use crate::lagging::{lag_recording, BuildOptions, LagSpec};
use crate::tensorio::io::{read_json, write_json};
use crate::tensorio::{read_blob, write_blob, Dataset, Recording, Spectrogram, FORMAT_VERSION};

const STREAM_G: u64 = u64::MAX;
const STREAM_MIXING: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameCount {
    Fixed(usize),
    /// Drawn uniformly per stimulus from `min..=max`.
    Range { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_stimuli: usize,
    pub channels: usize,
    pub freq_channels: usize,
    pub frames: FrameCount,
    pub lag_bins_true: usize,
    /// Signal variance over noise variance; infinite means noiseless
    /// (stored as `null` in JSON).
    #[serde(with = "snr_serde")]
    pub snr: f64,
    pub seed: u64,
    /// Frequency channels where the planted mapping is nonzero.
    pub g_support: Option<Vec<usize>>,
    /// Inclusive lag-bin range where the planted mapping is nonzero.
    pub lag_support: Option<(usize, usize)>,
    /// Generate channels from this many latent sources (correlated channels).
    pub mixing_rank: Option<usize>,
    /// Response samples recorded after the last frame's true window.
    pub extra_samples: usize,
    pub frame_period_ms: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_stimuli: 12,
            channels: 8,
            freq_channels: 16,
            frames: FrameCount::Fixed(100),
            lag_bins_true: 3,
            snr: 10.0,
            seed: 0,
            g_support: None,
            lag_support: None,
            mixing_rank: None,
            extra_samples: 0,
            frame_period_ms: 10.0,
        }
    }
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_stimuli < 3 {
            return bad(format!("need at least 3 stimuli, got {}", self.n_stimuli));
        }
        if self.channels == 0 || self.freq_channels == 0 || self.lag_bins_true == 0 {
            return bad("channels, freq_channels and lag_bins_true must be positive".into());
        }
        match self.frames {
            FrameCount::Fixed(0) => return bad("frames must be positive".into()),
            FrameCount::Range { min, max } if min == 0 || min > max => {
                return bad(format!("invalid frame range {min}..={max}"))
            }
            _ => {}
        }
        if !(self.snr > 0.0) {
            return bad(format!("snr must be positive, got {}", self.snr));
        }
        if !(self.frame_period_ms > 0.0 && self.frame_period_ms.is_finite()) {
            return bad("frame period must be positive".into());
        }
        if let Some(support) = &self.g_support {
            if support.is_empty() || support.iter().any(|&f| f >= self.freq_channels) {
                return bad("g_support must list valid frequency channels".into());
            }
        }
        if let Some((lo, hi)) = self.lag_support {
            if lo > hi || hi >= self.lag_bins_true {
                return bad(format!(
                    "lag support {lo}..={hi} outside 0..{}",
                    self.lag_bins_true
                ));
            }
        }
        if let Some(k) = self.mixing_rank {
            if k == 0 {
                return bad("mixing rank must be positive".into());
            }
        }
        Ok(())
    }

    fn supported_freqs(&self) -> Vec<usize> {
        self.g_support
            .clone()
            .unwrap_or_else(|| (0..self.freq_channels).collect())
    }

    pub fn true_lag(&self) -> LagSpec {
        LagSpec::from_bins(self.lag_bins_true, self.frame_period_ms).expect("validated")
    }
}

/// The planted mapping and noise level behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    /// (lag_bins_true · channels) × freq_channels, lag-major rows.
    pub true_g: DMatrix<f64>,
    pub noise_sigma: f64,
    /// Empirical noiseless-signal variance over the supported channels.
    pub signal_variance: f64,
    pub config: SynthConfig,
}

fn normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Log-spaced centre frequencies over the usual 180–7246 Hz span.
fn synth_freqs(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1000.0];
    }
    let (lo, hi) = (180.0f64.ln(), 7246.0f64.ln());
    (0..n)
        .map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn generate(config: &SynthConfig) -> Result<(Dataset, SynthTruth)> {
    config.validate()?;
    let c = config.channels;
    let lag = config.true_lag();
    let names: Vec<String> = (0..c).map(|i| format!("ch{i:02}")).collect();
    let freqs = synth_freqs(config.freq_channels);
    let support = config.supported_freqs();

    let mut g_rng = stream(config.seed, STREAM_G);
    let (lag_lo, lag_hi) = config.lag_support.unwrap_or((0, config.lag_bins_true - 1));
    let active_rows = (lag_hi - lag_lo + 1) * c;
    let raw_g = normal(config.lag_bins_true * c, config.freq_channels, &mut g_rng);
    let true_g = DMatrix::from_fn(raw_g.nrows(), raw_g.ncols(), |r, f| {
        let lag_bin = r / c;
        if (lag_lo..=lag_hi).contains(&lag_bin) && support.contains(&f) {
            raw_g[(r, f)] / (active_rows as f64).sqrt()
        } else {
            0.0
        }
    });
    let mixing = config
        .mixing_rank
        .map(|k| normal(c, k, &mut stream(config.seed, STREAM_MIXING)));

    // Noiseless pass, one stream per stimulus.
    let signals: Vec<(Recording, DMatrix<f64>)> = (0..config.n_stimuli)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(config.seed, 2 * i as u64);
            let frames = match config.frames {
                FrameCount::Fixed(n) => n,
                FrameCount::Range { min, max } => rng.random_range(min..=max),
            };
            let samples = frames + config.lag_bins_true - 1 + config.extra_samples;
            let data = match &mixing {
                Some(m) => m * normal(m.ncols(), samples, &mut rng),
                None => normal(c, samples, &mut rng),
            };
            let rec = Recording::new(
                format!("stim{i:03}"),
                data,
                config.frame_period_ms,
                0.0,
                names.clone(),
            )?;
            let rows = lag_recording(&rec, frames, &lag, BuildOptions::default())?;
            Ok((rec, (rows * &true_g).transpose()))
        })
        .collect::<Result<_>>()?;

    let signal_variance = pooled_variance(signals.iter().map(|(_, s)| s), &support);
    let noise_sigma = if config.snr.is_infinite() {
        0.0
    } else {
        (signal_variance / config.snr).sqrt()
    };

    let (recs, specs): (Vec<_>, Vec<_>) = signals
        .into_par_iter()
        .enumerate()
        .map(|(i, (rec, mut s))| {
            if noise_sigma > 0.0 {
                let mut rng = stream(config.seed, 2 * i as u64 + 1);
                let noise = normal(s.nrows(), s.ncols(), &mut rng);
                s += noise * noise_sigma;
            }
            let spec = Spectrogram::new(rec.stimulus_id.clone(), s, config.frame_period_ms, freqs.clone())?;
            Ok((rec, spec))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();

    let ds = Dataset::new(recs, specs)?;
    Ok((
        ds,
        SynthTruth {
            true_g,
            noise_sigma,
            signal_variance,
            config: config.clone(),
        },
    ))
}

/// Variance of the entries of the listed rows, pooled over all matrices.
pub(crate) fn pooled_variance<'a>(
    mats: impl Iterator<Item = &'a DMatrix<f64>>,
    rows: &[usize],
) -> f64 {
    let (mut n, mut sum, mut sq) = (0.0, 0.0, 0.0);
    for m in mats {
        for &f in rows {
            for v in m.row(f).iter() {
                n += 1.0;
                sum += v;
                sq += v * v;
            }
        }
    }
    if n == 0.0 {
        return 0.0;
    }
    let mean = sum / n;
    (sq / n - mean * mean).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    #[serde(with = "snr_serde")]
    pub snr: f64,
    /// Mean accuracy over seeds.
    pub accuracy: f64,
    pub per_seed: Vec<f64>,
}

/// Leave-two-out accuracy for each SNR, averaged over `seeds`.
pub fn snr_curve(base: &SynthConfig, snrs: &[f64], seeds: &[u64], cv: &CvConfig) -> Result<Vec<SnrPoint>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("snr_curve needs at least one seed".into()));
    }
    snrs.iter()
        .map(|&snr| {
            let per_seed = seeds
                .iter()
                .map(|&seed| {
                    let cfg = SynthConfig {
                        snr,
                        seed,
                        ..base.clone()
                    };
                    let (ds, _) = generate(&cfg)?;
                    Ok(leave_two_out_cv(&ds, cv)?.accuracy)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SnrPoint {
                snr,
                accuracy: per_seed.iter().sum::<f64>() / per_seed.len() as f64,
                per_seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthHeader {
    format_version: u32,
    config: SynthConfig,
    noise_sigma: f64,
    signal_variance: f64,
    true_g_blob: String,
    rows: usize,
    cols: usize,
}

/// Writes `truth.json` and `true_g.f64` into `dir`.
pub fn save_truth(truth: &SynthTruth, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_blob(&dir.join("true_g.f64"), &truth.true_g)?;
    let path = dir.join("truth.json");
    write_json(
        &path,
        &TruthHeader {
            format_version: FORMAT_VERSION,
            config: truth.config.clone(),
            noise_sigma: truth.noise_sigma,
            signal_variance: truth.signal_variance,
            true_g_blob: "true_g.f64".into(),
            rows: truth.true_g.nrows(),
            cols: truth.true_g.ncols(),
        },
    )?;
    Ok(path)
}

pub fn load_truth(path: &Path) -> Result<SynthTruth> {
    let h: TruthHeader = read_json(path)?;
    if h.format_version != FORMAT_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported truth format_version {}",
            h.format_version
        )));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(SynthTruth {
        true_g: read_blob(&dir.join(&h.true_g_blob), h.rows, h.cols)?,
        noise_sigma: h.noise_sigma,
        signal_variance: h.signal_variance,
        config: h.config,
    })
}
