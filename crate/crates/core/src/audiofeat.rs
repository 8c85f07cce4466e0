//! Log-spaced triangular filterbank spectrograms from mono PCM audio.
//!
//! A Hann-windowed short-time power spectrum is projected onto overlapping
//! triangles laid out on a logarithmic frequency axis. Channel `k` of `n`
//! peaks at `f_min * (f_max / f_min)^(k / (n - 1))` and falls to zero at its
//! neighbours' centers. Projection uses each triangle divided by its sum.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::Spectrogram;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub stimulus_id: String,
}

impl AudioClip {
    pub fn new(stimulus_id: impl Into<String>, samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        let stimulus_id = stimulus_id.into();
        if samples.is_empty() {
            return Err(Error::InvalidConfig(format!("clip {stimulus_id:?} is empty")));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(AudioClip {
            samples,
            sample_rate_hz,
            stimulus_id,
        })
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compression {
    Linear,
    /// `ln(1 + power)`
    LogPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterbankSpec {
    pub n_channels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub frame_period_ms: f64,
    pub window_ms: f64,
    pub compression: Compression,
}

impl Default for FilterbankSpec {
    fn default() -> Self {
        FilterbankSpec {
            n_channels: 128,
            f_min_hz: 180.0,
            f_max_hz: 7246.0,
            frame_period_ms: 10.0,
            window_ms: 25.0,
            compression: Compression::LogPower,
        }
    }
}

impl FilterbankSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels < 2 {
            return Err(Error::InvalidConfig(
                "filterbank needs at least 2 channels".into(),
            ));
        }
        if !(self.f_min_hz > 0.0 && self.f_max_hz > self.f_min_hz && self.f_max_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < f_min < f_max, got {} and {}",
                self.f_min_hz, self.f_max_hz
            )));
        }
        if !(self.frame_period_ms > 0.0 && self.window_ms > 0.0) {
            return Err(Error::InvalidConfig(
                "frame period and window must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Ratio between adjacent center frequencies.
    pub fn spacing_ratio(&self) -> f64 {
        (self.f_max_hz / self.f_min_hz).powf(1.0 / (self.n_channels - 1) as f64)
    }

    pub fn center_freqs(&self) -> Vec<f64> {
        let n = self.n_channels;
        let span = self.f_max_hz / self.f_min_hz;
        (0..n)
            .map(|k| {
                if k == n - 1 {
                    self.f_max_hz
                } else {
                    self.f_min_hz * span.powf(k as f64 / (n - 1) as f64)
                }
            })
            .collect()
    }

    /// Right edge of the highest channel.
    pub fn upper_edge_hz(&self) -> f64 {
        self.f_max_hz * self.spacing_ratio()
    }
}

/// Filter weights for one sample rate.
#[derive(Debug, Clone)]
pub struct Filterbank {
    /// n_channels × (n_fft / 2 + 1)
    pub weights: DMatrix<f64>,
    pub center_freqs_hz: Vec<f64>,
    pub n_fft: usize,
    pub window_len: usize,
    pub hop_len: usize,
    pub sample_rate_hz: u32,
}

impl Filterbank {
    /// Sum of weights per channel: the gain applied to a flat power spectrum.
    pub fn channel_gains(&self) -> Vec<f64> {
        self.weights.row_iter().map(|r| r.sum()).collect()
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate_hz as f64 / self.n_fft as f64
    }
}

const MAX_FFT: usize = 1 << 20;

/// Designs the triangular filterbank for `sample_rate_hz`.
///
/// The FFT is zero-padded until every triangle's narrowest flank spans at
/// least four bins.
pub fn design_filterbank(spec: &FilterbankSpec, sample_rate_hz: u32) -> Result<Filterbank> {
    spec.validate()?;
    let sr = sample_rate_hz as f64;
    let nyquist = sr / 2.0;
    let edge = spec.upper_edge_hz();
    if edge > nyquist {
        return Err(Error::AboveNyquist {
            edge_hz: edge,
            nyquist_hz: nyquist,
        });
    }
    let window_len = (spec.window_ms * sr / 1000.0).round() as usize;
    let hop_exact = spec.frame_period_ms * sr / 1000.0;
    let hop_len = hop_exact.round() as usize;
    if hop_len == 0 || (hop_exact - hop_len as f64).abs() > 1e-9 * hop_exact {
        return Err(Error::InvalidConfig(format!(
            "frame period {} ms is not a whole number of samples at {sample_rate_hz} Hz",
            spec.frame_period_ms
        )));
    }
    if window_len == 0 {
        return Err(Error::InvalidConfig("window is shorter than one sample".into()));
    }

    let ratio = spec.spacing_ratio();
    let narrowest_flank = spec.f_min_hz * (1.0 - 1.0 / ratio);
    let wanted = (4.0 * sr / narrowest_flank).ceil() as usize;
    let n_fft = wanted.max(window_len).next_power_of_two().min(MAX_FFT).max(window_len.next_power_of_two());

    let centers = spec.center_freqs();
    let log_ratio = ratio.ln();
    let n_bins = n_fft / 2 + 1;
    let bin_hz = sr / n_fft as f64;
    let weights = DMatrix::from_fn(spec.n_channels, n_bins, |k, b| {
        if b == 0 {
            return 0.0;
        }
        let dist = ((b as f64 * bin_hz).ln() - centers[k].ln()).abs() / log_ratio;
        (1.0 - dist).max(0.0)
    });
    Ok(Filterbank {
        weights,
        center_freqs_hz: centers,
        n_fft,
        window_len,
        hop_len,
        sample_rate_hz,
    })
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos())
        .collect()
}

/// Filterbank energies of `clip`, one frame per `frame_period_ms` hop.
///
/// Each channel reports the triangle-weighted mean power in its band (weights
/// divided by the channel gain), so a flat spectrum gives equal outputs and
/// a tone excites the channel centered on it most strongly. Frame `j` analyses the window starting at sample `j * hop`; windows
/// running past the end of the clip are zero-padded.
pub fn compute_spectrogram(clip: &AudioClip, spec: &FilterbankSpec) -> Result<Spectrogram> {
    let bank = design_filterbank(spec, clip.sample_rate_hz)?;
    compute_with(clip, spec, &bank)
}

pub fn compute_with(clip: &AudioClip, spec: &FilterbankSpec, bank: &Filterbank) -> Result<Spectrogram> {
    if clip.sample_rate_hz != bank.sample_rate_hz {
        return Err(Error::InvalidConfig(format!(
            "clip sample rate {} Hz does not match filterbank {} Hz",
            clip.sample_rate_hz, bank.sample_rate_hz
        )));
    }
    let n = clip.samples.len();
    if n < bank.window_len {
        return Err(Error::ClipTooShort {
            stimulus: clip.stimulus_id.clone(),
            samples: n,
            window: bank.window_len,
        });
    }
    let n_frames = n / bank.hop_len;
    let window = hann(bank.window_len);
    let norm = window.iter().sum::<f64>().powi(2);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(bank.n_fft);
    let n_bins = bank.n_fft / 2 + 1;
    // Nonzero support of each normalized triangle: (first bin, weights).
    let bands: Vec<(usize, Vec<f64>)> = bank
        .weights
        .row_iter()
        .map(|row| {
            let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            let gain: f64 = row.iter().sum();
            let w = (first..=last).map(|b| row[b] / gain).collect();
            (first, w)
        })
        .collect();

    let columns: Vec<Vec<f64>> = (0..n_frames)
        .into_par_iter()
        .map(|j| {
            let start = j * bank.hop_len;
            let mut buf = vec![Complex::new(0.0, 0.0); bank.n_fft];
            for (i, w) in window.iter().enumerate() {
                if let Some(&x) = clip.samples.get(start + i) {
                    buf[i] = Complex::new(x * w, 0.0);
                }
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr() / norm).collect();
            bands
                .iter()
                .map(|(first, w)| {
                    let e: f64 = w.iter().zip(&power[*first..]).map(|(w, p)| w * p).sum();
                    match spec.compression {
                        Compression::Linear => e,
                        Compression::LogPower => e.ln_1p(),
                    }
                })
                .collect()
        })
        .collect();

    let data = DMatrix::from_fn(spec.n_channels, n_frames, |k, j| columns[j][k]);
    Spectrogram::new(
        clip.stimulus_id.clone(),
        data,
        spec.frame_period_ms,
        bank.center_freqs_hz.clone(),
    )
}
