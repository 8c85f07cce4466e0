//! Stacked lagged design matrices.
//!
//! For a stimulus frame `t`, the design row holds the neural response at
//! frames `t, t+1, ..., t+lag_bins-1` for every channel: the stimulus at time
//! `t` is decoded from the response that follows it. Columns are lag-major,
//! so with channels `u, v` and two lag bins a row reads
//! `[u_t, v_t, u_{t+1}, v_{t+1}]`. Response frames past the end of a
//! recording are zero.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::{integer_ratio, Dataset, Recording};

/// Duration of the response window used to decode one stimulus frame.
///
/// `lag_ms` is the nonnegative window length (the negated `τ ≤ 0` of a causal
/// response function). The window includes lag 0, so
/// `lag_bins = lag_ms / frame_period_ms + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagSpec {
    pub lag_ms: f64,
    pub frame_period_ms: f64,
    pub lag_bins: usize,
}

impl LagSpec {
    pub fn new(lag_ms: f64, frame_period_ms: f64) -> Result<Self> {
        if !(frame_period_ms > 0.0 && frame_period_ms.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "frame period must be positive, got {frame_period_ms}"
            )));
        }
        let steps = integer_ratio(lag_ms, frame_period_ms).ok_or(Error::NonIntegerRatio {
            target: lag_ms,
            base: frame_period_ms,
        })?;
        Ok(LagSpec {
            lag_ms,
            frame_period_ms,
            lag_bins: steps + 1,
        })
    }

    /// Lag spec spanning `lag_bins` frames.
    pub fn from_bins(lag_bins: usize, frame_period_ms: f64) -> Result<Self> {
        if lag_bins == 0 {
            return Err(Error::InvalidConfig("lag_bins must be at least 1".into()));
        }
        LagSpec::new((lag_bins - 1) as f64 * frame_period_ms, frame_period_ms)
    }
}

/// One [`LagSpec`] per lag in `lags_ms`.
pub fn lag_grid_from_ms(lags_ms: &[f64], frame_period_ms: f64) -> Result<Vec<LagSpec>> {
    lags_ms
        .iter()
        .map(|&lag| LagSpec::new(lag, frame_period_ms))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildOptions {
    /// How many spectrogram frames may extend past the recording's last
    /// post-onset sample; such frames get all-zero design rows.
    pub max_overrun_frames: usize,
}

/// Row provenance: stimulus id and frame index within that stimulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIndex {
    pub stimulus_id: String,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    pub rows: DMatrix<f64>,
    pub row_index: Vec<RowIndex>,
    pub lag_spec: LagSpec,
    pub channel_names: Vec<String>,
}

impl LaggedDesign {
    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    /// Column holding `channel` at lag bin `lag`.
    pub fn column(&self, lag: usize, channel: usize) -> usize {
        lag * self.channel_names.len() + channel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    /// Stacked frames × frequency channels.
    pub values: DMatrix<f64>,
    pub row_index: Vec<RowIndex>,
    pub center_freqs_hz: Vec<f64>,
}

fn onset_index(rec: &Recording) -> Result<usize> {
    if rec.t0_offset_ms > 0.0 {
        return Err(Error::InvalidConfig(format!(
            "recording {:?} starts {} ms after stimulus onset",
            rec.stimulus_id, rec.t0_offset_ms
        )));
    }
    integer_ratio(-rec.t0_offset_ms, rec.sample_period_ms).ok_or(Error::NonIntegerRatio {
        target: -rec.t0_offset_ms,
        base: rec.sample_period_ms,
    })
}

fn same_period(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Lagged rows of a single recording for stimulus frames `0..n_frames`.
///
/// The recording must already be sampled at the lag spec's frame period.
pub fn lag_recording(
    rec: &Recording,
    n_frames: usize,
    spec: &LagSpec,
    options: BuildOptions,
) -> Result<DMatrix<f64>> {
    if !same_period(rec.sample_period_ms, spec.frame_period_ms) {
        return Err(Error::FramePeriodMismatch {
            stimulus: rec.stimulus_id.clone(),
            recording_ms: rec.sample_period_ms,
            spectrogram_ms: spec.frame_period_ms,
        });
    }
    let onset = onset_index(rec)?;
    let n_samples = rec.n_samples();
    let available = n_samples.saturating_sub(onset);
    if n_frames > available + options.max_overrun_frames {
        return Err(Error::SpectrogramTooLong {
            stimulus: rec.stimulus_id.clone(),
            frames: n_frames,
            available,
            tolerance: options.max_overrun_frames,
        });
    }
    let channels = rec.n_channels();
    let mut out = DMatrix::zeros(n_frames, spec.lag_bins * channels);
    for lag in 0..spec.lag_bins {
        for t in 0..n_frames {
            let sample = onset + t + lag;
            if sample >= n_samples {
                break;
            }
            for ch in 0..channels {
                out[(t, lag * channels + ch)] = rec.data[(ch, sample)];
            }
        }
    }
    Ok(out)
}

fn stack(blocks: &[DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let total = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(total, ncols);
    let mut offset = 0;
    for b in blocks {
        out.rows_mut(offset, b.nrows()).copy_from(b);
        offset += b.nrows();
    }
    out
}

/// Builds the stacked design and target matrices for `stimulus_ids`, in order.
pub fn build_lagged_design<S: AsRef<str> + Sync>(
    ds: &Dataset,
    spec: &LagSpec,
    stimulus_ids: &[S],
    options: BuildOptions,
) -> Result<(LaggedDesign, TargetMatrix)> {
    let pairs = stimulus_ids
        .iter()
        .map(|id| ds.get(id.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let (channel_names, center_freqs) = match pairs.first() {
        Some((r, s)) => (r.channel_names.clone(), s.center_freqs_hz.clone()),
        None => {
            return Err(Error::InvalidConfig(
                "no stimuli given for the design matrix".into(),
            ))
        }
    };
    for (rec, sg) in &pairs {
        if rec.channel_names != channel_names {
            return Err(Error::InvalidConfig(format!(
                "recording {:?} has a different channel set",
                rec.stimulus_id
            )));
        }
        if sg.center_freqs_hz != center_freqs {
            return Err(Error::InvalidConfig(format!(
                "spectrogram {:?} has different center frequencies",
                sg.stimulus_id
            )));
        }
        if !same_period(rec.sample_period_ms, sg.frame_period_ms) {
            return Err(Error::FramePeriodMismatch {
                stimulus: rec.stimulus_id.clone(),
                recording_ms: rec.sample_period_ms,
                spectrogram_ms: sg.frame_period_ms,
            });
        }
    }

    let blocks = pairs
        .par_iter()
        .map(|(rec, sg)| lag_recording(rec, sg.n_frames(), spec, options))
        .collect::<Result<Vec<_>>>()?;
    let rows = stack(&blocks, spec.lag_bins * channel_names.len());
    let targets: Vec<DMatrix<f64>> = pairs.iter().map(|(_, sg)| sg.data.transpose()).collect();
    let values = stack(&targets, center_freqs.len());

    let row_index: Vec<RowIndex> = pairs
        .iter()
        .flat_map(|(_, sg)| {
            (0..sg.n_frames()).map(move |frame| RowIndex {
                stimulus_id: sg.stimulus_id.clone(),
                frame,
            })
        })
        .collect();

    Ok((
        LaggedDesign {
            rows,
            row_index: row_index.clone(),
            lag_spec: *spec,
            channel_names,
        },
        TargetMatrix {
            values,
            row_index,
            center_freqs_hz: center_freqs,
        },
    ))
}
