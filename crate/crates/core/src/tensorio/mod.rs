//! Data model, on-disk formats and preprocessing for neural recordings and
//! stimulus spectrograms.
//!
//! A [`Dataset`] pairs one [`Recording`] (channels × samples) with one
//! [`Spectrogram`] (frequency channels × frames) per stimulus id. On disk it
//! is a JSON manifest plus one raw little-endian `f64` blob per matrix, see
//! [`save_dataset`] and [`load_dataset`].

pub(crate) mod io;
mod preprocess;

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use io::{
    load_audio_clips, load_dataset, load_spectrogram_set, read_blob, save_audio_clips,
    save_dataset, save_spectrogram_set, write_blob, AudioManifest, DatasetManifest,
    SpectrogramSetManifest, FORMAT_VERSION,
};
pub use preprocess::{
    apply_standardizer, baseline_correct, downsample, fit_standardizer, select_channels,
    StandardizationStats, STD_EPSILON,
};

/// One stimulus's neural response, stored channels × samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub stimulus_id: String,
    pub data: DMatrix<f64>,
    pub sample_period_ms: f64,
    /// Time of the first sample relative to stimulus onset; negative values
    /// mean the recording starts before the stimulus.
    pub t0_offset_ms: f64,
    pub channel_names: Vec<String>,
}

impl Recording {
    pub fn new(
        stimulus_id: impl Into<String>,
        data: DMatrix<f64>,
        sample_period_ms: f64,
        t0_offset_ms: f64,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        let rec = Recording {
            stimulus_id: stimulus_id.into(),
            data,
            sample_period_ms,
            t0_offset_ms,
            channel_names,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period_ms > 0.0 && self.sample_period_ms.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sample period must be positive, got {}",
                self.sample_period_ms
            )));
        }
        if !self.t0_offset_ms.is_finite() {
            return Err(Error::InvalidConfig("t0 offset must be finite".into()));
        }
        if self.channel_names.len() != self.data.nrows() {
            return Err(Error::dims(
                format!("channel names of {:?}", self.stimulus_id),
                self.data.nrows(),
                self.channel_names.len(),
            ));
        }
        check_finite(&self.data, &self.stimulus_id, "recording")
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    /// Time of sample `i` relative to stimulus onset.
    pub fn sample_time_ms(&self, i: usize) -> f64 {
        self.t0_offset_ms + i as f64 * self.sample_period_ms
    }
}

/// Time-frequency representation of one stimulus, stored frequency channels × frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub stimulus_id: String,
    pub data: DMatrix<f64>,
    pub frame_period_ms: f64,
    pub center_freqs_hz: Vec<f64>,
}

impl Spectrogram {
    pub fn new(
        stimulus_id: impl Into<String>,
        data: DMatrix<f64>,
        frame_period_ms: f64,
        center_freqs_hz: Vec<f64>,
    ) -> Result<Self> {
        let spec = Spectrogram {
            stimulus_id: stimulus_id.into(),
            data,
            frame_period_ms,
            center_freqs_hz,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_period_ms > 0.0 && self.frame_period_ms.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "frame period must be positive, got {}",
                self.frame_period_ms
            )));
        }
        if self.center_freqs_hz.len() != self.data.nrows() {
            return Err(Error::dims(
                format!("center frequencies of {:?}", self.stimulus_id),
                self.data.nrows(),
                self.center_freqs_hz.len(),
            ));
        }
        if self.center_freqs_hz.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::InvalidConfig(
                "center frequencies must be positive".into(),
            ));
        }
        if self.center_freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "center frequencies must be strictly increasing".into(),
            ));
        }
        check_finite(&self.data, &self.stimulus_id, "spectrogram")
    }

    pub fn n_freqs(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.data.ncols()
    }
}

/// Paired recordings and spectrograms, indexed by stimulus id.
///
/// Spectrograms are kept in the same order as recordings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    recordings: Vec<Recording>,
    spectrograms: Vec<Spectrogram>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(recordings: Vec<Recording>, spectrograms: Vec<Spectrogram>) -> Result<Self> {
        let mut index = HashMap::with_capacity(recordings.len());
        for (i, rec) in recordings.iter().enumerate() {
            rec.validate()?;
            if index.insert(rec.stimulus_id.clone(), i).is_some() {
                return Err(Error::DuplicateStimulus(rec.stimulus_id.clone()));
            }
        }
        let mut seen = HashSet::with_capacity(spectrograms.len());
        let mut slots: Vec<Option<Spectrogram>> = vec![None; recordings.len()];
        for spec in spectrograms {
            spec.validate()?;
            if !seen.insert(spec.stimulus_id.clone()) {
                return Err(Error::DuplicateStimulus(spec.stimulus_id));
            }
            match index.get(&spec.stimulus_id) {
                Some(&i) => slots[i] = Some(spec),
                None => return Err(Error::UnpairedStimulus(spec.stimulus_id)),
            }
        }
        let spectrograms = slots
            .into_iter()
            .zip(&recordings)
            .map(|(s, r)| s.ok_or_else(|| Error::UnpairedStimulus(r.stimulus_id.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            recordings,
            spectrograms,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn recordings(&self) -> &[Recording] {
        &self.recordings
    }

    pub fn spectrograms(&self) -> &[Spectrogram] {
        &self.spectrograms
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.recordings.iter().map(|r| r.stimulus_id.as_str())
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Result<(&Recording, &Spectrogram)> {
        let i = self
            .position(id)
            .ok_or_else(|| Error::UnknownStimulus(id.to_string()))?;
        Ok((&self.recordings[i], &self.spectrograms[i]))
    }

    /// Dataset restricted to `ids`, in the given order.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Dataset> {
        let mut recs = Vec::with_capacity(ids.len());
        let mut specs = Vec::with_capacity(ids.len());
        for id in ids {
            let (r, s) = self.get(id.as_ref())?;
            recs.push(r.clone());
            specs.push(s.clone());
        }
        Dataset::new(recs, specs)
    }

    /// Applies `f` to every recording, keeping spectrograms.
    pub fn map_recordings<F>(&self, mut f: F) -> Result<Dataset>
    where
        F: FnMut(&Recording) -> Result<Recording>,
    {
        let recs = self.recordings.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Dataset::new(recs, self.spectrograms.clone())
    }

    /// Replaces the spectrograms, which must cover exactly the same ids.
    pub fn with_spectrograms(&self, spectrograms: Vec<Spectrogram>) -> Result<Dataset> {
        Dataset::new(self.recordings.clone(), spectrograms)
    }

    pub fn into_parts(self) -> (Vec<Recording>, Vec<Spectrogram>) {
        (self.recordings, self.spectrograms)
    }
}

fn check_finite(m: &DMatrix<f64>, stimulus: &str, blob: &'static str) -> Result<()> {
    // Report the row-major offset, matching the blob layout.
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFinite {
                    stimulus: stimulus.to_string(),
                    blob,
                    offset: r * m.ncols() + c,
                });
            }
        }
    }
    Ok(())
}

/// Returns `target / base` when it is a positive integer (to 1e-9 relative).
pub(crate) fn integer_ratio(target: f64, base: f64) -> Option<usize> {
    if !(target.is_finite() && base > 0.0) || target < 0.0 {
        return None;
    }
    let ratio = target / base;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}
