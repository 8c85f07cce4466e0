use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, Recording, Spectrogram};
use crate::audiofeat::AudioClip;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes a matrix as raw little-endian `f64`, row-major, no header.
pub fn write_blob(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(m.len() * 8);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            bytes.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a `rows × cols` blob; the byte length must match exactly.
pub fn read_blob(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = rows * cols * 8;
    if bytes.len() != expected {
        return Err(Error::dims(
            format!("byte length of {}", path.display()),
            expected,
            bytes.len(),
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    Ok(DMatrix::from_row_iterator(rows, cols, values))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported format_version {v}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusEntry {
    pub id: String,
    pub recording_blob: String,
    pub spectrogram_blob: String,
    pub channels: usize,
    pub samples: usize,
    pub freq_channels: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub stimuli: Vec<StimulusEntry>,
    pub sample_period_ms: f64,
    pub frame_period_ms: f64,
    pub t0_offset_ms: f64,
    pub channel_names: Vec<String>,
    pub center_freqs_hz: Vec<f64>,
}

/// Loads a dataset from its JSON manifest; blob paths are relative to the
/// manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest = read_json(manifest_path)?;
    check_version(manifest.format_version)?;
    let dir = base_dir(manifest_path);
    let mut recordings = Vec::with_capacity(manifest.stimuli.len());
    let mut spectrograms = Vec::with_capacity(manifest.stimuli.len());
    for entry in &manifest.stimuli {
        if entry.channels != manifest.channel_names.len() {
            return Err(Error::dims(
                format!("channels of {:?}", entry.id),
                manifest.channel_names.len(),
                entry.channels,
            ));
        }
        if entry.freq_channels != manifest.center_freqs_hz.len() {
            return Err(Error::dims(
                format!("freq_channels of {:?}", entry.id),
                manifest.center_freqs_hz.len(),
                entry.freq_channels,
            ));
        }
        let data = read_blob(&dir.join(&entry.recording_blob), entry.channels, entry.samples)?;
        recordings.push(Recording::new(
            entry.id.clone(),
            data,
            manifest.sample_period_ms,
            manifest.t0_offset_ms,
            manifest.channel_names.clone(),
        )?);
        let data = read_blob(
            &dir.join(&entry.spectrogram_blob),
            entry.freq_channels,
            entry.frames,
        )?;
        spectrograms.push(Spectrogram::new(
            entry.id.clone(),
            data,
            manifest.frame_period_ms,
            manifest.center_freqs_hz.clone(),
        )?);
    }
    Dataset::new(recordings, spectrograms)
}

/// Writes `manifest.json` plus one blob per matrix into `dir`.
///
/// Sampling metadata lives once in the manifest, so all recordings must share
/// sample period, onset offset and channel names, and all spectrograms must
/// share frame period and center frequencies.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (first_rec, first_spec) = match (ds.recordings().first(), ds.spectrograms().first()) {
        (Some(r), Some(s)) => (Some(r), Some(s)),
        _ => (None, None),
    };
    for (rec, spec) in ds.recordings().iter().zip(ds.spectrograms()) {
        let (r0, s0) = (first_rec.unwrap(), first_spec.unwrap());
        if rec.sample_period_ms.to_bits() != r0.sample_period_ms.to_bits()
            || rec.t0_offset_ms.to_bits() != r0.t0_offset_ms.to_bits()
            || rec.channel_names != r0.channel_names
        {
            return Err(Error::Manifest(format!(
                "recording {:?} has sampling metadata differing from {:?}",
                rec.stimulus_id, r0.stimulus_id
            )));
        }
        if spec.frame_period_ms.to_bits() != s0.frame_period_ms.to_bits()
            || spec.center_freqs_hz != s0.center_freqs_hz
        {
            return Err(Error::Manifest(format!(
                "spectrogram {:?} has frame metadata differing from {:?}",
                spec.stimulus_id, s0.stimulus_id
            )));
        }
    }

    let mut stimuli = Vec::with_capacity(ds.len());
    for (i, (rec, spec)) in ds.recordings().iter().zip(ds.spectrograms()).enumerate() {
        let recording_blob = format!("rec_{i:04}.f64");
        let spectrogram_blob = format!("spec_{i:04}.f64");
        write_blob(&dir.join(&recording_blob), &rec.data)?;
        write_blob(&dir.join(&spectrogram_blob), &spec.data)?;
        stimuli.push(StimulusEntry {
            id: rec.stimulus_id.clone(),
            recording_blob,
            spectrogram_blob,
            channels: rec.n_channels(),
            samples: rec.n_samples(),
            freq_channels: spec.n_freqs(),
            frames: spec.n_frames(),
        });
    }
    // An empty dataset has no metadata to carry; zeros are written as placeholders.
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        stimuli,
        sample_period_ms: first_rec.map_or(0.0, |r| r.sample_period_ms),
        frame_period_ms: first_spec.map_or(0.0, |s| s.frame_period_ms),
        t0_offset_ms: first_rec.map_or(0.0, |r| r.t0_offset_ms),
        channel_names: first_rec.map_or_else(Vec::new, |r| r.channel_names.clone()),
        center_freqs_hz: first_spec.map_or_else(Vec::new, |s| s.center_freqs_hz.clone()),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramEntry {
    pub id: String,
    pub blob: String,
    pub freq_channels: usize,
    pub frames: usize,
}

/// Spectrograms without recordings: the output of feature extraction and of
/// prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramSetManifest {
    pub format_version: u32,
    pub frame_period_ms: f64,
    pub center_freqs_hz: Vec<f64>,
    pub items: Vec<SpectrogramEntry>,
}

pub fn save_spectrogram_set(specs: &[Spectrogram], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut items = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        if spec.frame_period_ms.to_bits() != specs[0].frame_period_ms.to_bits()
            || spec.center_freqs_hz != specs[0].center_freqs_hz
        {
            return Err(Error::Manifest(format!(
                "spectrogram {:?} has frame metadata differing from {:?}",
                spec.stimulus_id, specs[0].stimulus_id
            )));
        }
        let blob = format!("spec_{i:04}.f64");
        write_blob(&dir.join(&blob), &spec.data)?;
        items.push(SpectrogramEntry {
            id: spec.stimulus_id.clone(),
            blob,
            freq_channels: spec.n_freqs(),
            frames: spec.n_frames(),
        });
    }
    let manifest = SpectrogramSetManifest {
        format_version: FORMAT_VERSION,
        frame_period_ms: specs.first().map_or(0.0, |s| s.frame_period_ms),
        center_freqs_hz: specs
            .first()
            .map_or_else(Vec::new, |s| s.center_freqs_hz.clone()),
        items,
    };
    let path = dir.join("spectrograms.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn load_spectrogram_set(manifest_path: &Path) -> Result<Vec<Spectrogram>> {
    let manifest: SpectrogramSetManifest = read_json(manifest_path)?;
    check_version(manifest.format_version)?;
    let dir = base_dir(manifest_path);
    manifest
        .items
        .iter()
        .map(|item| {
            let data = read_blob(&dir.join(&item.blob), item.freq_channels, item.frames)?;
            Spectrogram::new(
                item.id.clone(),
                data,
                manifest.frame_period_ms,
                manifest.center_freqs_hz.clone(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioEntry {
    pub id: String,
    pub blob: String,
    pub samples: usize,
}

/// Mono PCM clips, each a `1 × samples` blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioManifest {
    pub format_version: u32,
    pub sample_rate_hz: u32,
    pub clips: Vec<AudioEntry>,
}

pub fn save_audio_clips(clips: &[AudioClip], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rate = clips.first().map_or(0, |c| c.sample_rate_hz);
    let mut entries = Vec::with_capacity(clips.len());
    for (i, clip) in clips.iter().enumerate() {
        if clip.sample_rate_hz != rate {
            return Err(Error::Manifest(format!(
                "clip {:?} has sample rate {} Hz, expected {rate} Hz",
                clip.stimulus_id, clip.sample_rate_hz
            )));
        }
        let blob = format!("audio_{i:04}.f64");
        let m = DMatrix::from_row_slice(1, clip.samples.len(), &clip.samples);
        write_blob(&dir.join(&blob), &m)?;
        entries.push(AudioEntry {
            id: clip.stimulus_id.clone(),
            blob,
            samples: clip.samples.len(),
        });
    }
    let manifest = AudioManifest {
        format_version: FORMAT_VERSION,
        sample_rate_hz: rate,
        clips: entries,
    };
    let path = dir.join("audio.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn load_audio_clips(manifest_path: &Path) -> Result<Vec<AudioClip>> {
    let manifest: AudioManifest = read_json(manifest_path)?;
    check_version(manifest.format_version)?;
    let dir = base_dir(manifest_path);
    manifest
        .clips
        .iter()
        .map(|entry| {
            let m = read_blob(&dir.join(&entry.blob), 1, entry.samples)?;
            if let Some(offset) = m.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    stimulus: entry.id.clone(),
                    blob: "audio",
                    offset,
                });
            }
            AudioClip::new(entry.id.clone(), m.iter().copied().collect(), manifest.sample_rate_hz)
        })
        .collect()
}
