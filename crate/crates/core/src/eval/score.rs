use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of variance explained per feature, pooled over all held-out
/// samples of a cross-validation run.
///
/// For each (frequency, frame) cell: `1 − Σ(s − ŝ)² / Σ(s − s̄)²`, where s̄ is
/// the mean over all samples reaching that cell. The per-frequency score sums
/// numerator and denominator over frames. `None` marks an undefined score
/// (constant originals).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScores {
    pub per_cell: DMatrix<Option<f64>>,
    pub per_frequency: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    count: f64,
    mean: f64,
    /// Σ(s − s̄)², updated in the stable streaming form.
    m2: f64,
    sse: f64,
}

impl Cell {
    fn push(&mut self, s: f64, p: f64) {
        self.count += 1.0;
        let delta = s - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (s - self.mean);
        self.sse += (s - p) * (s - p);
    }
}

/// Streaming accumulator for [`FeatureScores`]. Samples of differing length
/// contribute only to the frames they cover.
#[derive(Debug, Clone)]
pub struct FeatureAccumulator {
    n_freqs: usize,
    cells: Vec<Vec<Cell>>,
}

impl FeatureAccumulator {
    pub fn new(n_freqs: usize) -> Self {
        FeatureAccumulator {
            n_freqs,
            cells: Vec::new(),
        }
    }

    /// Adds one (original, prediction) sample, both freq × frames.
    pub fn push(&mut self, original: &DMatrix<f64>, prediction: &DMatrix<f64>) -> Result<()> {
        if original.shape() != prediction.shape() {
            return Err(Error::dims(
                "prediction columns",
                original.ncols(),
                prediction.ncols(),
            ));
        }
        if original.nrows() != self.n_freqs {
            return Err(Error::dims("frequency channels", self.n_freqs, original.nrows()));
        }
        if self.cells.len() < original.ncols() {
            self.cells.resize(original.ncols(), vec![Cell::default(); self.n_freqs]);
        }
        for (t, col) in self.cells.iter_mut().enumerate().take(original.ncols()) {
            for (f, cell) in col.iter_mut().enumerate() {
                cell.push(original[(f, t)], prediction[(f, t)]);
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> FeatureScores {
        let frames = self.cells.len();
        let score = |sse: f64, sst: f64, scale: f64| {
            // Constant originals leave only rounding noise in sst.
            if sst <= 1e-14 * scale || sst == 0.0 {
                None
            } else {
                Some(1.0 - sse / sst)
            }
        };
        let per_cell = DMatrix::from_fn(self.n_freqs, frames, |f, t| {
            let c = &self.cells[t][f];
            score(c.sse, c.m2, c.count * c.mean * c.mean)
        });
        let per_frequency = (0..self.n_freqs)
            .map(|f| {
                let (mut sse, mut sst, mut scale) = (0.0, 0.0, 0.0);
                for col in &self.cells {
                    let c = &col[f];
                    sse += c.sse;
                    sst += c.m2;
                    scale += c.count * c.mean * c.mean;
                }
                score(sse, sst, scale)
            })
            .collect();
        FeatureScores {
            per_cell,
            per_frequency,
        }
    }
}

/// Scores aligned (original, prediction) samples.
pub fn feature_score(samples: &[(&DMatrix<f64>, &DMatrix<f64>)]) -> Result<FeatureScores> {
    let n_freqs = samples.first().map(|(s, _)| s.nrows()).unwrap_or(0);
    let mut acc = FeatureAccumulator::new(n_freqs);
    for (s, p) in samples {
        acc.push(s, p)?;
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub freq_hz: f64,
    pub score: f64,
}

/// Top `k` defined scores, descending; ties go to the lower frequency.
pub fn rank_features(scores: &[Option<f64>], freqs_hz: &[f64], k: usize) -> Result<Vec<RankedFeature>> {
    if scores.len() != freqs_hz.len() {
        return Err(Error::dims("feature frequencies", scores.len(), freqs_hz.len()));
    }
    if k > scores.len() {
        return Err(Error::InvalidConfig(format!(
            "asked for the top {k} of {} features",
            scores.len()
        )));
    }
    let mut ranked: Vec<RankedFeature> = scores
        .iter()
        .zip(freqs_hz)
        .enumerate()
        .filter_map(|(index, (s, &freq_hz))| s.map(|score| RankedFeature { index, freq_hz, score }))
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.freq_hz.total_cmp(&b.freq_hz))
    });
    ranked.truncate(k);
    Ok(ranked)
}
