use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pairwise::{pair_correlation_test, PairResult};
use super::score::{FeatureAccumulator, FeatureScores};
use crate::decoder::{
    fit_selected, predict, DecoderModel, FitOptions, GridSpec, KernelSpec, LooSelection, Solver,
};
use crate::error::{Error, Result};
use crate::lagging::{build_lagged_design, LagSpec};
use crate::tensorio::Dataset;

/// Folds are evaluated in parallel in chunks of this many pairs, then merged
/// in pair order.
const CHUNK: usize = 64;

/// Which held-out pairs to evaluate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairFilter {
    #[default]
    All,
    /// A seeded random subset of `count` pairs (all pairs if fewer exist).
    Sample { count: usize, seed: u64 },
    Explicit { pairs: Vec<(String, String)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub lag: LagSpec,
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub solver: Solver,
    pub fit: FitOptions,
    pub pair_filter: PairFilter,
}

impl CvConfig {
    /// Linear kernel, default grid, all pairs.
    pub fn new(lag: LagSpec) -> Self {
        CvConfig {
            lag,
            kernel: KernelSpec::Linear,
            grid: GridSpec::default(),
            solver: Solver::Auto,
            fit: FitOptions::default(),
            pair_filter: PairFilter::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub lag: LagSpec,
    pub pair_results: Vec<PairResult>,
    pub n_pairs: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    /// Mean label accuracy over the evaluated pairs containing each item.
    pub item_accuracy: BTreeMap<String, f64>,
    pub feature_scores: FeatureScores,
    pub center_freqs_hz: Vec<f64>,
}

impl EvalReport {
    pub fn lag_ms(&self) -> f64 {
        self.lag.lag_ms
    }
}

/// Every unordered pair `(i, j)` with `i < j`, in lexicographic order.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Dataset positions of the pairs selected by `filter`.
pub fn fold_pairs(ds: &Dataset, filter: &PairFilter) -> Result<Vec<(usize, usize)>> {
    let all = all_pairs(ds.len());
    match filter {
        PairFilter::All => Ok(all),
        PairFilter::Sample { count, seed } => {
            if *count >= all.len() {
                return Ok(all);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut picked = index::sample(&mut rng, all.len(), *count).into_vec();
            picked.sort_unstable();
            Ok(picked.into_iter().map(|k| all[k]).collect())
        }
        PairFilter::Explicit { pairs } => pairs
            .iter()
            .map(|(a, b)| {
                let pos = |id: &str| ds.position(id).ok_or_else(|| Error::UnknownStimulus(id.to_string()));
                let (i, j) = (pos(a)?, pos(b)?);
                if i == j {
                    return Err(Error::InvalidConfig(format!("pair ({a}, {b}) repeats a stimulus")));
                }
                Ok((i, j))
            })
            .collect(),
    }
}

/// Fits a fresh model (standardizers and λ included) on `train_ids` only.
pub fn fit_fold<S: AsRef<str> + Sync>(
    ds: &Dataset,
    train_ids: &[S],
    cfg: &CvConfig,
) -> Result<(DecoderModel, LooSelection)> {
    let (design, targets) = build_lagged_design(ds, &cfg.lag, train_ids, cfg.fit.build)?;
    fit_selected(&design, &targets, &cfg.grid, cfg.kernel, cfg.solver, &cfg.fit)
}

struct FoldOutcome {
    result: PairResult,
    samples: [(DMatrix<f64>, DMatrix<f64>); 2],
}

fn run_fold(ds: &Dataset, ids: &[&str], (i, j): (usize, usize), cfg: &CvConfig) -> Result<FoldOutcome> {
    let train: Vec<&str> = ids
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i && k != j)
        .map(|(_, id)| *id)
        .collect();
    let (model, _) = fit_fold(ds, &train, cfg)?;
    let preds = predict(&model, ds, &[ids[i], ids[j]], cfg.fit.build)?;
    let (s1, s2) = (&ds.spectrograms()[i], &ds.spectrograms()[j]);
    let result = pair_correlation_test(s1, s2, &preds[0], &preds[1])?;
    let frames = result.truncated_frames;
    let cut = |m: &DMatrix<f64>| m.columns(0, frames).into_owned();
    Ok(FoldOutcome {
        samples: [
            (cut(&s1.data), cut(&preds[0].data)),
            (cut(&s2.data), cut(&preds[1].data)),
        ],
        result,
    })
}

/// Leave-two-out cross-validation with the 2-vs-2 test on every selected pair.
pub fn leave_two_out_cv(ds: &Dataset, cfg: &CvConfig) -> Result<EvalReport> {
    if ds.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "leave-two-out needs at least 3 stimuli, got {}",
            ds.len()
        )));
    }
    let pairs = fold_pairs(ds, &cfg.pair_filter)?;
    let ids: Vec<&str> = ds.ids().collect();
    let n_freqs = ds.spectrograms()[0].n_freqs();
    let mut acc = FeatureAccumulator::new(n_freqs);
    let mut pair_results = Vec::with_capacity(pairs.len());
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    for chunk in pairs.chunks(CHUNK) {
        let outcomes: Vec<Result<FoldOutcome>> = chunk
            .par_iter()
            .map(|&pair| {
                run_fold(ds, &ids, pair, cfg).map_err(|e| Error::Fold {
                    id_a: ids[pair.0].to_string(),
                    id_b: ids[pair.1].to_string(),
                    source: Box::new(e),
                })
            })
            .collect();
        for outcome in outcomes {
            let outcome = outcome?;
            for (s, p) in &outcome.samples {
                acc.push(s, p)?;
            }
            let r = &outcome.result;
            for id in [&r.id_a, &r.id_b] {
                let e = hits.entry(id.clone()).or_default();
                e.0 += usize::from(r.correct);
                e.1 += 1;
            }
            pair_results.push(outcome.result);
        }
    }

    let n_pairs = pair_results.len();
    let n_correct = pair_results.iter().filter(|r| r.correct).count();
    Ok(EvalReport {
        lag: cfg.lag,
        n_pairs,
        n_correct,
        accuracy: if n_pairs == 0 { 0.0 } else { n_correct as f64 / n_pairs as f64 },
        item_accuracy: hits
            .into_iter()
            .map(|(id, (c, n))| (id, c as f64 / n as f64))
            .collect(),
        feature_scores: acc.finish(),
        center_freqs_hz: ds.spectrograms()[0].center_freqs_hz.clone(),
        pair_results,
    })
}

/// Runs [`leave_two_out_cv`] once per lag, on the same pairs.
pub fn lag_sweep(ds: &Dataset, lags: &[LagSpec], cfg: &CvConfig) -> Result<Vec<EvalReport>> {
    lags.iter()
        .map(|lag| {
            let cfg = CvConfig {
                lag: *lag,
                ..cfg.clone()
            };
            leave_two_out_cv(ds, &cfg)
        })
        .collect()
}
