use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{integer_ratio, Recording};
use crate::error::{Error, Result};

/// Columns whose standard deviation falls below this are treated as constant.
pub const STD_EPSILON: f64 = 1e-12;

/// Half-open window membership with a small tolerance for accumulated
/// floating error in sample times.
fn in_window(t: f64, start: f64, end: f64) -> bool {
    const TOL: f64 = 1e-9;
    t >= start - TOL && t < end - TOL
}

/// Subtracts, per channel, the mean over samples with times in
/// `[window_start_ms, window_end_ms)`.
pub fn baseline_correct(
    rec: &Recording,
    window_start_ms: f64,
    window_end_ms: f64,
) -> Result<Recording> {
    let empty = Error::EmptyBaselineWindow {
        start_ms: window_start_ms,
        end_ms: window_end_ms,
    };
    if !(window_start_ms < window_end_ms) {
        return Err(empty);
    }
    let cols: Vec<usize> = (0..rec.n_samples())
        .filter(|&i| in_window(rec.sample_time_ms(i), window_start_ms, window_end_ms))
        .collect();
    if cols.is_empty() {
        return Err(empty);
    }
    let mut out = rec.clone();
    for (ch, mut row) in out.data.row_iter_mut().enumerate() {
        let mean = cols.iter().map(|&c| rec.data[(ch, c)]).sum::<f64>() / cols.len() as f64;
        row.add_scalar_mut(-mean);
    }
    Ok(out)
}

/// Block-averages to `target_period_ms`, dropping a trailing partial block.
pub fn downsample(rec: &Recording, target_period_ms: f64) -> Result<Recording> {
    let factor = integer_ratio(target_period_ms, rec.sample_period_ms)
        .filter(|&k| k >= 1)
        .ok_or(Error::NonIntegerRatio {
            target: target_period_ms,
            base: rec.sample_period_ms,
        })?;
    if factor == 1 {
        return Ok(rec.clone());
    }
    let n_out = rec.n_samples() / factor;
    let data = DMatrix::from_fn(rec.n_channels(), n_out, |ch, j| {
        let block = rec.data.row(ch).columns(j * factor, factor).sum();
        block / factor as f64
    });
    Ok(Recording {
        data,
        sample_period_ms: target_period_ms,
        ..rec.clone()
    })
}

/// Restricts a recording to `names`, in that order.
pub fn select_channels<S: AsRef<str>>(rec: &Recording, names: &[S]) -> Result<Recording> {
    let mut rows = Vec::with_capacity(names.len());
    let mut missing = Vec::new();
    for name in names {
        match rec.channel_names.iter().position(|c| c == name.as_ref()) {
            Some(i) => rows.push(i),
            None => missing.push(name.as_ref().to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnknownChannel(missing));
    }
    Ok(Recording {
        data: rec.data.select_rows(rows.iter()),
        channel_names: rows.iter().map(|&i| rec.channel_names[i].clone()).collect(),
        ..rec.clone()
    })
}

/// Per-feature location and scale, fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant feature.
    pub stds: Vec<f64>,
    pub epsilon: f64,
}

impl StandardizationStats {
    /// Stats that leave data unchanged.
    pub fn identity(n: usize) -> Self {
        StandardizationStats {
            means: vec![0.0; n],
            stds: vec![1.0; n],
            epsilon: STD_EPSILON,
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Maps standardized values back to original units, in place.
    pub fn invert_in_place(&self, rows: &mut DMatrix<f64>) -> Result<()> {
        if rows.ncols() != self.len() {
            return Err(Error::dims("standardizer columns", self.len(), rows.ncols()));
        }
        for (j, mut col) in rows.column_iter_mut().enumerate() {
            let (mu, sd) = (self.means[j], self.stds[j]);
            col.iter_mut().for_each(|v| *v = *v * sd + mu);
        }
        Ok(())
    }
}

/// Column means and population standard deviations of `rows` (n × d).
pub fn fit_standardizer(rows: &DMatrix<f64>) -> Result<StandardizationStats> {
    let n = rows.nrows();
    if n == 0 {
        return Err(Error::InvalidConfig(
            "cannot fit a standardizer on zero rows".into(),
        ));
    }
    let mut means = Vec::with_capacity(rows.ncols());
    let mut stds = Vec::with_capacity(rows.ncols());
    for col in rows.column_iter() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        means.push(mean);
        stds.push(if sd < STD_EPSILON { 0.0 } else { sd });
    }
    Ok(StandardizationStats {
        means,
        stds,
        epsilon: STD_EPSILON,
    })
}

/// `(x - mean) / std` per column; constant columns map to zero.
pub fn apply_standardizer(
    rows: &DMatrix<f64>,
    stats: &StandardizationStats,
) -> Result<DMatrix<f64>> {
    let mut out = rows.clone();
    apply_in_place(&mut out, stats)?;
    Ok(out)
}

pub(crate) fn apply_in_place(rows: &mut DMatrix<f64>, stats: &StandardizationStats) -> Result<()> {
    if rows.ncols() != stats.len() {
        return Err(Error::dims("standardizer columns", stats.len(), rows.ncols()));
    }
    for (j, mut col) in rows.column_iter_mut().enumerate() {
        let (mu, sd) = (stats.means[j], stats.stds[j]);
        if sd == 0.0 {
            col.fill(0.0);
        } else {
            col.iter_mut().for_each(|v| *v = (*v - mu) / sd);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("MEG{i:04}")).collect()
    }

    fn recording(data: DMatrix<f64>, period: f64, t0: f64) -> Recording {
        let n = data.nrows();
        Recording::new("s", data, period, t0, names(n)).unwrap()
    }

    #[test]
    fn baseline_constant_channel_goes_to_zero() {
        let rec = recording(DMatrix::from_element(2, 5, 5.0), 10.0, -20.0);
        let out = baseline_correct(&rec, -20.0, 0.0).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn baseline_uses_half_open_window() {
        // t0 = -300 ms at 10 ms: samples -300, -290, ..., window [-200, 0)
        // covers samples 10..=29 (times -200..-10).
        let data = DMatrix::from_fn(1, 40, |_, j| j as f64);
        let rec = recording(data, 10.0, -300.0);
        let out = baseline_correct(&rec, -200.0, 0.0).unwrap();
        let expected_mean = (10..30).sum::<usize>() as f64 / 20.0;
        assert_eq!(expected_mean, 19.5);
        assert!((out.data[(0, 0)] - (0.0 - 19.5)).abs() < 1e-12);
        assert!((out.data[(0, 30)] - (30.0 - 19.5)).abs() < 1e-12);
    }

    #[test]
    fn baseline_three_sample_toy() {
        // Times -20, -10, 0; window [-20, 0) takes the first two samples.
        let rec = recording(DMatrix::from_row_slice(1, 3, &[1.0, 3.0, 10.0]), 10.0, -20.0);
        let out = baseline_correct(&rec, -20.0, 0.0).unwrap();
        assert_eq!(out.data.as_slice(), &[-1.0, 1.0, 8.0]);
    }

    #[test]
    fn baseline_empty_window_errors() {
        let rec = recording(DMatrix::zeros(1, 10), 10.0, 0.0);
        assert!(matches!(
            baseline_correct(&rec, -200.0, 0.0),
            Err(Error::EmptyBaselineWindow { .. })
        ));
        assert!(baseline_correct(&rec, 10.0, 10.0).is_err());
    }

    #[test]
    fn downsample_block_means() {
        let data = DMatrix::from_fn(2, 23, |r, c| (c + 100 * r) as f64);
        let rec = recording(data, 1.0, -3.0);
        let out = downsample(&rec, 10.0).unwrap();
        assert_eq!(out.n_samples(), 2);
        assert_eq!(out.sample_period_ms, 10.0);
        assert_eq!(out.t0_offset_ms, -3.0);
        // brute force over blocks
        for ch in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..10 {
                    acc += rec.data[(ch, j * 10 + k)];
                }
                assert_eq!(out.data[(ch, j)], acc / 10.0);
            }
        }
        assert_eq!(out.data[(0, 0)], 4.5);
    }

    #[test]
    fn downsample_identity_and_errors() {
        let rec = recording(DMatrix::from_fn(1, 7, |_, c| c as f64), 10.0, 0.0);
        assert_eq!(downsample(&rec, 10.0).unwrap(), rec);
        assert!(matches!(
            downsample(&rec, 25.0),
            Err(Error::NonIntegerRatio { .. })
        ));
        assert!(downsample(&rec, 5.0).is_err());
    }

    #[test]
    fn select_channels_orders_and_errors() {
        let data = DMatrix::from_fn(3, 2, |r, _| r as f64);
        let rec = recording(data, 1.0, 0.0);
        let out = select_channels(&rec, &["MEG0002", "MEG0000"]).unwrap();
        assert_eq!(out.channel_names, ["MEG0002", "MEG0000"]);
        assert_eq!(out.data.column(0).as_slice(), &[2.0, 0.0]);
        assert_eq!(select_channels(&rec, &rec.channel_names).unwrap(), rec);
        match select_channels(&rec, &["MEG9999"]) {
            Err(Error::UnknownChannel(m)) => assert_eq!(m, ["MEG9999"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn select_56_of_306() {
        let rec = recording(DMatrix::zeros(306, 4), 1.0, 0.0);
        let chosen: Vec<String> = rec.channel_names.iter().step_by(5).take(56).cloned().collect();
        assert_eq!(select_channels(&rec, &chosen).unwrap().n_channels(), 56);
    }

    #[test]
    fn standardizer_population_convention() {
        let rows = DMatrix::from_row_slice(3, 2, &[1.0, 7.0, 2.0, 7.0, 3.0, 7.0]);
        let stats = fit_standardizer(&rows).unwrap();
        assert_eq!(stats.means, [2.0, 7.0]);
        assert!((stats.stds[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(stats.stds[1], 0.0);
        let z = apply_standardizer(&rows, &stats).unwrap();
        assert!(z.column(1).iter().all(|&v| v == 0.0));

        let single = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 5.0]);
        assert!(fit_standardizer(&single).unwrap().stds.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn standardizer_dimension_mismatch() {
        let stats = StandardizationStats::identity(3);
        assert!(apply_standardizer(&DMatrix::zeros(2, 2), &stats).is_err());
    }

    #[test]
    fn held_out_rows_keep_offset() {
        let train = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let stats = fit_standardizer(&train).unwrap();
        let test = apply_standardizer(&DMatrix::from_row_slice(1, 1, &[5.0]), &stats).unwrap();
        assert_eq!(test[(0, 0)], 4.0);
    }

    proptest! {
        #[test]
        fn standardized_columns_have_unit_moments(
            vals in prop::collection::vec(-1e3f64..1e3, 12..60),
        ) {
            let n = vals.len() / 3;
            let rows = DMatrix::from_row_slice(n, 3, &vals[..n * 3]);
            let stats = fit_standardizer(&rows).unwrap();
            let z = apply_standardizer(&rows, &stats).unwrap();
            for (j, col) in z.column_iter().enumerate() {
                let mean = col.sum() / n as f64;
                prop_assert!(mean.abs() < 1e-12);
                if stats.stds[j] > 0.0 {
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                    prop_assert!((var - 1.0).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn baseline_is_idempotent(
            vals in prop::collection::vec(-50f64..50.0, 30),
        ) {
            let rec = recording(DMatrix::from_row_slice(3, 10, &vals), 10.0, -40.0);
            let once = baseline_correct(&rec, -40.0, 0.0).unwrap();
            let twice = baseline_correct(&once, -40.0, 0.0).unwrap();
            for (a, b) in once.data.iter().zip(twice.data.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn select_channels_is_idempotent(pick in prop::collection::vec(0usize..6, 1..6)) {
            let rec = recording(DMatrix::from_fn(6, 3, |r, c| (r * 3 + c) as f64), 1.0, 0.0);
            let names: Vec<String> = pick.iter().map(|&i| rec.channel_names[i].clone()).collect();
            let once = select_channels(&rec, &names).unwrap();
            prop_assert_eq!(select_channels(&once, &names).unwrap(), once);
        }
    }
}
