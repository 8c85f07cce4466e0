use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::Spectrogram;

/// Outcome of one 2-vs-2 test on a held-out pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub id_a: String,
    pub id_b: String,
    /// corr(s_a, p_a) + corr(s_b, p_b); NaN when degenerate.
    pub corr_matched: f64,
    /// corr(s_a, p_b) + corr(s_b, p_a); NaN when degenerate.
    pub corr_swapped: f64,
    pub correct: bool,
    /// Common frame count after truncating to the shorter stimulus.
    pub truncated_frames: usize,
    /// Some correlation was undefined (a constant flattened vector).
    pub degenerate: bool,
}

/// Margins at or below this are ties. The correlation sums are bounded by 2
/// in magnitude, so this sits well above accumulated rounding (~1e-15) and far
/// below any margin that carries information.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Pearson correlation, or `None` when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson inputs differ in length");
    let n = a.len() as f64;
    if a.is_empty() {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// First `frames` columns of a spectrogram, flattened column by column.
pub(crate) fn flatten(s: &Spectrogram, frames: usize) -> Vec<f64> {
    s.data.columns(0, frames).iter().copied().collect()
}

/// The 2-vs-2 test: originals `s1`, `s2` against predictions `p1`, `p2`.
///
/// All four are truncated to the shortest frame count and flattened over
/// frequency × time. The label is correct only when the matched correlations
/// beat the swapped ones by more than [`TIE_TOLERANCE`]; ties (including
/// margins at rounding level) and undefined correlations count as incorrect.
pub fn pair_correlation_test(
    s1: &Spectrogram,
    s2: &Spectrogram,
    p1: &Spectrogram,
    p2: &Spectrogram,
) -> Result<PairResult> {
    let f = s1.n_freqs();
    for s in [s2, p1, p2] {
        if s.n_freqs() != f {
            return Err(Error::dims(
                format!("frequency channels of {:?}", s.stimulus_id),
                f,
                s.n_freqs(),
            ));
        }
    }
    let frames = [s1, s2, p1, p2].iter().map(|s| s.n_frames()).min().unwrap_or(0);
    let (a1, a2, b1, b2) = (
        flatten(s1, frames),
        flatten(s2, frames),
        flatten(p1, frames),
        flatten(p2, frames),
    );
    let terms = [
        pearson(&a1, &b1),
        pearson(&a2, &b2),
        pearson(&a1, &b2),
        pearson(&a2, &b1),
    ];
    let mut result = PairResult {
        id_a: s1.stimulus_id.clone(),
        id_b: s2.stimulus_id.clone(),
        corr_matched: f64::NAN,
        corr_swapped: f64::NAN,
        correct: false,
        truncated_frames: frames,
        degenerate: true,
    };
    if let [Some(m1), Some(m2), Some(w1), Some(w2)] = terms {
        result.corr_matched = m1 + m2;
        result.corr_swapped = w1 + w2;
        result.correct = result.corr_matched - result.corr_swapped > TIE_TOLERANCE;
        result.degenerate = false;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    use super::*;

    fn sg(id: &str, rows: usize, values: &[f64]) -> Spectrogram {
        let freqs = (1..=rows).map(|f| f as f64 * 100.0).collect();
        Spectrogram::new(id, DMatrix::from_row_slice(rows, values.len() / rows, values), 10.0, freqs)
            .unwrap()
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), None);
        assert_eq!(pearson(&[], &[]), None);
    }

    #[test]
    fn perfect_and_swapped_predictions() {
        let s1 = sg("a", 2, &[1.0, 2.0, 0.0, 5.0, 1.0, 1.0]);
        let s2 = sg("b", 2, &[0.0, 3.0, 1.0, 1.0, 4.0, 2.0]);
        assert!(pair_correlation_test(&s1, &s2, &s1, &s2).unwrap().correct);
        assert!(!pair_correlation_test(&s1, &s2, &s2, &s1).unwrap().correct);
    }

    #[test]
    fn constant_prediction_is_degenerate_and_incorrect() {
        // p2 = (s1 + s2)/2 is constant, so two of the four correlations are undefined.
        let s1 = sg("a", 2, &[1.0, 0.0, 0.0, 1.0]);
        let s2 = sg("b", 2, &[0.0, 1.0, 1.0, 0.0]);
        let p1 = sg("a", 2, &[0.9, 0.1, 0.1, 0.9]);
        let p2 = sg("b", 2, &[0.5, 0.5, 0.5, 0.5]);
        let r = pair_correlation_test(&s1, &s2, &p1, &p2).unwrap();
        assert!(r.degenerate);
        assert!(!r.correct);
        assert!(r.corr_matched.is_nan());
    }

    #[test]
    fn hand_computed_toy() {
        // Flattened s1 = [1,0,0,1], s2 = [0,1,1,0] = 1 - s1, so corr(s1, s2) = -1
        // and any p mixing them has corr ±1 with each.
        // p1 = 0.9 s1 + 0.1 s2 → corr(s1,p1) = 1, corr(s2,p1) = -1.
        // p2 = 0.4 s1 + 0.6 s2 → corr(s2,p2) = 1, corr(s1,p2) = -1.
        let s1 = sg("a", 2, &[1.0, 0.0, 0.0, 1.0]);
        let s2 = sg("b", 2, &[0.0, 1.0, 1.0, 0.0]);
        let p1 = sg("a", 2, &[0.9, 0.1, 0.1, 0.9]);
        let p2 = sg("b", 2, &[0.4, 0.6, 0.6, 0.4]);
        let r = pair_correlation_test(&s1, &s2, &p1, &p2).unwrap();
        assert!((r.corr_matched - 2.0).abs() < 1e-12);
        assert!((r.corr_swapped + 2.0).abs() < 1e-12);
        assert!(r.correct);
    }

    #[test]
    fn exact_tie_is_incorrect() {
        let s1 = sg("a", 1, &[1.0, 2.0, 3.0]);
        let s2 = sg("b", 1, &[1.0, 2.0, 3.0]);
        let r = pair_correlation_test(&s1, &s2, &s1, &s2).unwrap();
        assert_eq!(r.corr_matched, r.corr_swapped);
        assert!(!r.correct);
    }

    #[test]
    fn two_element_inputs_tie_under_rescaling() {
        // every correlation of two points is ±1, so both sums tie exactly;
        // rescaling must not let rounding break the tie either way
        let (s1, s2) = (sg("a", 1, &[0.3, -1.2]), sg("b", 1, &[2.0, 0.5]));
        let (p1, p2) = (sg("a", 1, &[1.1, 0.4]), sg("b", 1, &[-0.7, 0.9]));
        for (a, c, b) in [(381.0, 63.4, 77.3), (748.0, 96.5, -64.9), (1e-3, 1e3, 99.0)] {
            let q1 = sg("a", 1, &p1.data.map(|v| a * v + b).as_slice().to_vec());
            let q2 = sg("b", 1, &p2.data.map(|v| c * v - b).as_slice().to_vec());
            assert!(!pair_correlation_test(&s1, &s2, &q1, &q2).unwrap().correct);
        }
    }

    #[test]
    fn truncates_to_shortest() {
        let s1 = sg("a", 1, &[1.0, 2.0, 3.0, 9.0, -9.0]);
        let s2 = sg("b", 1, &[3.0, 1.0, 2.0]);
        let r = pair_correlation_test(&s1, &s2, &s1, &s2).unwrap();
        assert_eq!(r.truncated_frames, 3);
        assert!(r.correct);
    }

    #[test]
    fn frequency_mismatch_is_an_error() {
        let s1 = sg("a", 1, &[1.0, 2.0]);
        let s2 = sg("b", 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(pair_correlation_test(&s1, &s2, &s1, &s2).is_err());
    }

    fn arb(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, rows * cols)
    }

    proptest! {
        #[test]
        fn exchangeable(a in arb(3, 4), b in arb(3, 4), c in arb(3, 4), d in arb(3, 4)) {
            let (s1, s2, p1, p2) = (sg("a", 3, &a), sg("b", 3, &b), sg("a", 3, &c), sg("b", 3, &d));
            let x = pair_correlation_test(&s1, &s2, &p1, &p2).unwrap();
            let y = pair_correlation_test(&s2, &s1, &p2, &p1).unwrap();
            prop_assert_eq!(x.correct, y.correct);
        }

        #[test]
        fn positive_affine_rescaling_keeps_label(
            a in arb(3, 4), b in arb(3, 4), c in arb(3, 4), d in arb(3, 4),
            scale in 0.01..100.0f64, shift in -50.0..50.0f64,
        ) {
            let (s1, s2, p1, p2) = (sg("a", 3, &a), sg("b", 3, &b), sg("a", 3, &c), sg("b", 3, &d));
            let x = pair_correlation_test(&s1, &s2, &p1, &p2).unwrap();
            let mut q1 = p1.clone();
            q1.data = q1.data.map(|v| scale * v + shift);
            let y = pair_correlation_test(&s1, &s2, &q1, &p2).unwrap();
            prop_assert_eq!(x.correct, y.correct);
        }
    }
}
