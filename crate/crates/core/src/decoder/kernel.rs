use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Similarity between two design rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `a · b`
    Linear,
    /// `exp(-gamma * |a - b|^2)`
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gaussian kernel needs a positive gamma, got {gamma}"
            )));
        }
        Ok(KernelSpec::Gaussian { gamma })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, KernelSpec::Linear)
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Gaussian { gamma } => write!(f, "gaussian:{gamma}"),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    /// Parses `linear` or `gaussian:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "linear" => Ok(KernelSpec::Linear),
            Some(("gaussian", g)) => {
                let gamma = g
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad gamma {g:?}")))?;
                KernelSpec::gaussian(gamma)
            }
            _ => Err(Error::InvalidConfig(format!(
                "unknown kernel {s:?}; expected linear or gaussian:<gamma>"
            ))),
        }
    }
}

/// Kernel matrix between the rows of `a` (n × d) and `b` (m × d).
pub fn gram_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::dims("kernel feature count", a.ncols(), b.ncols()));
    }
    match *kernel {
        KernelSpec::Linear => Ok(a * b.transpose()),
        KernelSpec::Gaussian { gamma } => {
            // Samples as contiguous columns.
            let at = a.transpose();
            let bt = b.transpose();
            let columns: Vec<Vec<f64>> = (0..bt.ncols())
                .into_par_iter()
                .map(|j| {
                    let bj = bt.column(j);
                    (0..at.ncols())
                        .map(|i| {
                            let d2: f64 = at
                                .column(i)
                                .iter()
                                .zip(bj.iter())
                                .map(|(x, y)| (x - y) * (x - y))
                                .sum();
                            (-gamma * d2).exp()
                        })
                        .collect()
                })
                .collect();
            Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| columns[j][i]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn linear_on_unit_rows_is_identity() {
        let e = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(gram_matrix(&e, &e, &KernelSpec::Linear).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn linear_matches_double_loop() {
        let a = random(4, 3, 1);
        let b = random(5, 3, 2);
        let k = gram_matrix(&a, &b, &KernelSpec::Linear).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let mut dot = 0.0;
                for c in 0..3 {
                    dot += a[(i, c)] * b[(j, c)];
                }
                assert!((k[(i, j)] - dot).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_matches_double_loop_and_has_unit_diagonal() {
        let a = random(6, 4, 3);
        let kernel = KernelSpec::gaussian(0.7).unwrap();
        let k = gram_matrix(&a, &a, &kernel).unwrap();
        for i in 0..6 {
            assert_eq!(k[(i, i)], 1.0);
            for j in 0..6 {
                let d2: f64 = (0..4).map(|c| (a[(i, c)] - a[(j, c)]).powi(2)).sum();
                assert!((k[(i, j)] - (-0.7 * d2).exp()).abs() < 1e-14);
                assert!((k[(i, j)] - k[(j, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(gram_matrix(&random(2, 3, 0), &random(2, 4, 0), &KernelSpec::Linear).is_err());
    }

    #[test]
    fn parse_kernels() {
        assert_eq!("linear".parse::<KernelSpec>().unwrap(), KernelSpec::Linear);
        assert_eq!(
            "gaussian:0.5".parse::<KernelSpec>().unwrap(),
            KernelSpec::Gaussian { gamma: 0.5 }
        );
        assert!("gaussian:-1".parse::<KernelSpec>().is_err());
        assert!("poly".parse::<KernelSpec>().is_err());
    }
}
