//! Dense solvers on already-standardized matrices.
//!
//! `x` is the n × d design, `y` the n × F targets. Coefficients come back as
//! d × F (primal) or n × F (dual).

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::LambdaGrid;
use crate::error::{Error, Result};

/// Reciprocal condition number of `XᵀX` below which the unpenalized solve is refused.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Relative tolerance for negative kernel eigenvalues.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Smallest admissible `1 - h_i` in the leave-one-out shortcut.
pub const LEVERAGE_SLACK: f64 = 1e-12;

/// `(XᵀX)⁻¹XᵀY` through a singular value decomposition of `X`.
pub fn solve_ml(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    if y.nrows() != n {
        return Err(Error::dims("target rows", n, y.nrows()));
    }
    if n < d || d == 0 {
        return Err(Error::IllConditioned { rcond: 0.0 });
    }
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let rcond = if s_max > 0.0 { (s_min / s_max).powi(2) } else { 0.0 };
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(Error::IllConditioned { rcond });
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut w = u.tr_mul(y);
    for (k, mut row) in w.row_iter_mut().enumerate() {
        row /= svd.singular_values[k];
    }
    Ok(v_t.tr_mul(&w))
}

/// Per-column `(XᵀX + λ_f I)⁻¹XᵀY_f`, one Cholesky factorization per distinct λ.
///
/// A zero λ falls back to [`solve_ml`] for its columns.
pub fn solve_primal_ridge(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambdas: &[f64],
) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    if y.nrows() != n {
        return Err(Error::dims("target rows", n, y.nrows()));
    }
    if lambdas.len() != y.ncols() {
        return Err(Error::dims("lambdas", y.ncols(), lambdas.len()));
    }
    check_lambdas(lambdas, false)?;

    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (f, lam) in lambdas.iter().enumerate() {
        groups.entry(lam.to_bits()).or_default().push(f);
    }
    let gram = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let mut g = DMatrix::zeros(d, y.ncols());
    for (bits, cols) in groups {
        let lambda = f64::from_bits(bits);
        let block = if lambda == 0.0 {
            solve_ml(x, &y.select_columns(cols.iter()))?
        } else {
            let mut a = gram.clone();
            for i in 0..d {
                a[(i, i)] += lambda;
            }
            let chol = Cholesky::new(a).ok_or(Error::IllConditioned { rcond: 0.0 })?;
            chol.solve(&xty.select_columns(cols.iter()))
        };
        for (j, &f) in cols.iter().enumerate() {
            g.set_column(f, &block.column(j));
        }
    }
    Ok(g)
}

pub(crate) fn check_lambdas(lambdas: &[f64], strictly_positive: bool) -> Result<()> {
    for &l in lambdas {
        let ok = l.is_finite() && if strictly_positive { l > 0.0 } else { l >= 0.0 };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "regularization must be {} and finite, got {l}",
                if strictly_positive { "positive" } else { "nonnegative" }
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Eigendecomposition of `XᵀX` (d × d).
    Primal,
    /// Eigendecomposition of the kernel matrix (n × n).
    Dual,
}

/// One symmetric eigendecomposition shared by every λ and frequency.
///
/// With `P` the basis and `c_k(λ)` the spectral weights, the in-sample fit is
/// `P diag(c) Pᵀ Y` and the leverages are `h_i = Σ_k P_ik² c_k`:
///
/// * dual: `K = U E Uᵀ`, `P = U`, `c_k = e_k / (e_k + λ)`;
/// * primal: `XᵀX = V E Vᵀ`, `P = X V`, `c_k = 1 / (e_k + λ)`.
///
/// For a linear kernel both describe the same hat matrix
/// `X (XᵀX + λI)⁻¹ Xᵀ`, so the cheaper side can be chosen.
#[derive(Debug, Clone)]
pub struct Spectral {
    route: Route,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    basis: DMatrix<f64>,
    /// `Pᵀ Y`
    proj: DMatrix<f64>,
    squared_basis: DMatrix<f64>,
}

impl Spectral {
    pub fn primal(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if y.nrows() != x.nrows() {
            return Err(Error::dims("target rows", x.nrows(), y.nrows()));
        }
        let eig = SymmetricEigen::new(x.tr_mul(x));
        let eigvals = eig.eigenvalues.map(|e| e.max(0.0));
        let basis = x * &eig.eigenvectors;
        Ok(Self::assemble(Route::Primal, eig.eigenvectors, eigvals, basis, y))
    }

    pub fn dual(kernel: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        if !kernel.is_square() {
            return Err(Error::dims("kernel columns", kernel.nrows(), kernel.ncols()));
        }
        if y.nrows() != kernel.nrows() {
            return Err(Error::dims("target rows", kernel.nrows(), y.nrows()));
        }
        let eig = SymmetricEigen::new(kernel.clone());
        let scale = eig.eigenvalues.amax().max(1.0);
        let min = eig.eigenvalues.min();
        if min < -PSD_TOLERANCE * scale || !min.is_finite() {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let eigvals = eig.eigenvalues.map(|e| e.max(0.0));
        let basis = eig.eigenvectors.clone();
        Ok(Self::assemble(Route::Dual, eig.eigenvectors, eigvals, basis, y))
    }

    fn assemble(
        route: Route,
        eigvecs: DMatrix<f64>,
        eigvals: DVector<f64>,
        basis: DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> Self {
        let proj = basis.tr_mul(y);
        let squared_basis = basis.map(|v| v * v);
        Spectral {
            route,
            eigvecs,
            eigvals,
            basis,
            proj,
            squared_basis,
        }
    }

    pub fn route(&self) -> Route {
        self.route
    }

    fn weights(&self, lambda: f64) -> DVector<f64> {
        match self.route {
            Route::Dual => self.eigvals.map(|e| e / (e + lambda)),
            Route::Primal => self.eigvals.map(|e| 1.0 / (e + lambda)),
        }
    }

    /// Coefficients for per-column penalties: `G` (d × F) on the primal
    /// route, `α` (n × F) on the dual route.
    pub fn coefficients(&self, lambdas: &[f64]) -> Result<DMatrix<f64>> {
        if lambdas.len() != self.proj.ncols() {
            return Err(Error::dims("lambdas", self.proj.ncols(), lambdas.len()));
        }
        check_lambdas(lambdas, true)?;
        let scaled = DMatrix::from_fn(self.proj.nrows(), self.proj.ncols(), |k, f| {
            self.proj[(k, f)] / (self.eigvals[k] + lambdas[f])
        });
        Ok(&self.eigvecs * scaled)
    }

    /// Leave-one-out mean squared error, rows = grid values, columns = targets.
    pub fn loo_errors(&self, y: &DMatrix<f64>, grid: &LambdaGrid) -> Result<DMatrix<f64>> {
        let n = y.nrows();
        let mut out = DMatrix::zeros(grid.len(), y.ncols());
        for (g, &lambda) in grid.values().iter().enumerate() {
            let c = self.weights(lambda);
            let leverage = &self.squared_basis * &c;
            for (i, &h) in leverage.iter().enumerate() {
                let slack = 1.0 - h;
                if !(slack >= LEVERAGE_SLACK) {
                    return Err(Error::DegenerateLeverage { row: i, lambda, slack });
                }
            }
            let mut scaled = self.proj.clone();
            for (k, mut row) in scaled.row_iter_mut().enumerate() {
                row *= c[k];
            }
            let fitted = &self.basis * scaled;
            for f in 0..y.ncols() {
                let mut acc = 0.0;
                for i in 0..n {
                    let r = (y[(i, f)] - fitted[(i, f)]) / (1.0 - leverage[i]);
                    acc += r * r;
                }
                out[(g, f)] = acc / n as f64;
            }
        }
        Ok(out)
    }
}

/// Per-column argmin over the grid; exact ties go to the larger λ.
pub fn argmin_lambdas(errors: &DMatrix<f64>, grid: &LambdaGrid) -> Vec<f64> {
    (0..errors.ncols())
        .map(|f| {
            let mut best = 0;
            for g in 1..errors.nrows() {
                if errors[(g, f)] <= errors[(best, f)] {
                    best = g;
                }
            }
            grid.values()[best]
        })
        .collect()
}
