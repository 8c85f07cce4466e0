//! Per-frequency linear and kernel ridge decoders.
//!
//! Every fit standardizes the lagged design per column and the targets per
//! frequency channel (unless [`FitOptions::standardize`] is off), solves in
//! standardized units, and keeps the statistics in the model so that
//! [`predict`] can map new recordings into the same space and back.

mod io;
mod kernel;
pub mod solve;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagging::{lag_recording, BuildOptions, LagSpec, LaggedDesign, TargetMatrix};
use crate::tensorio::{
    apply_standardizer, fit_standardizer, Dataset, Recording, Spectrogram, StandardizationStats,
};

pub use io::{load_model, save_model, ModelHeader};
pub use kernel::{gram_matrix, KernelSpec};
pub use solve::{Route, Spectral};

/// Positive, strictly increasing regularization values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("lambda grid is empty".into()));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(
                "lambda grid values must be positive and finite".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "lambda grid must be strictly increasing".into(),
            ));
        }
        Ok(LambdaGrid(values))
    }

    /// `count` values log-spaced from `min` to `max` inclusive.
    pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 || !(min > 0.0) || !(max >= min) {
            return Err(Error::InvalidConfig(format!(
                "bad log grid {min}..{max} with {count} points"
            )));
        }
        if count == 1 {
            return LambdaGrid::new(vec![min]);
        }
        let (lo, hi) = (min.ln(), max.ln());
        let step = (hi - lo) / (count - 1) as f64;
        let values = (0..count)
            .map(|i| match i {
                0 => min,
                i if i == count - 1 => max,
                i => (lo + step * i as f64).exp(),
            })
            .collect();
        LambdaGrid::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.0.last().expect("non-empty grid")
    }
}

/// A λ grid that may depend on the number of training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Fixed { grid: LambdaGrid },
    /// `count` values log-spaced from `lo_factor * n` to `hi_factor * n`.
    RowScaled { lo_factor: f64, hi_factor: f64, count: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::RowScaled {
            lo_factor: 1e-4,
            hi_factor: 1e4,
            count: 10,
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, n_rows: usize) -> Result<LambdaGrid> {
        match self {
            GridSpec::Fixed { grid } => Ok(grid.clone()),
            GridSpec::RowScaled {
                lo_factor,
                hi_factor,
                count,
            } => {
                let n = n_rows.max(1) as f64;
                LambdaGrid::log_spaced(lo_factor * n, hi_factor * n, *count)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Primal,
    Dual,
}

/// Which side to solve on when λ is selected by leave-one-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Primal when the kernel is linear and features do not outnumber rows.
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub standardize: bool,
    pub build: BuildOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            standardize: true,
            build: BuildOptions::default(),
        }
    }
}

/// A fitted decoder. Immutable after fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    pub kernel: KernelSpec,
    pub lag_spec: LagSpec,
    pub mode: Mode,
    /// (lag_bins · channels) × freq_channels, primal mode only.
    pub primal_g: Option<DMatrix<f64>>,
    /// training rows × freq_channels, dual mode only.
    pub dual_alpha: Option<DMatrix<f64>>,
    /// Standardized training design, dual mode only.
    pub training_rows: Option<DMatrix<f64>>,
    pub lambdas: Vec<f64>,
    pub standardizer_design: StandardizationStats,
    pub standardizer_target: StandardizationStats,
    pub channel_names: Vec<String>,
    pub center_freqs_hz: Vec<f64>,
}

impl DecoderModel {
    pub fn n_features(&self) -> usize {
        self.standardizer_design.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.lambdas.len()
    }

    /// Coefficients in standardized units. Dual models map back through the
    /// retained rows, which only makes sense for the linear kernel.
    pub fn implied_primal(&self) -> Option<DMatrix<f64>> {
        match self.mode {
            Mode::Primal => self.primal_g.clone(),
            Mode::Dual if self.kernel.is_linear() => {
                let rows = self.training_rows.as_ref()?;
                Some(rows.tr_mul(self.dual_alpha.as_ref()?))
            }
            Mode::Dual => None,
        }
    }

    /// Coefficients and intercepts in the original units of design and
    /// targets: `s ≈ r · G + b`.
    pub fn raw_coefficients(&self) -> Option<(DMatrix<f64>, Vec<f64>)> {
        let g_std = self.implied_primal()?;
        let sx = &self.standardizer_design;
        let sy = &self.standardizer_target;
        let g = DMatrix::from_fn(g_std.nrows(), g_std.ncols(), |j, f| {
            if sx.stds[j] == 0.0 {
                0.0
            } else {
                g_std[(j, f)] * sy.stds[f] / sx.stds[j]
            }
        });
        let intercept = (0..g.ncols())
            .map(|f| {
                sy.means[f]
                    - (0..g.nrows())
                        .map(|j| sx.means[j] * g[(j, f)])
                        .sum::<f64>()
            })
            .collect();
        Some((g, intercept))
    }

    fn check_invariants(&self) -> Result<()> {
        let ok = match self.mode {
            Mode::Primal => self.primal_g.is_some() && self.dual_alpha.is_none(),
            Mode::Dual => {
                self.dual_alpha.is_some() && self.primal_g.is_none() && self.training_rows.is_some()
            }
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "coefficients do not match {:?} mode",
                self.mode
            )));
        }
        if self.lambdas.len() != self.center_freqs_hz.len()
            || self.standardizer_target.len() != self.lambdas.len()
        {
            return Err(Error::dims(
                "model frequency channels",
                self.center_freqs_hz.len(),
                self.lambdas.len(),
            ));
        }
        Ok(())
    }
}

/// Standardized copies of design and targets with their statistics.
struct Prepared {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    sx: StandardizationStats,
    sy: StandardizationStats,
}

fn prepare(design: &LaggedDesign, targets: &TargetMatrix, opts: &FitOptions) -> Result<Prepared> {
    if design.row_index != targets.row_index {
        return Err(Error::InvalidConfig(
            "design and target rows are not aligned".into(),
        ));
    }
    if design.n_rows() == 0 {
        return Err(Error::InvalidConfig("no training rows".into()));
    }
    let (sx, sy) = if opts.standardize {
        (fit_standardizer(&design.rows)?, fit_standardizer(&targets.values)?)
    } else {
        (
            StandardizationStats::identity(design.n_features()),
            StandardizationStats::identity(targets.values.ncols()),
        )
    };
    Ok(Prepared {
        x: apply_standardizer(&design.rows, &sx)?,
        y: apply_standardizer(&targets.values, &sy)?,
        sx,
        sy,
    })
}

fn primal_model(
    p: Prepared,
    g: DMatrix<f64>,
    lambdas: Vec<f64>,
    design: &LaggedDesign,
    targets: &TargetMatrix,
) -> DecoderModel {
    DecoderModel {
        kernel: KernelSpec::Linear,
        lag_spec: design.lag_spec,
        mode: Mode::Primal,
        primal_g: Some(g),
        dual_alpha: None,
        training_rows: None,
        lambdas,
        standardizer_design: p.sx,
        standardizer_target: p.sy,
        channel_names: design.channel_names.clone(),
        center_freqs_hz: targets.center_freqs_hz.clone(),
    }
}

fn dual_model(
    p: Prepared,
    alpha: DMatrix<f64>,
    lambdas: Vec<f64>,
    kernel: KernelSpec,
    design: &LaggedDesign,
    targets: &TargetMatrix,
) -> DecoderModel {
    DecoderModel {
        kernel,
        lag_spec: design.lag_spec,
        mode: Mode::Dual,
        primal_g: None,
        dual_alpha: Some(alpha),
        training_rows: Some(p.x),
        lambdas,
        standardizer_design: p.sx,
        standardizer_target: p.sy,
        channel_names: design.channel_names.clone(),
        center_freqs_hz: targets.center_freqs_hz.clone(),
    }
}

/// Unpenalized least squares, `G = (RᵀR)⁻¹RᵀS`.
///
/// Fails with [`Error::IllConditioned`] when the reciprocal condition number
/// of `RᵀR` is below [`solve::RCOND_THRESHOLD`].
pub fn fit_ml(design: &LaggedDesign, targets: &TargetMatrix, opts: &FitOptions) -> Result<DecoderModel> {
    let p = prepare(design, targets, opts)?;
    let g = solve::solve_ml(&p.x, &p.y)?;
    let lambdas = vec![0.0; p.y.ncols()];
    Ok(primal_model(p, g, lambdas, design, targets))
}

/// Ridge in feature space, `G_f = (RᵀR + λ_f I)⁻¹RᵀS_f`.
pub fn fit_primal_ridge(
    design: &LaggedDesign,
    targets: &TargetMatrix,
    lambdas: &[f64],
    opts: &FitOptions,
) -> Result<DecoderModel> {
    let p = prepare(design, targets, opts)?;
    let g = solve::solve_primal_ridge(&p.x, &p.y, lambdas)?;
    Ok(primal_model(p, g, lambdas.to_vec(), design, targets))
}

/// Kernel ridge in sample space, `α_f = (K + λ_f I)⁻¹S_f`.
///
/// All λ must be strictly positive.
pub fn fit_dual(
    design: &LaggedDesign,
    targets: &TargetMatrix,
    lambdas: &[f64],
    kernel: KernelSpec,
    opts: &FitOptions,
) -> Result<DecoderModel> {
    let p = prepare(design, targets, opts)?;
    let k = gram_matrix(&p.x, &p.x, &kernel)?;
    let alpha = Spectral::dual(&k, &p.y)?.coefficients(lambdas)?;
    Ok(dual_model(p, alpha, lambdas.to_vec(), kernel, design, targets))
}

/// Leave-one-out errors over a λ grid and the per-frequency winners.
#[derive(Debug, Clone, PartialEq)]
pub struct LooSelection {
    pub grid: LambdaGrid,
    pub lambdas: Vec<f64>,
    /// grid × freq_channels
    pub loo_errors: DMatrix<f64>,
}

fn pick_route(kernel: &KernelSpec, solver: Solver, n: usize, d: usize) -> Result<Route> {
    match (solver, kernel) {
        (Solver::Dual, _) => Ok(Route::Dual),
        (Solver::Primal, KernelSpec::Linear) => Ok(Route::Primal),
        (Solver::Primal, _) => Err(Error::InvalidConfig(
            "the primal solver only supports the linear kernel".into(),
        )),
        (Solver::Auto, KernelSpec::Linear) if d <= n => Ok(Route::Primal),
        (Solver::Auto, _) => Ok(Route::Dual),
    }
}

fn spectral_for(p: &Prepared, kernel: &KernelSpec, route: Route) -> Result<Spectral> {
    match route {
        Route::Primal => Spectral::primal(&p.x, &p.y),
        Route::Dual => Spectral::dual(&gram_matrix(&p.x, &p.x, kernel)?, &p.y),
    }
}

/// Scores every λ in `grid` by closed-form leave-one-out error and picks
/// the best per frequency, ties going to the larger λ.
///
/// Errors are computed on the standardized training matrices (statistics
/// fitted once on all rows).
pub fn select_lambda_loo(
    design: &LaggedDesign,
    targets: &TargetMatrix,
    grid: &LambdaGrid,
    kernel: KernelSpec,
    opts: &FitOptions,
) -> Result<LooSelection> {
    let p = prepare(design, targets, opts)?;
    if p.x.nrows() < 2 {
        return Err(Error::InvalidConfig(
            "leave-one-out needs at least 2 training rows".into(),
        ));
    }
    let route = pick_route(&kernel, Solver::Auto, p.x.nrows(), p.x.ncols())?;
    let spectral = spectral_for(&p, &kernel, route)?;
    let loo_errors = spectral.loo_errors(&p.y, grid)?;
    Ok(LooSelection {
        lambdas: solve::argmin_lambdas(&loo_errors, grid),
        grid: grid.clone(),
        loo_errors,
    })
}

/// Selects λ per frequency by leave-one-out and fits, sharing one
/// eigendecomposition between selection and fit.
pub fn fit_selected(
    design: &LaggedDesign,
    targets: &TargetMatrix,
    grid: &GridSpec,
    kernel: KernelSpec,
    solver: Solver,
    opts: &FitOptions,
) -> Result<(DecoderModel, LooSelection)> {
    let p = prepare(design, targets, opts)?;
    let n = p.x.nrows();
    if n < 2 {
        return Err(Error::InvalidConfig(
            "leave-one-out needs at least 2 training rows".into(),
        ));
    }
    let grid = grid.resolve(n)?;
    let route = pick_route(&kernel, solver, n, p.x.ncols())?;
    let spectral = spectral_for(&p, &kernel, route)?;
    let loo_errors = spectral.loo_errors(&p.y, &grid)?;
    let lambdas = solve::argmin_lambdas(&loo_errors, &grid);
    let coef = spectral.coefficients(&lambdas)?;
    let model = match route {
        Route::Primal => primal_model(p, coef, lambdas.clone(), design, targets),
        Route::Dual => dual_model(p, coef, lambdas.clone(), kernel, design, targets),
    };
    Ok((
        model,
        LooSelection {
            grid,
            lambdas,
            loo_errors,
        },
    ))
}

/// Predicts the spectrogram frames `0..n_frames` of one recording.
pub fn predict_recording(
    model: &DecoderModel,
    rec: &Recording,
    n_frames: usize,
    build: BuildOptions,
) -> Result<Spectrogram> {
    model.check_invariants()?;
    if rec.channel_names != model.channel_names {
        return Err(Error::InvalidConfig(format!(
            "recording {:?} channels do not match the model's",
            rec.stimulus_id
        )));
    }
    let rows = lag_recording(rec, n_frames, &model.lag_spec, build)?;
    if rows.ncols() != model.n_features() {
        return Err(Error::dims("lagged features", model.n_features(), rows.ncols()));
    }
    let x = apply_standardizer(&rows, &model.standardizer_design)?;
    let mut y = match model.mode {
        Mode::Primal => x * model.primal_g.as_ref().expect("checked"),
        Mode::Dual => {
            let train = model.training_rows.as_ref().expect("checked");
            gram_matrix(&x, train, &model.kernel)? * model.dual_alpha.as_ref().expect("checked")
        }
    };
    model.standardizer_target.invert_in_place(&mut y)?;
    Spectrogram::new(
        rec.stimulus_id.clone(),
        y.transpose(),
        model.lag_spec.frame_period_ms,
        model.center_freqs_hz.clone(),
    )
}

/// Predicts the spectrograms of `stimulus_ids`, using each stimulus's
/// spectrogram frame count.
pub fn predict<S: AsRef<str>>(
    model: &DecoderModel,
    ds: &Dataset,
    stimulus_ids: &[S],
    build: BuildOptions,
) -> Result<Vec<Spectrogram>> {
    stimulus_ids
        .iter()
        .map(|id| {
            let (rec, sg) = ds.get(id.as_ref())?;
            if (sg.frame_period_ms - model.lag_spec.frame_period_ms).abs() > 1e-9 * sg.frame_period_ms {
                return Err(Error::FramePeriodMismatch {
                    stimulus: sg.stimulus_id.clone(),
                    recording_ms: model.lag_spec.frame_period_ms,
                    spectrogram_ms: sg.frame_period_ms,
                });
            }
            predict_recording(model, rec, sg.n_frames(), build)
        })
        .collect()
}
