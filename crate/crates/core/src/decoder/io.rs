use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DecoderModel, KernelSpec, Mode};
use crate::error::{Error, Result};
use crate::lagging::LagSpec;
use crate::tensorio::io::{read_json, write_json};
use crate::tensorio::{read_blob, write_blob, StandardizationStats, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobRef {
    pub blob: String,
    pub rows: usize,
    pub cols: usize,
}

/// JSON header of a serialized model; matrices live in sibling blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub kernel: KernelSpec,
    pub lag: LagSpec,
    pub mode: Mode,
    pub lambdas: Vec<f64>,
    pub standardizer_design: StandardizationStats,
    pub standardizer_target: StandardizationStats,
    pub channel_names: Vec<String>,
    pub center_freqs_hz: Vec<f64>,
    pub coefficients: BlobRef,
    pub training_rows: Option<BlobRef>,
}

fn write_ref(dir: &Path, name: &str, m: &DMatrix<f64>) -> Result<BlobRef> {
    write_blob(&dir.join(name), m)?;
    Ok(BlobRef {
        blob: name.to_string(),
        rows: m.nrows(),
        cols: m.ncols(),
    })
}

/// Writes `model.json` and its blobs into `dir`.
pub fn save_model(model: &DecoderModel, dir: &Path) -> Result<PathBuf> {
    model.check_invariants()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let coef = match model.mode {
        Mode::Primal => model.primal_g.as_ref(),
        Mode::Dual => model.dual_alpha.as_ref(),
    }
    .expect("checked");
    let coefficients = write_ref(dir, "coefficients.f64", coef)?;
    let training_rows = match &model.training_rows {
        Some(rows) => Some(write_ref(dir, "training_rows.f64", rows)?),
        None => None,
    };
    let header = ModelHeader {
        format_version: FORMAT_VERSION,
        kernel: model.kernel,
        lag: model.lag_spec,
        mode: model.mode,
        lambdas: model.lambdas.clone(),
        standardizer_design: model.standardizer_design.clone(),
        standardizer_target: model.standardizer_target.clone(),
        channel_names: model.channel_names.clone(),
        center_freqs_hz: model.center_freqs_hz.clone(),
        coefficients,
        training_rows,
    };
    let path = dir.join("model.json");
    write_json(&path, &header)?;
    Ok(path)
}

pub fn load_model(path: &Path) -> Result<DecoderModel> {
    let header: ModelHeader = read_json(path)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported model format_version {}",
            header.format_version
        )));
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let read = |r: &BlobRef| read_blob(&dir.join(&r.blob), r.rows, r.cols);
    let coef = read(&header.coefficients)?;
    let training_rows = header.training_rows.as_ref().map(read).transpose()?;
    let (primal_g, dual_alpha) = match header.mode {
        Mode::Primal => (Some(coef), None),
        Mode::Dual => (None, Some(coef)),
    };
    let model = DecoderModel {
        kernel: header.kernel,
        lag_spec: header.lag,
        mode: header.mode,
        primal_g,
        dual_alpha,
        training_rows,
        lambdas: header.lambdas,
        standardizer_design: header.standardizer_design,
        standardizer_target: header.standardizer_target,
        channel_names: header.channel_names,
        center_freqs_hz: header.center_freqs_hz,
    };
    model.check_invariants()?;
    Ok(model)
}
