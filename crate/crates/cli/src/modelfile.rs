//! `model-v1` JSON documents and the built-in `srw1`…`srwN` models.

use std::path::Path;

use pamsim_core::model::{ModelError, Nonlinearity, StepDistribution};
use pamsim_core::Model;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MODEL_SCHEMA: &str = "model-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default = "schema")]
    pub schema: String,
    pub dimension: usize,
    /// `[[x_1, …, x_d], p]` pairs.
    pub support: Vec<(Vec<i64>, f64)>,
    pub sigma: SigmaSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn schema() -> String {
    MODEL_SCHEMA.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SigmaSpec {
    /// `σ(z) = slope·z`; `slope` defaults to `lip`.
    Linear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
        lip: f64,
        lower: f64,
    },
    /// Piecewise linear through `[z, σ(z)]` knots.
    Tabulated {
        knots: Vec<(f64, f64)>,
        lip: f64,
        lower: f64,
    },
}

impl ModelFile {
    pub fn builtin_srw(dim: usize) -> Self {
        let step = StepDistribution::laplacian(dim);
        Self {
            schema: schema(),
            dimension: dim,
            support: step.support().to_vec(),
            sigma: SigmaSpec::Linear {
                slope: None,
                lip: 1.0,
                lower: 1.0,
            },
            tolerance: None,
        }
    }

    pub fn build(&self) -> std::result::Result<Model, ModelError> {
        if self.dimension == 0 {
            return Err(ModelError::ZeroDimension);
        }
        let step = match self.tolerance {
            Some(tol) => {
                StepDistribution::with_tolerance(self.support.clone(), self.dimension, tol)?
            }
            None => StepDistribution::new(self.support.clone(), self.dimension)?,
        };
        let sigma = match &self.sigma {
            SigmaSpec::Linear { slope, lip, lower } => {
                let s = slope.unwrap_or(*lip);
                if !(*lower > 0.0
                    && lower <= lip
                    && s.abs() >= lower * (1.0 - 1e-12)
                    && s.abs() <= lip * (1.0 + 1e-12))
                {
                    return Err(ModelError::SigmaConstants {
                        lower: *lower,
                        lip: *lip,
                    });
                }
                Nonlinearity::linear(s)?
            }
            SigmaSpec::Tabulated { knots, lip, lower } => {
                Nonlinearity::tabulated(knots.clone(), *lip, *lower)?
            }
        };
        Ok(Model::new(step, sigma))
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        format!("{:x}", Sha256::digest(json))
    }
}

/// A model together with its document and content hash.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub source: String,
    pub file: ModelFile,
    pub model: Model,
    pub hash: String,
}

/// `srw<d>` for a built-in nearest-neighbour walk with `σ(u) = u`.
pub fn parse_builtin(name: &str) -> Option<usize> {
    let d: usize = name.strip_prefix("srw")?.parse().ok()?;
    (d >= 1).then_some(d)
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if file.schema != MODEL_SCHEMA {
        return Err(CliError::config(format!(
            "{}: unsupported schema {:?}",
            path.display(),
            file.schema
        )));
    }
    Ok(file)
}

/// Resolves `--model`: a built-in name or a path to a `model-v1` file.
pub fn load_model(spec: &str) -> Result<LoadedModel> {
    let file = match parse_builtin(spec) {
        Some(d) => ModelFile::builtin_srw(d),
        None => read_model_file(Path::new(spec))?,
    };
    let model = file.build()?;
    let hash = file.hash();
    Ok(LoadedModel {
        source: spec.to_string(),
        file,
        model,
        hash,
    })
}
