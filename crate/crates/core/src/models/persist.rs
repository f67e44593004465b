//! Binary model format: magic `ENHM`, little-endian `u32` version, `u32`
//! header length, a JSON header, then little-endian `f64` arrays in header
//! order. Round trips are bit-exact.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LinearParams, ModelParams, ModelSpec, Network, Standardizer, TrainedModel};
use crate::data::FeatureMask;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"ENHM";

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    n_features: usize,
    n_classes: usize,
    feature_mask: Option<FeatureMask>,
    standardized: bool,
    layout: Layout,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Layout {
    Linear { rows: usize, cols: usize, dual_len: Option<usize> },
    Network { widths: Vec<usize>, activation: super::Activation, n_params: usize },
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut floats: Vec<f64> = Vec::new();
        if let Some(s) = &self.standardizer {
            floats.extend(&s.mean);
            floats.extend(&s.scale);
        }
        let layout = match &self.params {
            ModelParams::Linear(p) => {
                floats.extend(super::row_major(&p.weights));
                floats.extend(p.bias.iter());
                let dual_len = p.dual.as_ref().map(|d| d[0].len());
                if let Some(d) = &p.dual {
                    for a in d {
                        floats.extend(a);
                    }
                }
                Layout::Linear {
                    rows: p.weights.nrows(),
                    cols: p.weights.ncols(),
                    dual_len,
                }
            }
            ModelParams::Network(n) => {
                floats.extend(&n.params);
                Layout::Network {
                    widths: n.widths.clone(),
                    activation: n.activation,
                    n_params: n.params.len(),
                }
            }
        };
        let header = Header {
            spec: self.spec.clone(),
            n_features: self.n_features,
            n_classes: self.n_classes,
            feature_mask: self.feature_mask.clone(),
            standardized: self.standardizer.is_some(),
            layout,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::config(e.to_string()))?;
        let mut out = Vec::with_capacity(12 + json.len() + 8 * floats.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::decode(bytes, Path::new("<model bytes>"))
    }

    fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            path: path.to_path_buf(),
            message: m.to_string(),
        };
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != MODEL_FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        let rest = &bytes[12 + hlen..];
        if rest.len() % 8 != 0 {
            return Err(bad("float section is not a multiple of 8 bytes"));
        }
        let floats: Vec<f64> = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut cursor = 0usize;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let s = floats.get(cursor..cursor + n).ok_or_else(|| bad("truncated arrays"))?;
            cursor += n;
            Ok(s.to_vec())
        };
        let width = header
            .feature_mask
            .as_ref()
            .map_or(header.n_features, |m| m.count());
        let standardizer = if header.standardized {
            Some(Standardizer {
                mean: take(width)?,
                scale: take(width)?,
            })
        } else {
            None
        };
        let params = match header.layout {
            Layout::Linear { rows, cols, dual_len } => {
                let weights = DMatrix::from_row_slice(rows, cols, &take(rows * cols)?);
                let bias = DVector::from_vec(take(rows)?);
                let dual = match dual_len {
                    Some(n) => Some((0..rows).map(|_| take(n)).collect::<Result<Vec<_>>>()?),
                    None => None,
                };
                ModelParams::Linear(LinearParams { weights, bias, dual })
            }
            Layout::Network {
                widths,
                activation,
                n_params,
            } => {
                if n_params != super::ffn::param_count(&widths) {
                    return Err(bad("parameter count does not match widths"));
                }
                ModelParams::Network(Network {
                    widths,
                    activation,
                    params: take(n_params)?,
                })
            }
        };
        if cursor != floats.len() {
            return Err(bad("trailing data"));
        }
        Ok(TrainedModel {
            spec: header.spec,
            n_features: header.n_features,
            n_classes: header.n_classes,
            standardizer,
            feature_mask: header.feature_mask,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::decode(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{fit, fit_masked, ModelSpec};
    use super::*;
    use crate::data::{generate_synthetic, select_features, SyntheticRecipe};

    #[test]
    fn round_trips_are_exact() {
        let ds = generate_synthetic(&SyntheticRecipe {
            n_per_class: vec![8, 8],
            n_features: 5,
            class_shift: 1.0,
            noise_sd: 1.0,
            seed: 3,
            block_offset: 0,
        })
        .unwrap();
        let mask = select_features(&ds, 0.6).unwrap();
        let mut std_lr = ModelSpec::logistic(2.0);
        std_lr.standardize = true;
        let models = vec![
            fit(&ModelSpec::linear_svm(1.0), &ds).unwrap(),
            fit_masked(&std_lr, &ds, &mask).unwrap(),
            fit(&ModelSpec::feed_forward(), &ds).unwrap(),
        ];
        for m in models {
            let back = TrainedModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(TrainedModel::from_bytes(b"nope").is_err());
        let ds = generate_synthetic(&SyntheticRecipe {
            n_per_class: vec![4, 4],
            n_features: 2,
            class_shift: 1.0,
            noise_sd: 1.0,
            seed: 1,
            block_offset: 0,
        })
        .unwrap();
        let mut bytes = fit(&ModelSpec::logistic(1.0), &ds).unwrap().to_bytes().unwrap();
        bytes.truncate(bytes.len() - 8);
        assert!(TrainedModel::from_bytes(&bytes).is_err());
    }
}
