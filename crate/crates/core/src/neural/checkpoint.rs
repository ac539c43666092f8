//! Parameter checkpoints: a versioned binary container of named tensors
//! (name, shape, row-major 64-bit data, little-endian) plus a JSON sidecar
//! carrying the model configuration. Loading rebuilds the parameter layout
//! from the sidecar and rejects any shape mismatch against the container.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::decoder::{DecoderConfig, DecoderParams};
use super::encoder::{EncoderConfig, EncoderParams};
use super::params::ParamVec;
use super::train::SketchModel;
use super::{NeuralError, PathScorerParams};

const MAGIC: &[u8; 8] = b"HPDTNSR1";

fn write_tensors(
    path: &Path,
    tensors: &[(String, Vec<usize>, &[f64])],
) -> Result<(), NeuralError> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, data) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &dim in shape {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

struct TensorReader {
    bytes: Vec<u8>,
    pos: usize,
}

impl TensorReader {
    fn open(path: &Path) -> Result<Self, NeuralError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(NeuralError::ShapeMismatch(format!(
                "{} is not a tensor container (bad magic)",
                path.display()
            )));
        }
        Ok(TensorReader { bytes, pos: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&[u8], NeuralError> {
        if self.pos + n > self.bytes.len() {
            return Err(NeuralError::ShapeMismatch("truncated tensor container".to_string()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn read_all(mut self) -> Result<Vec<(String, Vec<usize>, Vec<f64>)>, NeuralError> {
        let count = self.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = self.u32()? as usize;
            let name = String::from_utf8(self.take(name_len)?.to_vec())
                .map_err(|_| NeuralError::ShapeMismatch("tensor name is not UTF-8".to_string()))?;
            let ndim = self.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(self.u64()? as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")));
            }
            tensors.push((name, shape, data));
        }
        Ok(tensors)
    }
}

fn fill_params(
    params: &mut ParamVec,
    prefix: &str,
    tensors: &[(String, Vec<usize>, Vec<f64>)],
) -> Result<(), NeuralError> {
    for spec in params.blocks().to_vec() {
        let wanted = format!("{prefix}.{}", spec.name);
        let tensor = tensors.iter().find(|(name, _, _)| *name == wanted).ok_or_else(|| {
            NeuralError::ShapeMismatch(format!("checkpoint is missing tensor {wanted}"))
        })?;
        if tensor.1 != spec.shape {
            return Err(NeuralError::ShapeMismatch(format!(
                "tensor {wanted} has shape {:?}, expected {:?}",
                tensor.1, spec.shape
            )));
        }
        params.block_mut(&spec.name).copy_from_slice(&tensor.2);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SketchSidecar {
    format: String,
    version: u32,
    encoder: EncoderConfig,
    decoder: DecoderConfig,
}

/// Writes `<stem>.tensors` and `<stem>.json`.
pub fn save_sketch_model(stem: &Path, model: &SketchModel) -> Result<(), NeuralError> {
    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
    for (prefix, params) in
        [("enc", &model.encoder.params), ("dec", &model.decoder.params)]
    {
        for spec in params.blocks() {
            tensors.push((
                format!("{prefix}.{}", spec.name),
                spec.shape.clone(),
                &params.data()[spec.offset..spec.offset + spec.len()],
            ));
        }
    }
    write_tensors(&stem.with_extension("tensors"), &tensors)?;

    let sidecar = SketchSidecar {
        format: "hpd-sketch-model".to_string(),
        version: 1,
        encoder: model.encoder.cfg().clone(),
        decoder: model.decoder.cfg().clone(),
    };
    fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_sketch_model(stem: &Path) -> Result<SketchModel, NeuralError> {
    let sidecar: SketchSidecar =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    if sidecar.format != "hpd-sketch-model" || sidecar.version != 1 {
        return Err(NeuralError::ShapeMismatch(format!(
            "unsupported checkpoint format {}/{}",
            sidecar.format, sidecar.version
        )));
    }
    let tensors = TensorReader::open(&stem.with_extension("tensors"))?.read_all()?;
    let mut encoder = EncoderParams::new(sidecar.encoder);
    let mut decoder = DecoderParams::new(sidecar.decoder);
    fill_params(&mut encoder.params, "enc", &tensors)?;
    fill_params(&mut decoder.params, "dec", &tensors)?;
    Ok(SketchModel { encoder, decoder })
}

#[derive(Serialize, Deserialize)]
struct ScorerSidecar {
    format: String,
    version: u32,
    params: PathScorerParams,
}

pub fn save_path_scorer(path: &Path, params: &PathScorerParams) -> Result<(), NeuralError> {
    let sidecar = ScorerSidecar {
        format: "hpd-path-scorer".to_string(),
        version: 1,
        params: params.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_path_scorer(path: &Path) -> Result<PathScorerParams, NeuralError> {
    let sidecar: ScorerSidecar = serde_json::from_str(&fs::read_to_string(path)?)?;
    if sidecar.format != "hpd-path-scorer" || sidecar.version != 1 {
        return Err(NeuralError::ShapeMismatch(format!(
            "unsupported scorer format {}/{}",
            sidecar.format, sidecar.version
        )));
    }
    if sidecar.params.feature_names != super::FEATURE_NAMES {
        return Err(NeuralError::ShapeMismatch(
            "scorer feature set does not match this build".to_string(),
        ));
    }
    Ok(sidecar.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{train_poset_decoder, TrainConfig};
    use crate::poset::test_fixtures::{example_poset, labels};

    fn trained_model() -> SketchModel {
        let cfg = TrainConfig {
            epochs: 1,
            hidden_dim: 4,
            embed_dim: 3,
            ..TrainConfig::desk_scale()
        };
        let data = vec![(
            vec!["who".to_string(), "influences".to_string()],
            example_poset(),
        )];
        train_poset_decoder(&data, &cfg).unwrap().0
    }

    #[test]
    fn sketch_model_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("sketch");
        let model = trained_model();
        save_sketch_model(&stem, &model).unwrap();
        let loaded = load_sketch_model(&stem).unwrap();
        assert_eq!(loaded.encoder.params.data(), model.encoder.params.data());
        assert_eq!(loaded.decoder.params.data(), model.decoder.params.data());
        assert_eq!(loaded.decoder.cfg(), model.decoder.cfg());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("sketch");
        let model = trained_model();
        save_sketch_model(&stem, &model).unwrap();
        // Corrupt the sidecar so the declared embed dim no longer matches
        // the tensors in the container.
        let sidecar_path = stem.with_extension("json");
        let text = std::fs::read_to_string(&sidecar_path).unwrap();
        let corrupted = text.replace("\"embed_dim\": 3", "\"embed_dim\": 5");
        assert_ne!(text, corrupted);
        std::fs::write(&sidecar_path, corrupted).unwrap();
        let err = load_sketch_model(&stem).unwrap_err();
        assert!(matches!(err, NeuralError::ShapeMismatch(_)), "got {err:?}");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("sketch");
        let model = trained_model();
        save_sketch_model(&stem, &model).unwrap();
        std::fs::write(stem.with_extension("tensors"), b"NOTMAGIC").unwrap();
        assert!(load_sketch_model(&stem).is_err());
    }

    #[test]
    fn path_scorer_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scorer.json");
        let mut params = PathScorerParams::zeros();
        params.weights[0] = 1.25;
        params.bias = -0.5;
        save_path_scorer(&path, &params).unwrap();
        assert_eq!(load_path_scorer(&path).unwrap(), params);
    }

    #[test]
    fn scorer_feature_drift_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scorer.json");
        let mut params = PathScorerParams::zeros();
        params.feature_names[0] = "renamed".to_string();
        save_path_scorer(&path, &params).unwrap();
        assert!(load_path_scorer(&path).is_err());
        let _ = labels(&["x0"]);
    }
}
