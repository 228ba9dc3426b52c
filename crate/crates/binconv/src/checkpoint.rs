//! Checkpoint persistence: a human-readable JSON manifest followed by a raw
//! little-endian f32 parameter payload, in manifest order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinConvConfig, BinConvModel, VariantKind};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"BINCONV\x01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Element offset into the payload.
    pub offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: BinConvConfig,
    pub variant: VariantKind,
    pub seed: u64,
    pub epoch: usize,
    /// Dataset-level mean scale, when trained in that mode.
    pub dataset_scale: Option<f64>,
    pub tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint<S: Scalar>(
    model: &BinConvModel<S>,
    path: &Path,
    epoch: usize,
    dataset_scale: Option<f64>,
) -> Result<()> {
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    for (name, param) in model.named_parameters() {
        tensors.push(TensorEntry {
            name,
            shape: param.value.shape().to_vec(),
            offset,
        });
        for v in param.value.data() {
            payload.extend_from_slice(&(v.to_f64_() as f32).to_le_bytes());
        }
        offset += param.value.len();
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: model.config.clone(),
        variant: model.variant,
        seed: model.seed,
        epoch,
        dataset_scale,
        tensors,
    };
    let manifest_json = serde_json::to_vec_pretty(&manifest)?;

    // write-temp-then-rename so a crash never leaves a partial checkpoint
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(MAGIC)?;
        file.write_all(&(manifest_json.len() as u32).to_le_bytes())?;
        file.write_all(&manifest_json)?;
        file.write_all(&payload)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<(BinConvModel<S>, Manifest)> {
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
    }
    let manifest_len =
        u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let manifest_end = 12 + manifest_len;
    if bytes.len() < manifest_end {
        return Err(Error::Checkpoint("truncated manifest".into()));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[12..manifest_end])?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version mismatch: file {} vs supported {FORMAT_VERSION}",
            manifest.format_version
        )));
    }

    let total_elems: usize = manifest.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    let payload = &bytes[manifest_end..];
    if payload.len() != total_elems * 4 {
        return Err(Error::Checkpoint(format!(
            "truncated payload: {} bytes, manifest expects {}",
            payload.len(),
            total_elems * 4
        )));
    }

    let mut model = BinConvModel::<S>::build_variant(manifest.variant, &manifest.config, manifest.seed)?;
    {
        let model_names: Vec<(String, Vec<usize>)> = model
            .named_parameters()
            .iter()
            .map(|(n, p)| (n.clone(), p.value.shape().to_vec()))
            .collect();
        if model_names.len() != manifest.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "shape mismatch: manifest has {} tensors, model has {}",
                manifest.tensors.len(),
                model_names.len()
            )));
        }
        for ((name, shape), entry) in model_names.iter().zip(&manifest.tensors) {
            if name != &entry.name || shape != &entry.shape {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch: manifest {}{:?} vs model {}{:?}",
                    entry.name, entry.shape, name, shape
                )));
            }
        }
        let mut cursor = 0usize;
        for param in model.parameters_mut() {
            for dst in param.value.data_mut() {
                let raw: [u8; 4] = payload[cursor..cursor + 4].try_into().unwrap();
                *dst = S::from_f64(f32::from_le_bytes(raw) as f64);
                cursor += 4;
            }
        }
    }
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::mock::StepRng;
    use tempfile::tempdir;

    use crate::tensor::Tensor;

    fn tiny_config() -> BinConvConfig {
        BinConvConfig {
            bins: 12,
            lower: -5.0,
            upper: 5.0,
            channels: 4,
            kernel_context: 3,
            kernel_inner: 3,
            kernel_head: 3,
            blocks: 1,
            dropout: 0.0,
            context: 4,
        }
    }

    #[test]
    fn round_trip_is_bit_exact_for_f32() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = BinConvModel::<f32>::init(&tiny_config(), 5).unwrap();
        save_checkpoint(&model, &path, 50, None).unwrap();
        let (loaded, manifest) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(model.flat_params(), loaded.flat_params());
        assert_eq!(manifest.epoch, 50);
        assert_eq!(manifest.variant, VariantKind::Standard);

        let x = Tensor::zeros(vec![4, 12]);
        let mut rng = StepRng::new(0, 1);
        let a = model.forward(&x, false, &mut rng).unwrap();
        let b = loaded.forward(&x, false, &mut rng).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn save_is_byte_deterministic() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let model = BinConvModel::<f32>::init(&tiny_config(), 5).unwrap();
        save_checkpoint(&model, &p1, 1, Some(2.5)).unwrap();
        save_checkpoint(&model, &p2, 1, Some(2.5)).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn truncated_payload_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = BinConvModel::<f32>::init(&tiny_config(), 0).unwrap();
        save_checkpoint(&model, &path, 0, None).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 1);
        fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint::<f32>(&path).unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
    }

    #[test]
    fn mismatched_config_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = BinConvModel::<f32>::init(&tiny_config(), 0).unwrap();
        save_checkpoint(&model, &path, 0, None).unwrap();

        // edit the manifest so the declared shapes disagree with the payload
        let bytes = fs::read(&path).unwrap();
        let manifest_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut manifest: Manifest = serde_json::from_slice(&bytes[12..12 + manifest_len]).unwrap();
        manifest.config.channels = 2;
        manifest.config.context = 2;
        let new_json = serde_json::to_vec_pretty(&manifest).unwrap();
        let mut out = Vec::new();
        out.extend_from_slice(&bytes[..8]);
        out.extend_from_slice(&(new_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&new_json);
        out.extend_from_slice(&bytes[12 + manifest_len..]);
        fs::write(&path, &out).unwrap();

        let err = load_checkpoint::<f32>(&path).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("shape mismatch") || msg.contains("truncated payload"),
            "{msg}"
        );
    }
}
