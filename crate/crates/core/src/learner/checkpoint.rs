//! Parameter checkpoints: `<stem>.bin` holds the flat parameter vector as
//! little-endian reals of the network's scalar width; `<stem>.json` describes
//! the layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LearnerError, MlpQNetwork};
use crate::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    /// `"f32"` or `"f64"`.
    pub scalar: String,
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    pub param_count: usize,
    pub layout: String,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

pub fn save_checkpoint<T: Scalar>(net: &MlpQNetwork<T>, stem: &Path) -> Result<CheckpointMeta, LearnerError> {
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        scalar: T::NAME.to_string(),
        layer_sizes: net.sizes().to_vec(),
        activation: "tanh".into(),
        param_count: net.param_count(),
        layout: "per layer: weights [out][in] row-major, then bias [out]".into(),
    };
    let mut bytes = Vec::with_capacity(net.param_count() * std::mem::size_of::<T>());
    for &p in net.params() {
        match T::NAME {
            "f32" => bytes.extend_from_slice(&(p.as_f64() as f32).to_le_bytes()),
            _ => bytes.extend_from_slice(&p.as_f64().to_le_bytes()),
        }
    }
    let (bin, json) = paths(stem);
    fs::write(bin, bytes)?;
    fs::write(json, serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    Ok(meta)
}

pub fn load_checkpoint<T: Scalar>(stem: &Path) -> Result<MlpQNetwork<T>, LearnerError> {
    let (bin, json) = paths(stem);
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(json)?)
        .map_err(|e| LearnerError::Checkpoint(e.to_string()))?;
    if meta.version != CHECKPOINT_VERSION {
        return Err(LearnerError::Checkpoint(format!("unsupported version {}", meta.version)));
    }
    let bytes = fs::read(bin)?;
    let width = match meta.scalar.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(LearnerError::Checkpoint(format!("unknown scalar {other:?}"))),
    };
    if bytes.len() != meta.param_count * width {
        return Err(LearnerError::Checkpoint(format!(
            "expected {} bytes, found {}",
            meta.param_count * width,
            bytes.len()
        )));
    }
    let params = bytes
        .chunks_exact(width)
        .map(|c| {
            let v = if width == 4 {
                f32::from_le_bytes(c.try_into().unwrap()) as f64
            } else {
                f64::from_le_bytes(c.try_into().unwrap())
            };
            T::lit(v)
        })
        .collect();
    MlpQNetwork::from_params(&meta.layer_sizes, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_both_widths() {
        let dir = std::env::temp_dir().join(format!("pbwl-ckpt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        let net = MlpQNetwork::<f64>::new(&[2, 5, 3], &mut rng);
        let meta = save_checkpoint(&net, &dir.join("a")).unwrap();
        assert_eq!(meta.param_count, 2 * 5 + 5 + 5 * 3 + 3);
        assert_eq!(fs::metadata(dir.join("a.bin")).unwrap().len(), 8 * meta.param_count as u64);
        let back: MlpQNetwork<f64> = load_checkpoint(&dir.join("a")).unwrap();
        assert_eq!(back.params(), net.params());

        let net = MlpQNetwork::<f32>::new(&[3, 4, 2], &mut rng);
        save_checkpoint(&net, &dir.join("b")).unwrap();
        assert_eq!(fs::metadata(dir.join("b.bin")).unwrap().len(), 4 * net.param_count() as u64);
        let back: MlpQNetwork<f32> = load_checkpoint(&dir.join("b")).unwrap();
        assert_eq!(back.params(), net.params());

        fs::write(dir.join("b.bin"), [0u8; 3]).unwrap();
        assert!(load_checkpoint::<f32>(&dir.join("b")).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
