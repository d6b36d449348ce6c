//! Binary checkpoint format.
//!
//! Layout (all integers little-endian u32, all floats little-endian f64):
//!
//! ```text
//! magic "RSKL" | version | network count
//! per network: layer count | per layer: rows, cols, weights (row-major), bias
//! ```
//!
//! Networks are stored in the fixed order actor, critic1, critic2,
//! target critic1, target critic2, temperature; the temperature uses the same
//! layout as the networks, as a single 1x1 layer whose weight is log_alpha.

use super::mlp::{Layer, Mlp};
use ndarray::{Array1, Array2};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"RSKL";
pub const VERSION: u32 = 1;
const NETWORK_COUNT: u32 = 6;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint structure invalid: {0}")]
    BadShape(String),
}

/// Everything persisted for one training state.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointData {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_alpha: f64,
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_net<W: Write>(w: &mut W, net: &Mlp) -> std::io::Result<()> {
    write_u32(w, net.layers().len() as u32)?;
    for layer in net.layers() {
        let (rows, cols) = layer.w.dim();
        write_u32(w, rows as u32)?;
        write_u32(w, cols as u32)?;
        for v in layer.w.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in layer.b.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, CheckpointError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_net<R: Read>(r: &mut R) -> Result<Mlp, CheckpointError> {
    let n_layers = read_u32(r)? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(CheckpointError::BadShape(format!("layer count {n_layers}")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut prev_out: Option<usize> = None;
    for k in 0..n_layers {
        let rows = read_u32(r)? as usize;
        let cols = read_u32(r)? as usize;
        if rows == 0 || cols == 0 || rows > 1 << 20 || cols > 1 << 20 {
            return Err(CheckpointError::BadShape(format!("layer {k} dims {rows}x{cols}")));
        }
        if let Some(p) = prev_out {
            if cols != p {
                return Err(CheckpointError::BadShape(format!(
                    "layer {k} input {cols} does not chain from previous output {p}"
                )));
            }
        }
        prev_out = Some(rows);
        let mut w = Array2::zeros((rows, cols));
        for v in w.iter_mut() {
            *v = read_f64(r)?;
        }
        let mut b = Array1::zeros(rows);
        for v in b.iter_mut() {
            *v = read_f64(r)?;
        }
        layers.push(Layer { w, b });
    }
    Ok(Mlp::from_layers(layers))
}

pub fn save(path: &Path, data: &CheckpointData) -> Result<(), CheckpointError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, NETWORK_COUNT)?;
    for net in [&data.actor, &data.critic1, &data.critic2, &data.target1, &data.target2] {
        write_net(&mut w, net)?;
    }
    let temp = Mlp::from_layers(vec![Layer {
        w: Array2::from_shape_vec((1, 1), vec![data.log_alpha]).unwrap(),
        b: Array1::zeros(1),
    }]);
    write_net(&mut w, &temp)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<CheckpointData, CheckpointError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let count = read_u32(&mut r)?;
    if count != NETWORK_COUNT {
        return Err(CheckpointError::BadShape(format!("network count {count}")));
    }
    let actor = read_net(&mut r)?;
    let critic1 = read_net(&mut r)?;
    let critic2 = read_net(&mut r)?;
    let target1 = read_net(&mut r)?;
    let target2 = read_net(&mut r)?;
    let temp = read_net(&mut r)?;
    if temp.layers().len() != 1 || temp.layers()[0].w.dim() != (1, 1) {
        return Err(CheckpointError::BadShape("temperature block must be a 1x1 layer".into()));
    }
    // Trailing garbage means the file is not one of ours.
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CheckpointError::BadShape("trailing bytes after temperature".into()));
    }
    Ok(CheckpointData {
        actor,
        critic1,
        critic2,
        target1,
        target2,
        log_alpha: temp.layers()[0].w[[0, 0]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn sample_data() -> CheckpointData {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        CheckpointData {
            actor: Mlp::new(&[6, 8, 4], &mut rng),
            critic1: Mlp::new(&[8, 8, 1], &mut rng),
            critic2: Mlp::new(&[8, 8, 1], &mut rng),
            target1: Mlp::new(&[8, 8, 1], &mut rng),
            target2: Mlp::new(&[8, 8, 1], &mut rng),
            log_alpha: -1.234567890123,
        }
    }

    #[test]
    fn round_trip_is_bitwise_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.rskl");
        let data = sample_data();
        save(&path, &data).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded, data);

        // Identical forward outputs, bitwise.
        let x = Array2::from_shape_fn((3, 6), |(i, j)| (i * 7 + j) as f64 * 0.1 - 1.0);
        let y0 = data.actor.forward(&x).unwrap();
        let y1 = loaded.actor.forward(&x).unwrap();
        for (a, b) in y0.iter().zip(y1.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.rskl");
        std::fs::write(&path, b"NOPE then some bytes").unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.rskl");
        let data = sample_data();
        save(&path, &data).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load(&path).is_err());
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ver.rskl");
        let data = sample_data();
        save(&path, &data).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99; // bump the version field
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::BadVersion(_))));
    }
}
