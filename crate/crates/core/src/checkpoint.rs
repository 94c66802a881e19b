//! Binary checkpoint: versioned little-endian header, config echo, vocabulary
//! digest, parameters and Adam state.
//!
//! Layout:
//! ```text
//! magic "LNBDCKPT" | u32 version | blob config_echo | [u8; 32] vocab digest
//! u64 seed | u64 epochs_done | u32 n_arrays
//! per array: u64 rows | u64 cols | f32 * rows*cols
//! per array: u64 adam_step | f32 m * len | f32 v * len
//! ```
//! Sampling streams are derived from (seed, epoch, item), so seed and
//! epoch counter together are the full random state.

use std::fs;
use std::path::{Path, PathBuf};

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::model::ParamSet;
use crate::numerics::{AdamState, DenseMatrix};
use crate::train::TrainState;

const MAGIC: &[u8; 8] = b"LNBDCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// `key = value` lines of the run configuration that produced it.
    pub config_echo: String,
    pub vocab_digest: [u8; 32],
    pub seed: u64,
    pub state: TrainState,
}

fn corrupt(msg: String) -> Error {
    Error::Checkpoint(msg)
}

fn read_matrix(r: &mut ByteReader<'_>, rows: usize, cols: usize) -> Result<DenseMatrix<f32>> {
    let n = rows.checked_mul(cols).ok_or_else(|| corrupt("array size overflows".into()))?;
    let bytes = r.take(n.checked_mul(4).ok_or_else(|| corrupt("array size overflows".into()))?).map_err(corrupt)?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(DenseMatrix::from_vec(rows, cols, data))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(FORMAT_VERSION);
        w.blob(self.config_echo.as_bytes());
        w.bytes(&self.vocab_digest);
        w.u64(self.seed);
        w.u64(self.state.epochs_done as u64);
        let mats = self.state.params.mats();
        w.u32(mats.len() as u32);
        for m in mats {
            w.u64(m.rows() as u64);
            w.u64(m.cols() as u64);
            m.as_slice().iter().for_each(|&x| w.f32(x));
        }
        for a in &self.state.adam {
            w.u64(a.step);
            a.m.as_slice().iter().for_each(|&x| w.f32(x));
            a.v.as_slice().iter().for_each(|&x| w.f32(x));
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(8).map_err(corrupt)? != MAGIC {
            return Err(corrupt("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32().map_err(corrupt)?;
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported checkpoint version {version}")));
        }
        let config_echo = String::from_utf8(r.blob().map_err(corrupt)?.to_vec())
            .map_err(|_| corrupt("config echo is not UTF-8".into()))?;
        let mut vocab_digest = [0u8; 32];
        vocab_digest.copy_from_slice(r.take(32).map_err(corrupt)?);
        let seed = r.u64().map_err(corrupt)?;
        let epochs_done = r.u64().map_err(corrupt)? as usize;
        let n = r.u32().map_err(corrupt)? as usize;
        let mut mats = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let rows = r.u64().map_err(corrupt)? as usize;
            let cols = r.u64().map_err(corrupt)? as usize;
            mats.push(read_matrix(&mut r, rows, cols)?);
        }
        let mut adam = Vec::with_capacity(n.min(64));
        for m in &mats {
            let step = r.u64().map_err(corrupt)?;
            let am = read_matrix(&mut r, m.rows(), m.cols())?;
            let av = read_matrix(&mut r, m.rows(), m.cols())?;
            adam.push(AdamState { m: am, v: av, step });
        }
        if !r.finished() {
            return Err(corrupt("trailing bytes after optimizer state".into()));
        }
        Ok(Checkpoint {
            config_echo,
            vocab_digest,
            seed,
            state: TrainState {
                params: ParamSet::from_mats(mats),
                adam,
                epochs_done,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Refuses a checkpoint trained against a different vocabulary.
    pub fn ensure_digest(&self, digest: &[u8; 32]) -> Result<()> {
        if &self.vocab_digest != digest {
            return Err(Error::Checkpoint(
                "vocabulary digest mismatch: checkpoint was trained on a different dataset".into(),
            ));
        }
        Ok(())
    }

    /// Refuses a checkpoint whose array shapes differ from `expected`.
    pub fn ensure_shapes(&self, expected: &[(usize, usize)]) -> Result<()> {
        let got: Vec<_> = self.state.params.mats().iter().map(|m| (m.rows(), m.cols())).collect();
        if got != expected {
            return Err(Error::Checkpoint(format!(
                "parameter shapes {got:?} do not match the configured model {expected:?}"
            )));
        }
        Ok(())
    }
}

/// `final.ckpt` or `epoch-NNNN.ckpt` inside the checkpoint directory.
pub fn checkpoint_path(dir: &Path, epoch: Option<usize>) -> PathBuf {
    match epoch {
        Some(e) => dir.join(format!("epoch-{e:04}.ckpt")),
        None => dir.join("final.ckpt"),
    }
}
