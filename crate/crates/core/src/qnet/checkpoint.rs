//! Binary checkpoint: `RHQN` magic, u32 version, u64 vocabulary hash, u32
//! layers, u32 width, u64 parameter count, then the parameters as
//! little-endian f32. A JSON sidecar with the same stem carries free-form
//! training metadata.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{QNetError, QNetwork, Scalar, Vocabulary};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RHQN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub vocabulary_hash: u64,
    pub layers: usize,
    pub width: usize,
    pub num_params: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_checkpoint<F: Scalar>(
    net: &QNetwork<F>,
    path: &Path,
    metadata: &serde_json::Value,
) -> Result<(), QNetError> {
    let mut buf = Vec::with_capacity(32 + 4 * net.num_params());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&net.vocabulary().hash().to_le_bytes());
    buf.extend_from_slice(&(net.layers() as u32).to_le_bytes());
    buf.extend_from_slice(&(net.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for &p in net.params() {
        buf.extend_from_slice(&(p.as_f64() as f32).to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(metadata)?)?;
    Ok(())
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> Result<[u8; N], QNetError> {
    let end = *at + N;
    let slice = bytes.get(*at..end).ok_or_else(|| {
        QNetError::Io(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated checkpoint"))
    })?;
    *at = end;
    Ok(slice.try_into().expect("length checked"))
}

pub fn read_header(bytes: &[u8]) -> Result<(CheckpointHeader, usize), QNetError> {
    let mut at = 0;
    if &take::<4>(bytes, &mut at)? != CHECKPOINT_MAGIC {
        return Err(QNetError::BadMagic);
    }
    let version = u32::from_le_bytes(take(bytes, &mut at)?);
    if version != CHECKPOINT_VERSION {
        return Err(QNetError::BadVersion(version));
    }
    let vocabulary_hash = u64::from_le_bytes(take(bytes, &mut at)?);
    let layers = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let width = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let num_params = u64::from_le_bytes(take(bytes, &mut at)?) as usize;
    Ok((
        CheckpointHeader {
            vocabulary_hash,
            layers,
            width,
            num_params,
        },
        at,
    ))
}

/// Loads a network for `vocab`; fails if the checkpoint was written for a
/// different vocabulary.
pub fn load_checkpoint<F: Scalar>(path: &Path, vocab: Arc<Vocabulary>) -> Result<QNetwork<F>, QNetError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (header, mut at) = read_header(&bytes)?;
    if header.vocabulary_hash != vocab.hash() {
        return Err(QNetError::VocabularyMismatch {
            expected: vocab.hash(),
            found: header.vocabulary_hash,
        });
    }
    let mut net = QNetwork::<F>::new(vocab, header.width, header.layers, 0);
    if net.num_params() != header.num_params {
        return Err(QNetError::ParameterCount {
            expected: net.num_params(),
            found: header.num_params,
        });
    }
    for p in net.params_mut() {
        *p = F::of(f32::from_le_bytes(take(&bytes, &mut at)?) as f64);
    }
    Ok(net)
}
