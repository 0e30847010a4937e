//! MSHD head record (little-endian):
//!
//! ```text
//! "MSHD" | u32 version=1 | u64 seed | [32] config digest
//! | u32 input_dim | u32 hidden_width (0 = no hidden layer) | u32 num_classes
//! | [hidden_width > 0] hidden W (H×D f64) | hidden b (H f64)
//! | W (C×K f64) | b (C f64)                      K = H or D
//! | u8 snapshot flags (bit 0 source-init, bit 1 source-final)
//! | per set flag, in bit order: W (C×K f64) | b (C f64)
//! ```

use std::fs;
use std::path::Path;

use super::head::{HiddenLayer, MlpHead};
use super::train::{ParamSnapshot, SnapshotTag, Snapshots};
use crate::codec::{ByteReader, ByteWriter, ConfigDigest};
use crate::error::{Error, Result};
use crate::math::DenseMatrix;

pub const MSHD_MAGIC: &[u8; 4] = b"MSHD";
pub const MSHD_VERSION: u32 = 1;

/// A head plus everything needed to reproduce and re-initialize it.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadArtifact {
    pub head: MlpHead,
    pub snapshots: Snapshots,
    pub seed: u64,
    pub config_digest: ConfigDigest,
}

pub fn encode_head(a: &HeadArtifact) -> Vec<u8> {
    let head = &a.head;
    let mut w = ByteWriter::new();
    w.bytes(MSHD_MAGIC);
    w.u32(MSHD_VERSION);
    w.u64(a.seed);
    w.bytes(&a.config_digest);
    w.u32(head.input_dim() as u32);
    w.u32(head.hidden().map_or(0, |h| h.weight.rows()) as u32);
    w.u32(head.num_classes() as u32);
    if let Some(h) = head.hidden() {
        w.f64s(h.weight.as_slice());
        w.f64s(&h.bias);
    }
    w.f64s(head.weight().as_slice());
    w.f64s(head.bias());
    let snaps = [&a.snapshots.source_init, &a.snapshots.source_final];
    let flags = snaps
        .iter()
        .enumerate()
        .fold(0u8, |f, (bit, s)| if s.is_some() { f | (1 << bit) } else { f });
    w.u8(flags);
    for s in snaps.into_iter().flatten() {
        w.f64s(s.weight().as_slice());
        w.f64s(s.bias());
    }
    w.into_inner()
}

fn read_matrix(r: &mut ByteReader<'_>, rows: usize, cols: usize, what: &str) -> Result<DenseMatrix> {
    let values = r.finite_f64s(rows * cols, what)?;
    DenseMatrix::new(rows, cols, values)
}

pub fn decode_head(bytes: &[u8]) -> Result<HeadArtifact> {
    let mut r = ByteReader::new(bytes);
    r.magic(MSHD_MAGIC)?;
    r.version(MSHD_VERSION)?;
    let seed = r.u64("seed")?;
    let config_digest = r.digest()?;
    let shape_at = r.offset();
    let input_dim = r.u32("input_dim")? as usize;
    let hidden_width = r.u32("hidden_width")? as usize;
    let num_classes = r.u32("num_classes")? as usize;
    if input_dim == 0 || num_classes == 0 {
        return Err(Error::format(shape_at, "zero-sized head"));
    }
    let hidden = if hidden_width > 0 {
        let weight = read_matrix(&mut r, hidden_width, input_dim, "hidden weight")?;
        let bias = r.finite_f64s(hidden_width, "hidden bias")?;
        Some(HiddenLayer { weight, bias })
    } else {
        None
    };
    let k = if hidden_width > 0 { hidden_width } else { input_dim };
    let weight = read_matrix(&mut r, num_classes, k, "weight")?;
    let bias = r.finite_f64s(num_classes, "bias")?;
    let flags_at = r.offset();
    let flags = r.u8("snapshot flags")?;
    if flags & !0b11 != 0 {
        return Err(Error::format(flags_at, format!("unknown snapshot flags {flags:#04x}")));
    }
    let mut read_snapshot = |bit: u8, tag: SnapshotTag| -> Result<Option<ParamSnapshot>> {
        if flags & (1 << bit) == 0 {
            return Ok(None);
        }
        let w = read_matrix(&mut r, num_classes, k, "snapshot weight")?;
        let b = r.finite_f64s(num_classes, "snapshot bias")?;
        ParamSnapshot::from_parts(tag, w, b).map(Some)
    };
    let source_init = read_snapshot(0, SnapshotTag::SourceInit)?;
    let source_final = read_snapshot(1, SnapshotTag::SourceFinal)?;
    r.finish()?;
    Ok(HeadArtifact {
        head: MlpHead::from_parts(hidden, weight, bias)?,
        snapshots: Snapshots { source_init, source_final },
        seed,
        config_digest,
    })
}

pub fn save_head(a: &HeadArtifact, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_head(a))?;
    Ok(())
}

pub fn load_head(path: impl AsRef<Path>) -> Result<HeadArtifact> {
    decode_head(&fs::read(path)?)
}
