//! MSMK mask record (little-endian):
//!
//! ```text
//! "MSMK" | u32 version=1 | u32 rows | u32 cols | u8 strategy
//! | [32] config digest | u64 seed | ceil(rows·cols / 8) bytes of bits
//! ```
//!
//! Bits are packed row-major, least-significant bit first; padding bits in
//! the last byte must be zero.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{ByteReader, ByteWriter, ConfigDigest};
use crate::error::{Error, Result};
use crate::math::DenseMatrix;

pub const MSMK_MAGIC: &[u8; 4] = b"MSMK";
pub const MSMK_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskStrategy {
    Naive,
    Editor,
    Binary,
    /// Hand-built masks (all-ones, all-zeros, random) used for baselines and checks.
    Custom,
}

impl MaskStrategy {
    pub fn tag(self) -> u8 {
        match self {
            MaskStrategy::Naive => 0,
            MaskStrategy::Editor => 1,
            MaskStrategy::Binary => 2,
            MaskStrategy::Custom => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => MaskStrategy::Naive,
            1 => MaskStrategy::Editor,
            2 => MaskStrategy::Binary,
            3 => MaskStrategy::Custom,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MaskStrategy::Naive => "naive",
            MaskStrategy::Editor => "editor",
            MaskStrategy::Binary => "binary",
            MaskStrategy::Custom => "custom",
        }
    }
}

impl std::fmt::Display for MaskStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MaskStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(MaskStrategy::Naive),
            "editor" => Ok(MaskStrategy::Editor),
            "binary" => Ok(MaskStrategy::Binary),
            "custom" => Ok(MaskStrategy::Custom),
            other => Err(Error::Config(format!("unknown mask strategy `{other}`"))),
        }
    }
}

/// Per-weight freeze decision over the final-layer W. `true` = frozen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    strategy: MaskStrategy,
    seed: u64,
    config_digest: ConfigDigest,
}

impl WeightMask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>, strategy: MaskStrategy) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Dimension(format!("{rows}x{cols} mask needs {} bits, got {}", rows * cols, bits.len())));
        }
        Ok(Self {
            rows,
            cols,
            bits,
            strategy,
            seed: 0,
            config_digest: [0; 32],
        })
    }

    pub fn filled(rows: usize, cols: usize, frozen: bool) -> Self {
        Self::new(rows, cols, vec![frozen; rows * cols], MaskStrategy::Custom).unwrap()
    }

    /// Mask covering `w` with the given predicate per entry.
    pub(crate) fn from_predicate(w: &DenseMatrix, strategy: MaskStrategy, pred: impl Fn(f64) -> bool) -> Self {
        let bits = w.as_slice().iter().map(|&v| pred(v)).collect();
        Self::new(w.rows(), w.cols(), bits, strategy).unwrap()
    }

    pub fn with_provenance(mut self, seed: u64, config_digest: ConfigDigest) -> Self {
        self.seed = seed;
        self.config_digest = config_digest;
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn strategy(&self) -> MaskStrategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config_digest(&self) -> &ConfigDigest {
        &self.config_digest
    }

    pub fn frozen_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn check_covers(&self, w: &DenseMatrix) -> Result<()> {
        if self.shape() != w.shape() {
            return Err(Error::Dimension(format!("mask is {:?}, W is {:?}", self.shape(), w.shape())));
        }
        Ok(())
    }
}

/// `(frozen_fraction, reuse_fraction)`, summing to one. An empty mask counts
/// as fully reusable.
pub fn mask_sparsity(mask: &WeightMask) -> (f64, f64) {
    let n = mask.bits.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let frozen = mask.frozen_count();
    (frozen as f64 / n as f64, (n - frozen) as f64 / n as f64)
}

pub fn encode_mask(mask: &WeightMask) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MSMK_MAGIC);
    w.u32(MSMK_VERSION);
    w.u32(mask.rows as u32);
    w.u32(mask.cols as u32);
    w.u8(mask.strategy.tag());
    w.bytes(&mask.config_digest);
    w.u64(mask.seed);
    let mut packed = vec![0u8; mask.bits.len().div_ceil(8)];
    for (i, _) in mask.bits.iter().enumerate().filter(|(_, &b)| b) {
        packed[i / 8] |= 1 << (i % 8);
    }
    w.bytes(&packed);
    w.into_inner()
}

pub fn decode_mask(bytes: &[u8]) -> Result<WeightMask> {
    let mut r = ByteReader::new(bytes);
    r.magic(MSMK_MAGIC)?;
    r.version(MSMK_VERSION)?;
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let tag_at = r.offset();
    let tag = r.u8("strategy")?;
    let strategy = MaskStrategy::from_tag(tag).ok_or_else(|| Error::format(tag_at, format!("unknown strategy tag {tag}")))?;
    let config_digest = r.digest()?;
    let seed = r.u64("seed")?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(8, "mask shape overflows"))?;
    let bits_at = r.offset();
    let packed = r.take(n.div_ceil(8), "mask bits")?;
    r.finish()?;
    if n % 8 != 0 {
        let last = packed[packed.len() - 1];
        if last >> (n % 8) != 0 {
            return Err(Error::format(bits_at + packed.len() as u64 - 1, "non-zero padding bits"));
        }
    }
    let bits = (0..n).map(|i| packed[i / 8] & (1 << (i % 8)) != 0).collect();
    Ok(WeightMask {
        rows,
        cols,
        bits,
        strategy,
        seed,
        config_digest,
    })
}

pub fn save_mask(mask: &WeightMask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<WeightMask> {
    decode_mask(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sparsity_counts() {
        assert_eq!(mask_sparsity(&WeightMask::filled(2, 3, true)), (1.0, 0.0));
        assert_eq!(mask_sparsity(&WeightMask::filled(2, 3, false)), (0.0, 1.0));
        let m = WeightMask::new(1, 4, vec![false, false, false, true], MaskStrategy::Naive).unwrap();
        assert_eq!(mask_sparsity(&m), (0.25, 0.75));
    }

    #[test]
    fn packed_layout_is_pinned() {
        let m = WeightMask::new(1, 10, (0..10).map(|i| i == 0 || i == 9).collect(), MaskStrategy::Binary)
            .unwrap()
            .with_provenance(5, [7; 32]);
        let bytes = encode_mask(&m);
        assert_eq!(&bytes[..4], b"MSMK");
        assert_eq!(bytes[16], 2);
        assert_eq!(&bytes[17..49], &[7u8; 32]);
        assert_eq!(u64::from_le_bytes(bytes[49..57].try_into().unwrap()), 5);
        assert_eq!(&bytes[57..], &[0b0000_0001, 0b0000_0010]);
    }

    #[test]
    fn corrupt_masks_fail_closed() {
        let m = WeightMask::new(1, 10, vec![true; 10], MaskStrategy::Editor).unwrap();
        let bytes = encode_mask(&m);
        assert!(matches!(decode_mask(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        let mut padded = bytes.clone();
        *padded.last_mut().unwrap() |= 0x80;
        assert!(matches!(decode_mask(&padded), Err(Error::Format { .. })));
        let mut tag = bytes.clone();
        tag[16] = 9;
        assert!(matches!(decode_mask(&tag), Err(Error::Format { offset: 16, .. })));
    }

    #[test]
    fn strategy_names_parse() {
        for s in [MaskStrategy::Naive, MaskStrategy::Editor, MaskStrategy::Binary, MaskStrategy::Custom] {
            assert_eq!(s.name().parse::<MaskStrategy>().unwrap(), s);
        }
        assert!(matches!("lottery".parse::<MaskStrategy>(), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_byte_identical(
            rows in 1usize..9,
            cols in 1usize..9,
            seed in any::<u64>(),
            raw in prop::collection::vec(any::<bool>(), 64),
            tag in 0u8..4,
        ) {
            let bits = raw[..rows * cols].to_vec();
            let m = WeightMask::new(rows, cols, bits, MaskStrategy::from_tag(tag).unwrap())
                .unwrap()
                .with_provenance(seed, [tag; 32]);
            let bytes = encode_mask(&m);
            let back = decode_mask(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_mask(&back), bytes);
        }
    }
}
