//! FTDS binary layout (little-endian):
//!
//! ```text
//! "FTDS" | u32 version=1 | u32 feature_dim | u32 num_classes
//! | u32 name_len | name (UTF-8) | u64 sample_count
//! | sample_count × ( u32 label | feature_dim × f64 )
//! ```
//!
//! The CSV variant has a header `label,f0,...,f{D-1}` and one sample per row.

use std::fs;
use std::path::Path;

use super::FeatureDataset;
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const FTDS_MAGIC: &[u8; 4] = b"FTDS";
pub const FTDS_VERSION: u32 = 1;

pub fn encode_features(ds: &FeatureDataset) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(FTDS_MAGIC);
    w.u32(FTDS_VERSION);
    w.u32(ds.feature_dim() as u32);
    w.u32(ds.num_classes() as u32);
    w.str(ds.domain());
    w.u64(ds.len() as u64);
    for (x, y) in ds.iter() {
        w.u32(y as u32);
        w.f64s(x);
    }
    w.into_inner()
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureDataset> {
    let mut r = ByteReader::new(bytes);
    r.magic(FTDS_MAGIC)?;
    r.version(FTDS_VERSION)?;
    let dim_at = r.offset();
    let feature_dim = r.u32("feature_dim")? as usize;
    if feature_dim == 0 {
        return Err(Error::format(dim_at, "feature_dim is 0"));
    }
    let classes_at = r.offset();
    let num_classes = r.u32("num_classes")? as usize;
    if num_classes == 0 {
        return Err(Error::format(classes_at, "num_classes is 0"));
    }
    let domain = r.str("domain name")?;
    let count_at = r.offset();
    let count = r.u64("sample count")?;
    let record = 4 + 8 * feature_dim as u64;
    if count.checked_mul(record) != Some(r.remaining() as u64) {
        return Err(Error::format(
            count_at,
            format!(
                "sample count {count} needs {} bytes of records, file has {}",
                count.saturating_mul(record),
                r.remaining()
            ),
        ));
    }
    let count = count as usize;
    let mut labels = Vec::with_capacity(count);
    let mut features = Vec::with_capacity(count * feature_dim);
    for _ in 0..count {
        let at = r.offset();
        let label = r.u32("label")?;
        if label as usize >= num_classes {
            return Err(Error::format(at, format!("label {label} >= num_classes {num_classes}")));
        }
        labels.push(label);
        for _ in 0..feature_dim {
            features.push(r.finite_f64("feature")?);
        }
    }
    r.finish()?;
    FeatureDataset::new(feature_dim, num_classes, domain, features, labels)
}

pub fn save_features(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_features(ds))?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureDataset> {
    decode_features(&fs::read(path)?)
}

pub fn save_features_csv(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.feature_dim()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(csv_io)?;
    for (x, y) in ds.iter() {
        let mut row = Vec::with_capacity(x.len() + 1);
        row.push(y.to_string());
        // `{:?}` is the shortest representation that parses back to the same bits.
        row.extend(x.iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads the CSV variant. `num_classes` defaults to `max(label) + 1` and the
/// domain name to the file stem.
pub fn load_features_csv(
    path: impl AsRef<Path>,
    num_classes: Option<usize>,
    domain: Option<&str>,
) -> Result<FeatureDataset> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_io)?;
    let header = rdr.headers().map_err(|e| csv_format(&e))?.clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(Error::format(0, "CSV header must start with `label` followed by f0..f{D-1}"));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::format(0, format!("CSV header column {} is `{name}`, expected `f{j}`", j + 1)));
        }
    }
    let feature_dim = header.len() - 1;
    let mut labels = Vec::new();
    let mut features = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_format(&e))?;
        let at = rec.position().map_or(0, |p| p.byte());
        if rec.len() != feature_dim + 1 {
            return Err(Error::format(at, format!("row has {} fields, expected {}", rec.len(), feature_dim + 1)));
        }
        let label: u32 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(at, format!("bad label `{}`", &rec[0])))?;
        labels.push(label);
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(at, format!("bad feature `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::format(at, "non-finite feature"));
            }
            features.push(v);
        }
    }
    let inferred = labels.iter().max().map_or(1, |&m| m as usize + 1);
    let num_classes = num_classes.unwrap_or(inferred);
    if inferred > num_classes {
        return Err(Error::Data(format!("label {} >= num_classes {num_classes}", inferred - 1)));
    }
    let domain = domain
        .map(str::to_owned)
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    FeatureDataset::new(feature_dim, num_classes, domain, features, labels)
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(0, format!("{other:?}")),
    }
}

fn csv_format(e: &csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    Error::format(offset, e.to_string())
}
