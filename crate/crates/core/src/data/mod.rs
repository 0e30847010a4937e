//! Feature datasets: container, FTDS/CSV file formats, stratified splitting
//! and the synthetic shifted-domain generator.

mod dataset;
mod format;
mod split;
mod synth;

pub use dataset::FeatureDataset;
pub use format::{
    decode_features, encode_features, load_features, load_features_csv, save_features, save_features_csv,
    FTDS_MAGIC, FTDS_VERSION,
};
pub use split::{split, split_indices};
pub use synth::{synth_domains, ShiftKind, SynthConfig};
