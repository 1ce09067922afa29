//! File formats, dataset directories and configuration files.

pub mod config;
pub mod dataset;
pub mod formats;

pub use config::{DatasetPlan, ExperimentConfig, KeyValues};
pub use dataset::{assign_splits, Dataset, DatasetWriter, ManifestEntry, Split};
pub use formats::{
    read_belief, read_params, read_raster, read_repset, write_belief, write_params, write_raster,
    write_repset, ModelParams, RepRecord,
};
