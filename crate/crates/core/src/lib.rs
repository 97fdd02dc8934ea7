//! Dataset tooling and robustness benchmarks for image classifiers trained
//! on small datasets mixed with generated images.
//!
//! The crate covers five areas:
//!
//! * [`manifest`] and [`dataset`]: dataset catalogs, channel statistics,
//!   stratified subsets, ingestion of generated images and mixing them into
//!   real training sets.
//! * [`corruptions`]: the 15 common corruptions at five severities and the
//!   builder for corrupted test-set trees.
//! * [`testsets`]: class-intersection and misclassification-filtered test
//!   sets ported to a small label space.
//! * [`augment`]: Mixup, CutMix, their switched combination, and AugMix.
//! * [`eval`]: clean error, corruption error grids, mCE, delta reports and
//!   mean attention distance.
//!
//! Every stochastic operation takes an explicit seed; see [`rng`].

pub mod augment;
pub mod corruptions;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod filter;
pub mod fixtures;
pub mod fsutil;
pub mod image;
pub mod manifest;
pub mod rng;
pub mod testsets;

pub use crate::dataset::{
    compute_channel_stats, ingest_generated, mix_datasets, stratified_subset, ChannelStats, Labeling, Take,
};
pub use crate::error::{Error, Result};
pub use crate::image::{Geometry, ImageBuffer};
pub use crate::manifest::{load_manifest, ClassDescriptor, DatasetManifest, ItemRecord, Source, Validation};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
