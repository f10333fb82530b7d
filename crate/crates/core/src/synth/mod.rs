//! Copy-paste synthetic dataset construction, target-domain simulation and statistics.

pub mod assets;
pub mod compose;
pub mod dataset;
pub mod shift;
pub mod stats;
pub mod store;

pub use assets::{procedural_assets, BackgroundAsset, ForegroundAsset, ProceduralSpec};
pub use compose::{compose, ALPHA_THRESHOLD};
pub use dataset::{
    generate_dataset, generate_target_domain, regenerate, AssetSource, DatasetManifest,
    GeneratedDataset, ManifestEntry, ManifestHeader, Split, SynthRecord,
};
pub use shift::{apply_shift, ShiftParams};
pub use stats::{center_bias_map, object_size_ratio};
pub use store::{LabelAccess, SplitReader};
