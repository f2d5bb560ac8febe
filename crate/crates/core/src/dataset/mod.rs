//! Dataset ingestion, synthetic graphs, seeded splits and the on-disk cache.

mod cache;
mod citation;
mod splits;
mod synthetic;

pub use cache::{
    decode_graph, encode_graph, load_cache, save_cache, Sidecar, CACHE_FILE, SIDECAR_FILE,
};
pub use citation::{load_citation_text, DatasetManifest, FeatureKind, LoadReport};
pub(crate) use splits::draw_per_class;
pub use splits::{make_uniform_splits, select_uniform_train, SplitMasks};
pub use synthetic::generate_sbm;
