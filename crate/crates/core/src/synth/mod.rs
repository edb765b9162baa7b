//! Synthesizer definitions and the engine that turns an original dataset
//! into m synthetic copies.

mod engine;
mod persist;
mod pmm;
mod spec;

pub use engine::{bootstrap_rows, synthesize, synthesize_from_rows, synthesize_one, SyntheticSet};
pub use persist::{dataset_file_name, read_manifest, read_synthetic_set, write_synthetic_set, Manifest, MANIFEST_FILE};
pub use pmm::{pmm_draw, PmmDonorPool};
pub use spec::{
    make_order, make_predictors, Base, EngineParams, Label, Method, OrderKind, OrderSuffix,
    PredictorMatrix, PredictorMode, SynthesizerSpec, VisitSequence,
};
