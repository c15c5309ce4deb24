//! Verification networks trained from scratch: the Tuple-model and the
//! Q-model, their blind variants, SGD training and product ensembling.

mod checkpoint;
mod embedding;
mod net;
mod train;

pub use checkpoint::{load_models, read_models, save_models, write_model};
pub use embedding::{embed_tuple, EmbeddingTable};
pub use net::{ensemble_predict, predict_answer, Dense, Example, FeatureMode, Lstm, Params, Variant, VerifierModel};
pub use train::{evaluate_split, train, EpochLog, ModelSpec, TrainConfig, TrainLog};

#[cfg(test)]
mod tests;
