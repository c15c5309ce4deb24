//! Binary visual question answering on abstract scenes, framed as visual
//! verification.
//!
//! A yes/no question is summarized into a `<P, R, S>` tuple
//! ([`parser`]), the primary and secondary arguments are aligned to scene
//! objects by mutual information ([`alignment`]), scene features are
//! extracted around the aligned objects ([`features`]) and a two-branch
//! network decides whether the tuple is depicted ([`models`]). The
//! language-only and holistic reference systems live in [`baselines`], the
//! consensus metrics and dataset audits in [`eval`], and [`pipeline`] runs the
//! whole protocol end to end with content-hash caching.

pub mod alignment;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod parser;
pub mod pipeline;
pub mod provenance;
pub mod scene;
pub mod seed;

pub use error::{Error, Result};

pub use alignment::{align, fit_alignment, mutual_information, Alignment, AlignmentTable, Resolution};
pub use eval::{evaluate, pair_accuracy, vqa_accuracy, EvalReport};
pub use features::{
    attended_features, holistic_features, AttendedLayout, GmmBank, HolisticLayout, PoseClusterBank,
};
pub use models::{EmbeddingTable, FeatureMode, TrainConfig, Variant, VerifierModel};
pub use parser::{Lexicons, ParsedQuestion, Summary, Tuple};
pub use scene::{Answer, Category, ClipartObject, Corpus, QaItem, Scene, SceneType, Vocabulary};
