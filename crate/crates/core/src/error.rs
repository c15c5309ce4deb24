use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("question {question_id} references unknown scene {scene_id}")]
    DanglingScene {
        question_id: String,
        scene_id: String,
    },

    #[error("question {question_id} has {found} human answers, expected 10")]
    AnswerCount { question_id: String, found: usize },

    #[error("scene {scene_id} is invalid: {message}")]
    InvalidScene { scene_id: String, message: String },

    #[error("question is empty after preprocessing")]
    EmptyQuestion,

    #[error("no noun or pronoun anchor in question: {0}")]
    Unanchorable(String),

    #[error("could not extract a primary argument from summary: {0}")]
    TupleExtraction(String),

    #[error("mutual information undefined for an empty contingency table")]
    UndefinedMutualInformation,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("scene {0} has no objects to align")]
    NoObjects(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("instance id {instance_id} outside vocabulary of size {size}")]
    InstanceOutOfVocabulary { instance_id: usize, size: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },

    #[error("missing predictions for {} question(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("infeasible generator settings: {0}")]
    InfeasibleSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
