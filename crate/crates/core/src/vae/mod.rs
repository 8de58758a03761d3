//! Character-level variational autoencoder: convolutional encoder, GRU
//! decoder fed with the previous character, teacher-forced training.

mod checkpoint;
mod model;
mod train;
mod vocab;

pub use checkpoint::{load, read_checkpoint, save, write_checkpoint, FORMAT_VERSION, MAGIC};
pub use model::{DecodeMode, Decoded, LatentDistribution, VaeConfig, VaeParams};
pub use train::{
    content_accuracy, decode_attempts, decode_to_valid, free_running_accuracy, reconstruction_accuracy, reencode_distances, train,
    valid_fraction, EpochMetrics, StepMetrics, TrainConfig, TrainOutcome, ValidDecode,
};
pub use vocab::{EncodedString, Vocabulary, MAX_VOCAB, PAD};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error)]
pub enum VaeError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: string of {len} characters exceeds {max}")]
    StringTooLong { line: usize, len: usize, max: usize },
    #[error("character {0:?} is not in the vocabulary")]
    UnknownCharacter(char),
    #[error("vocabulary of {0} characters exceeds the limit")]
    TooManyCharacters(usize),
    #[error("latent point has {got} entries, expected {expected}")]
    LatentDim { expected: usize, got: usize },
    #[error("loss became non-finite at step {step}")]
    DivergedLoss { step: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Encodes every string of `corpus` against `vocab`.
pub fn encode_corpus<S: AsRef<str>>(corpus: &[S], vocab: &Vocabulary, max_len: usize) -> Result<Vec<EncodedString>, VaeError> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vocab.encode(s.as_ref(), max_len).map_err(|e| match e {
                VaeError::StringTooLong { len, max, .. } => VaeError::StringTooLong { line: i + 1, len, max },
                other => other,
            })
        })
        .collect()
}
