//! Interpretable convolutional text classifier.
//!
//! The model embeds tokens, convolves every window of width `2..=l`, applies
//! ReLU, max-pools all n-gram features of all widths into one sentence
//! vector and scores categories with a linear layer. Every prediction can be
//! decomposed into a `tokens × categories` value matrix whose columns sum to
//! the bias-free scores (see [`explain`]), turned into a token pattern and
//! traced back to the training samples that exhibit it (see [`patterns`]).

pub mod corpus;
pub mod error;
pub mod explain;
pub mod model;
pub mod numerics;
pub mod patterns;
pub mod serialize;
pub mod trainer;

pub use corpus::{
    build_vocab, encode, load_dataset, split_sentences, tokenize, Dataset, DatasetFormat, EncodedSentence, LabeledText,
    TokenizerMode, Vocabulary,
};
pub use error::{IcnnError, Result};
pub use explain::{explain, explain_document, AttributionReport, DocumentAttribution, ReportRecord};
pub use model::{init_model, FeatureTrace, ModelConfig, ModelParams};
pub use numerics::{Matrix, Real};
pub use patterns::{build_index, extract_pattern, retrieve, Pattern, RetrievalResult, TrainingIndex};
pub use serialize::{decode_model, encode_model, load_model, save_model};
pub use trainer::{
    encode_document, evaluate, forward_document, sentence_weights, train, train_with, EpochRecord, Evaluation,
    TrainConfig, TrainMode, TrainOutcome,
};

/// A small hand-written question set in TREC format, used by the demo and
/// tests.
pub const TOY_QUESTIONS: &str = include_str!("../data/toy_questions.label");
