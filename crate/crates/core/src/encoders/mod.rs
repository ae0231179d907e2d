//! Vocabularies and the two recurrent networks: transcription (`f`) over
//! tokens and prediction (`g`) over labels.

pub mod char_cnn;
pub mod config;
pub mod prediction;
pub mod transcription;
pub mod vocab;

pub use char_cnn::{char_cnn_encode, CharCnnIds};
pub use config::EncoderConfig;
pub use prediction::{prediction_forward, GState, PredictionIds, PredictionNet};
pub use transcription::{
    embed_tokens, transcription_backward, transcription_forward, TranscriptionIds,
    TranscriptionTape,
};
pub use vocab::{build_vocab, load_embeddings, EncodedSentence, Vocabulary};
