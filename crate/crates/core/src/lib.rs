//! Tokenizer-free text encoding.
//!
//! Words are split out of raw text ([`splitter`]), cut into byte trigrams
//! and hashed onto a sparse set of embedding rows ([`trigram`]). A word's
//! embedding is the sum of its rows ([`embed`]). Prediction targets are the
//! same sparse patterns, trained with a multi-label BCE ([`objective`]) and
//! decoded against a compiled dictionary of candidate words ([`head`]).
//! [`analysis`] holds tokenizer diagnostics.

pub mod analysis;
mod binio;
pub mod embed;
pub mod error;
pub mod hash;
pub mod head;
pub mod matrix;
pub mod objective;
pub mod splitter;
pub mod trigram;

pub use analysis::{
    coverage_stats, duplicates, fertility, CoverageReport, Document, DuplicateReport,
    FertilityReport, TokenCounter,
};
pub use embed::EmbeddingMatrix;
pub use error::{Error, Result};
pub use head::{greedy_generate, DecodeResult, Dictionary, LogitModel, END_OF_TEXT};
pub use matrix::Matrix;
pub use objective::{ml_bce, ml_bce_grad, toy_train, LossValue, ToyHyper, ToyModel};
pub use splitter::{join, split, SplitConfig, Token, Whitespace};
pub use trigram::{pattern, trigrams, SparsePattern, TFreeConfig, Trigram};
