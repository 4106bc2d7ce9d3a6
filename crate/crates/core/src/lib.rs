//! Noisy channel decoding for task-oriented dialogue.
//!
//! A turn is decoded in two stages: the belief state is decoded with a direct
//! model `p(B | C)`, then the act and response `(A, R)` are chosen by combining
//! the direct model `p(A, R | C, B)`, a channel model `p(C, B | A, R)`, a source
//! model `p(A, R)` and a length bonus. The [`decoding`] module implements direct
//! beam search, reranking of a direct n-best list and online decoding that
//! prunes with the combined score at every step.

pub mod corpus;
pub mod decoding;
pub mod metrics;
pub mod models;

pub use corpus::{TokenId, TokenSequence, Vocab};
