//! Segmentation correction for ASR output.
//!
//! ASR systems cut audio into utterances at acoustic pauses, which rarely
//! line up with the sentence-like units downstream translation and retrieval
//! systems expect. This crate builds proxy training data from subtitle
//! corpora, synthesizes noisy acoustic segmentations, trains a recurrent
//! boundary tagger, re-segments ASR documents with paired-window inference,
//! and scores segmentation and retrieval quality.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod noise;
pub mod resegment;
pub mod seed;
pub mod tagger;

pub use error::{Result, SegError};
