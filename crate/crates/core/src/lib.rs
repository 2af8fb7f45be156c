//! Binary hate-speech detection pipelines for Roman Urdu and Urdu text.

pub mod adaboost;
pub mod cli;
pub mod bow;
pub mod cnn;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod par;
pub mod persist;
pub mod preprocess;
pub mod resample;
pub mod svm;
pub mod synthdata;

pub use error::{Error, Result};
