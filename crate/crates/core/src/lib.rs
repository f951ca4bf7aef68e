//! Joint evaluation of probabilistic reliability (calibration) and
//! decision-rule reliability (shortcut reliance) for multiple-choice QA
//! models before and after machine unlearning.
//!
//! The crate trains a tiny embedding-based scorer on a synthetic
//! fictitious-author corpus, derives full, retained and unlearned model
//! states, and reports ECE, MCE, Brier, reliability diagrams, and the
//! shortcut metrics obtained by intersecting Integrated-Gradients top tokens
//! with high-LMI words.

pub mod attribution;
pub mod calibration;
pub mod corpus;
pub mod error;
pub mod micromodel;
pub mod pipeline;
pub mod shortcut;
pub mod unlearn;

pub use error::{Error, ErrorKind, Result};
