//! Coordination detection in share (retweet) networks.
//!
//! The pipeline builds a filtered user-by-tweet incidence matrix, links each
//! user to its nearest neighbors by cosine similarity, scores those pairs
//! with the φ coefficient, and reads coordination candidates off the
//! φ-thresholded graph. Users are then placed in a latent sharing space
//! (truncated SVD of the double-centered incidence) and clustered with
//! HDBSCAN.

pub mod association;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod error;
pub mod graphml;
pub mod latent;
pub mod matrix;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod structure;
pub mod synth;
pub mod tables;

pub use error::{Error, ErrorKind, Result};
