//! Region-based image retrieval: salient-region color signatures compared
//! with the Earth Mover's Distance and indexed by a clustered signature
//! graph.

pub mod config;
pub mod emd;
pub mod error;
pub mod eval;
pub mod features;
pub mod imaging;
pub mod pipeline;
pub mod sgraph;
pub mod signatures;
pub mod store;

pub use error::{Error, Result};
