//! Training and prediction for 0-1 minimax risk classifiers with
//! constraint and column generation.

pub mod baseline;
pub mod bench;
pub mod ccg;
pub mod dataio;
pub mod error;
pub mod features;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod synth;

pub use error::{MrcError, Result};
