//! Task augmentation by label clustering and first-order meta-learning for
//! low-resource utterance classification.
//!
//! The pipeline:
//!
//! 1. [`cluster`]: a classifier trained on the small target set labels a
//!    data-rich source corpus; each target label collects the `K` source
//!    labels most often mapped to it.
//! 2. [`tasks`]: picking one source label per subset gives an `M`-way
//!    "analogy task"; tasks are drawn uniformly or proportionally to size.
//! 3. [`meta`]: Reptile over analogy tasks (or one of the supervised
//!    baselines) produces an initialization that is then fine-tuned on the
//!    target data.
//! 4. [`harness`]: repeated sparse-data experiments, UAR, t-tests, reports.

pub mod cluster;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod meta;
pub mod model;
pub mod par;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
