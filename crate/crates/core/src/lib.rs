//! Best-answer prediction for Stack Exchange style question answering data.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`] parses dump XML into threads and labelled instances,
//! - [`shallow`], [`topic`], [`user`] and [`relation`] compute the feature groups,
//! - [`features`] assembles them into a group-tagged matrix,
//! - [`learner`] holds the boosted trees, random forest, AUC and cross-validation,
//! - [`selection`] runs greedy feature-group selection and renders reports,
//! - [`pipeline`] wires the stages together over a workspace directory.

pub mod corpus;
pub mod error;
pub mod features;
pub mod learner;
pub mod pipeline;
pub mod relation;
pub mod selection;
pub mod shallow;
pub mod text;
pub mod topic;
pub mod user;

pub use error::{Error, Result};
