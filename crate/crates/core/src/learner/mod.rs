//! From-scratch tree learners and the evaluation protocol.
//!
//! Both the boosted ensemble and the random forest grow trees with the same
//! histogram-based, best-first grower in [`tree`]. Missing values are NaN
//! and are routed per split to whichever side gives the larger gain.

mod binning;
mod cv;
mod forest;
mod gbdt;
mod matrix;
mod metrics;
mod stats;
pub mod tree;

pub use binning::BinnedMatrix;
pub use cv::{
    cross_validate, cross_validate_with_folds, grouped_stratified_kfold, Classifier,
    EvaluationReport,
};
pub use forest::{train_random_forest, ForestConfig, RandomForestModel};
pub use gbdt::{
    feature_importance, logistic_grad_hess, logistic_loss, sigmoid, train_gbdt, train_gbdt_traced,
    GbdtModel, TrainConfig,
};
pub(crate) use gbdt::fingerprint;
pub use matrix::FeatureMatrix;
pub use metrics::auc;
pub use stats::{paired_t_test, TTest};

use crate::error::{Error, Result};

/// Checks that labels are 0/1, match the row count and contain both classes.
pub(crate) fn check_labels(x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    if y.len() != x.n_rows() {
        return Err(Error::Dimension {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|v| !(**v == 0.0 || **v == 1.0)) {
        return Err(Error::DegenerateLabels(format!("label {bad} is not 0 or 1")));
    }
    let pos = y.iter().filter(|v| **v == 1.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels("only one class present".into()));
    }
    Ok(())
}
