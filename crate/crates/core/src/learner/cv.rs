use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{train_random_forest, ForestConfig};
use super::gbdt::{fingerprint, train_gbdt, TrainConfig};
use super::matrix::FeatureMatrix;
use super::metrics::auc;
use super::stats::TTest;
use crate::error::{Error, Result};

/// Assigns every instance to one of `k` folds such that all instances of a
/// group (question) share a fold.
///
/// Groups are shuffled with `seed`, stably ordered by their number of
/// positives (descending) and dealt to folds in snake order, which balances
/// group counts to within one and spreads positives evenly.
pub fn grouped_stratified_kfold(groups: &[i64], labels: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config("k must be at least 2".into()));
    }
    if groups.len() != labels.len() {
        return Err(Error::Dimension {
            expected: groups.len(),
            actual: labels.len(),
        });
    }
    let mut positives: BTreeMap<i64, usize> = BTreeMap::new();
    for (g, l) in groups.iter().zip(labels) {
        *positives.entry(*g).or_insert(0) += usize::from(*l == 1.0);
    }
    if positives.len() < k {
        return Err(Error::Config(format!(
            "{} groups cannot fill {k} folds",
            positives.len()
        )));
    }
    let mut order: Vec<(i64, usize)> = positives.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by(|a, b| b.1.cmp(&a.1));

    let mut fold_of: BTreeMap<i64, usize> = BTreeMap::new();
    for (i, (g, _)) in order.iter().enumerate() {
        let round = i / k;
        let pos = i % k;
        let fold = if round % 2 == 0 { pos } else { k - 1 - pos };
        fold_of.insert(*g, fold);
    }
    Ok(groups.iter().map(|g| fold_of[g]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Gbdt(TrainConfig),
    Rf(ForestConfig),
}

impl Classifier {
    pub fn name(&self) -> &'static str {
        match self {
            Classifier::Gbdt(_) => "gbdt",
            Classifier::Rf(_) => "rf",
        }
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    pub fn fit_predict(&self, train_x: &FeatureMatrix, train_y: &[f64], test_x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            Classifier::Gbdt(c) => train_gbdt(train_x, train_y, c)?.predict_matrix(test_x),
            Classifier::Rf(c) => train_random_forest(train_x, train_y, c)?.predict_matrix(test_x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classifier: String,
    pub feature_set: String,
    pub k: usize,
    pub fold_aucs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the fold AUCs.
    pub std: f64,
    pub config_fingerprint: String,
    pub t_test: Option<TTest>,
    pub baseline: Option<String>,
}

impl EvaluationReport {
    pub fn from_aucs(classifier: &Classifier, feature_set: &str, fold_aucs: Vec<f64>) -> Self {
        let k = fold_aucs.len();
        let mean = fold_aucs.iter().sum::<f64>() / k as f64;
        let std = if k > 1 {
            (fold_aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            classifier: classifier.name().into(),
            feature_set: feature_set.into(),
            k,
            fold_aucs,
            mean,
            std,
            config_fingerprint: classifier.fingerprint(),
            t_test: None,
            baseline: None,
        }
    }

    /// `fold,auc` rows followed by `mean`, `std` and, when present, the
    /// t-test rows `t`, `p_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,auc\n");
        for (i, a) in self.fold_aucs.iter().enumerate() {
            let _ = writeln!(out, "{i},{a:.6}");
        }
        let _ = writeln!(out, "mean,{:.6}", self.mean);
        let _ = writeln!(out, "std,{:.6}", self.std);
        if let Some(t) = &self.t_test {
            let _ = writeln!(out, "t,{:.6}", t.t);
            let _ = writeln!(out, "p_value,{:.6}", t.p_value);
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{} [{}] k={} config={}\n",
            self.feature_set, self.classifier, self.k, self.config_fingerprint
        );
        for (i, a) in self.fold_aucs.iter().enumerate() {
            let _ = writeln!(out, "  fold {i}: AUC {a:.4}");
        }
        let _ = writeln!(out, "  mean AUC {:.4} (sd {:.4})", self.mean, self.std);
        if let (Some(t), Some(b)) = (&self.t_test, &self.baseline) {
            let _ = writeln!(out, "  paired t-test vs {b}: t = {:.3}, p = {:.4}", t.t, t.p_value);
        }
        out
    }
}

/// k-fold cross-validation with precomputed fold assignments; folds run in parallel.
pub fn cross_validate_with_folds(
    x: &FeatureMatrix,
    y: &[f64],
    folds: &[usize],
    k: usize,
    classifier: &Classifier,
    feature_set: &str,
) -> Result<EvaluationReport> {
    if folds.len() != x.n_rows() || y.len() != x.n_rows() {
        return Err(Error::Dimension {
            expected: x.n_rows(),
            actual: folds.len().min(y.len()),
        });
    }
    let aucs: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..x.n_rows()).partition(|&i| folds[i] == fold);
            let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let test_y: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let scores = classifier.fit_predict(&x.take_rows(&train), &train_y, &x.take_rows(&test))?;
            auc(&scores, &test_y)
        })
        .collect::<Result<_>>()?;
    Ok(EvaluationReport::from_aucs(classifier, feature_set, aucs))
}

pub fn cross_validate(
    x: &FeatureMatrix,
    y: &[f64],
    groups: &[i64],
    classifier: &Classifier,
    k: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let folds = grouped_stratified_kfold(groups, y, k, seed)?;
    cross_validate_with_folds(x, y, &folds, k, classifier, "")
}
