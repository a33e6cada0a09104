use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::binning::BinnedMatrix;
use super::check_labels;
use super::matrix::FeatureMatrix;
use super::tree::{grow_tree, GrowParams, Node, SplitParams, Tree};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    pub n_bins: usize,
    pub lambda: f64,
    pub seed: u64,
    pub positive_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_leaf: 20,
            min_gain: 0.0,
            n_bins: 255,
            lambda: 1.0,
            seed: 42,
            positive_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config("learning_rate must be in (0, 1]".into()));
        }
        if self.n_bins < 2 {
            return Err(Error::Config("n_bins must be at least 2".into()));
        }
        if self.max_leaves < 2 {
            return Err(Error::Config("max_leaves must be at least 2".into()));
        }
        if !(self.lambda >= 0.0 && self.min_gain >= 0.0 && self.positive_weight > 0.0) {
            return Err(Error::Config("lambda, min_gain must be >= 0 and positive_weight > 0".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the JSON config.
    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}

pub(crate) fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serialises");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss of raw score `f` for label `y`: `ln(1 + e^f) - y f`.
pub fn logistic_loss(f: f64, y: f64) -> f64 {
    let softplus = if f > 0.0 { f + (-f).exp().ln_1p() } else { f.exp().ln_1p() };
    softplus - y * f
}

/// First and second derivative of [`logistic_loss`] in `f`.
pub fn logistic_grad_hess(f: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(f);
    (p - y, p * (1.0 - p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Cumulative split gain per feature.
    pub gain_sum: Vec<f64>,
    pub split_count: Vec<u64>,
}

impl GbdtModel {
    pub const FORMAT: &'static str = "cqa-gbdt";

    pub fn raw_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::Dimension {
                expected: self.feature_names.len(),
                actual: row.len(),
            });
        }
        Ok(self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>())
    }

    /// Probability of the positive class.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        self.raw_score(row).map(sigmoid)
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.feature_names.len() {
            return Err(Error::Dimension {
                expected: self.feature_names.len(),
                actual: x.n_cols(),
            });
        }
        (0..x.n_rows()).map(|i| self.predict(&x.row(i))).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        if m.format != Self::FORMAT || m.version != 1 {
            return Err(Error::Format(format!("unsupported model {} v{}", m.format, m.version)));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

pub fn train_gbdt(x: &FeatureMatrix, y: &[f64], config: &TrainConfig) -> Result<GbdtModel> {
    train_gbdt_traced(x, y, config).map(|(m, _)| m)
}

/// Trains and also returns the mean weighted training loss after each tree
/// (entry 0 is the loss of the constant base score).
pub fn train_gbdt_traced(x: &FeatureMatrix, y: &[f64], config: &TrainConfig) -> Result<(GbdtModel, Vec<f64>)> {
    config.validate()?;
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateLabels("NaN label".into()));
    }
    check_labels(x, y)?;
    let n = x.n_rows();
    let weight: Vec<f64> = y
        .iter()
        .map(|&v| if v == 1.0 { config.positive_weight } else { 1.0 })
        .collect();
    let w_total: f64 = weight.iter().sum();
    let w_pos: f64 = y.iter().zip(&weight).filter(|(v, _)| **v == 1.0).map(|(_, w)| w).sum();
    let prior = w_pos / w_total;
    let base_score = (prior / (1.0 - prior)).ln();

    let binned = BinnedMatrix::new(x, config.n_bins);
    let params = GrowParams {
        split: SplitParams {
            lambda: config.lambda,
            min_samples_leaf: config.min_samples_leaf,
            min_gain: config.min_gain,
            min_child_weight: 1e-3,
        },
        max_leaves: config.max_leaves,
        leaf_scale: config.learning_rate,
        features_per_node: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut raw = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let d = x.n_cols();
    let mut gain_sum = vec![0.0; d];
    let mut split_count = vec![0u64; d];
    let mut trees = Vec::with_capacity(config.n_trees);
    let loss = |raw: &[f64]| -> f64 {
        raw.iter()
            .zip(y)
            .zip(&weight)
            .map(|((f, yv), w)| w * logistic_loss(*f, *yv))
            .sum::<f64>()
            / w_total
    };
    let mut trace = vec![loss(&raw)];

    for _ in 0..config.n_trees {
        for i in 0..n {
            let (g, h) = logistic_grad_hess(raw[i], y[i]);
            grad[i] = weight[i] * g;
            hess[i] = weight[i] * h;
        }
        let grown = grow_tree(&binned, (0..n as u32).collect(), &grad, &hess, &params, &mut rng);
        for (rows, value) in &grown.leaves {
            for &r in rows {
                raw[r as usize] += value;
            }
        }
        for node in &grown.tree.nodes {
            if let Node::Split { feature, gain, .. } = node {
                gain_sum[*feature] += gain;
                split_count[*feature] += 1;
            }
        }
        trees.push(grown.tree);
        trace.push(loss(&raw));
    }

    let model = GbdtModel {
        format: GbdtModel::FORMAT.into(),
        version: 1,
        config: config.clone(),
        feature_names: x.names().to_vec(),
        base_score,
        trees,
        gain_sum,
        split_count,
    };
    Ok((model, trace))
}

/// Average split gain per feature, largest first (ties by column order).
/// Features never used for a split have gain 0.
pub fn feature_importance(model: &GbdtModel) -> Vec<(String, f64)> {
    let mut out: Vec<(usize, f64)> = model
        .gain_sum
        .iter()
        .zip(&model.split_count)
        .map(|(g, c)| if *c == 0 { 0.0 } else { g / *c as f64 })
        .enumerate()
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out.into_iter()
        .map(|(i, g)| (model.feature_names[i].clone(), g))
        .collect()
}
