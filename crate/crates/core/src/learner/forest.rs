use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::check_labels;
use super::matrix::FeatureMatrix;
use super::tree::{grow_tree, GrowParams, SplitParams, Tree};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    /// Features tried per node; `None` means `floor(sqrt(d))`.
    pub features_per_node: Option<usize>,
    pub bootstrap: bool,
    pub n_bins: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_leaves: 256,
            min_samples_leaf: 5,
            features_per_node: None,
            bootstrap: true,
            n_bins: 255,
            seed: 42,
        }
    }
}

/// Trees whose leaves hold the positive-class fraction of their
/// (bootstrap-weighted) training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Out-of-bag probability per training row; NaN if the row was in every bootstrap sample.
    #[serde(skip)]
    pub oob_predictions: Vec<f64>,
}

impl RandomForestModel {
    /// Mean of the trees' leaf class probabilities.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::Dimension {
                expected: self.feature_names.len(),
                actual: row.len(),
            });
        }
        Ok(self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        (0..x.n_rows()).map(|i| self.predict(&x.row(i))).collect()
    }
}

/// Random forest on the shared histogram grower.
///
/// With gradient `-w y` and hessian `w` (w = bootstrap multiplicity) and no
/// L2 term, the Newton gain is the weighted variance reduction of the
/// labels, i.e. the Gini decrease, and the leaf value is the positive rate.
pub fn train_random_forest(x: &FeatureMatrix, y: &[f64], config: &ForestConfig) -> Result<RandomForestModel> {
    if config.n_trees < 1 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateLabels("NaN label".into()));
    }
    check_labels(x, y)?;
    let n = x.n_rows();
    let d = x.n_cols();
    let binned = BinnedMatrix::new(x, config.n_bins);
    let mtry = config
        .features_per_node
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1));
    let params = GrowParams {
        split: SplitParams {
            lambda: 0.0,
            min_samples_leaf: config.min_samples_leaf,
            min_gain: 0.0,
            min_child_weight: 1e-9,
        },
        max_leaves: config.max_leaves,
        leaf_scale: 1.0,
        features_per_node: Some(mtry),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut oob_sum = vec![0.0; n];
    let mut oob_n = vec![0u32; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..config.n_trees {
        let mut counts = vec![0u32; n];
        if config.bootstrap {
            for _ in 0..n {
                counts[rng.gen_range(0..n)] += 1;
            }
        } else {
            counts.iter_mut().for_each(|c| *c = 1);
        }
        let rows: Vec<u32> = (0..n as u32).filter(|&i| counts[i as usize] > 0).collect();
        for i in 0..n {
            let w = f64::from(counts[i]);
            grad[i] = -w * y[i];
            hess[i] = w;
        }
        let grown = grow_tree(&binned, rows, &grad, &hess, &params, &mut rng);
        for i in (0..n).filter(|&i| counts[i] == 0) {
            oob_sum[i] += grown.tree.predict(&x.row(i));
            oob_n[i] += 1;
        }
        trees.push(grown.tree);
    }
    let oob_predictions = oob_sum
        .iter()
        .zip(&oob_n)
        .map(|(s, c)| if *c == 0 { f64::NAN } else { s / f64::from(*c) })
        .collect();
    Ok(RandomForestModel {
        config: config.clone(),
        feature_names: x.names().to_vec(),
        trees,
        oob_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::auc;

    fn data(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = vec![Vec::new(); 4];
        let mut y = Vec::new();
        for _ in 0..n {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = if v[0] + 0.5 * v[1] > 0.0 { 0.85 } else { 0.15 };
            y.push(f64::from(u8::from(rng.gen_bool(p))));
            for (c, x) in cols.iter_mut().zip(v) {
                c.push(x);
            }
        }
        (FeatureMatrix::new((0..4).map(|i| format!("f{i}")).collect(), cols).unwrap(), y)
    }

    #[test]
    fn leaves_hold_class_fractions() {
        let (x, y) = data(300, 1);
        let cfg = ForestConfig {
            n_trees: 30,
            ..Default::default()
        };
        let m = train_random_forest(&x, &y, &cfg).unwrap();
        let p = m.predict_matrix(&x).unwrap();
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        for t in &m.trees {
            for n in &t.nodes {
                if let super::super::tree::Node::Leaf { value } = n {
                    assert!((0.0..=1.0).contains(value));
                }
            }
        }
    }

    #[test]
    fn out_of_bag_estimate_is_honest() {
        let (x, y) = data(600, 2);
        let cfg = ForestConfig {
            n_trees: 60,
            ..Default::default()
        };
        let m = train_random_forest(&x, &y, &cfg).unwrap();
        // with 60 trees every row is out of bag in some tree
        assert!(m.oob_predictions.iter().all(|v| !v.is_nan()));
        let oob = auc(&m.oob_predictions, &y).unwrap();
        let train = auc(&m.predict_matrix(&x).unwrap(), &y).unwrap();
        // label noise caps the Bayes AUC well below 1; OOB sees it, training fit does not
        assert!(oob > 0.7 && oob < 0.9, "oob {oob}");
        assert!(train > oob);

        let (tx, ty) = data(600, 3);
        let held_out = auc(&m.predict_matrix(&tx).unwrap(), &ty).unwrap();
        assert!((oob - held_out).abs() < 0.06, "oob {oob} vs held out {held_out}");
    }

    #[test]
    fn seeded_and_validated() {
        let (x, y) = data(100, 4);
        let cfg = ForestConfig {
            n_trees: 5,
            ..Default::default()
        };
        // out-of-bag entries may be NaN, so compare the trees
        assert_eq!(
            train_random_forest(&x, &y, &cfg).unwrap().trees,
            train_random_forest(&x, &y, &cfg).unwrap().trees
        );
        let no_bootstrap = ForestConfig {
            bootstrap: false,
            ..cfg.clone()
        };
        assert!(train_random_forest(&x, &y, &no_bootstrap)
            .unwrap()
            .oob_predictions
            .iter()
            .all(|v| v.is_nan()));
        assert!(train_random_forest(&x, &y, &ForestConfig { n_trees: 0, ..cfg }).is_err());
    }
}
