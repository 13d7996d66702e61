use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{GrowParams, Node, RegressionTree};
use crate::{stats, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` means a third of the features, rounded up.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            n_trees: 500,
            max_depth: None,
            min_leaf: 2,
            mtry: None,
            bootstrap: true,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::Config("mtry must be at least 1".into()));
        }
        Ok(())
    }

    pub fn effective_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or(n_features.div_ceil(3)).clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    pub trees: Vec<RegressionTree>,
    /// Per tree, how often each training row was drawn. Not exported.
    #[serde(skip)]
    in_bag: Vec<Vec<u32>>,
}

impl Forest {
    /// Fits `hp.n_trees` trees. Tree `t` draws from its own ChaCha stream
    /// `(seed, t)`, so the result does not depend on thread scheduling.
    pub fn fit(x: &[Vec<f64>], y: &[f64], hp: &Hyperparameters, seed: u64) -> Result<Self> {
        hp.validate()?;
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::EmptyInput("forest training set"));
        }
        let n_features = x[0].len();
        if n_features == 0 {
            return Err(Error::EmptyInput("feature matrix has no columns"));
        }
        check_columns(x, n_features)?;
        if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite value in training data"));
        }
        let params = GrowParams {
            max_depth: hp.max_depth,
            min_leaf: hp.min_leaf,
            mtry: hp.effective_mtry(n_features),
        };
        let n = x.len();
        let grown: Vec<(RegressionTree, Vec<u32>)> = (0..hp.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let mut counts = vec![0u32; n];
                let samples: Vec<usize> = if hp.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                for &i in &samples {
                    counts[i] += 1;
                }
                (RegressionTree::grow(x, y, samples, params, &mut rng), counts)
            })
            .collect();
        let (trees, in_bag) = grown.into_iter().unzip();
        Ok(Forest {
            n_features,
            seed,
            hyperparameters: *hp,
            trees,
            in_bag,
        })
    }

    /// Forest from explicit trees, e.g. a parsed model dump.
    pub fn from_trees(n_features: usize, trees: Vec<RegressionTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::EmptyInput("forest has no trees"));
        }
        let f = Forest {
            n_features,
            seed: 0,
            hyperparameters: Hyperparameters {
                n_trees: trees.len(),
                ..Hyperparameters::default()
            },
            trees,
            in_bag: Vec::new(),
        };
        f.check_structure()?;
        Ok(f)
    }

    /// Split features in range, children in bounds and after their
    /// parent, leaf values finite.
    pub fn check_structure(&self) -> Result<()> {
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(Error::Invariant(format!("tree {t} has no nodes")));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match *node {
                    Node::Leaf { value, .. } if !value.is_finite() => {
                        return Err(Error::Invariant(format!("tree {t} node {i}: non-finite leaf")));
                    }
                    Node::Split {
                        feature, left, right, ..
                    } => {
                        let n = tree.nodes.len();
                        if feature >= self.n_features || left <= i || right <= i || left >= n || right >= n {
                            return Err(Error::Invariant(format!("tree {t} node {i}: malformed split")));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_columns(x, self.n_features)?;
        Ok(x.par_iter().map(|r| self.predict_row(r)).collect())
    }

    pub fn r_squared(&self, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        Ok(stats::r_squared(y, &self.predict(x)?))
    }

    /// Mean prediction over the trees that did not draw each row. `x` must
    /// be the training matrix. `None` for rows drawn by every tree, or for
    /// a forest without bootstrap bookkeeping.
    pub fn oob_predictions(&self, x: &[Vec<f64>]) -> Result<Vec<Option<f64>>> {
        check_columns(x, self.n_features)?;
        if self.in_bag.is_empty() {
            return Ok(vec![None; x.len()]);
        }
        if self.in_bag[0].len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.in_bag[0].len(),
                found: x.len(),
            });
        }
        Ok(x.par_iter()
            .enumerate()
            .map(|(i, row)| {
                let (mut sum, mut k) = (0.0, 0usize);
                for (tree, bag) in self.trees.iter().zip(&self.in_bag) {
                    if bag[i] == 0 {
                        sum += tree.predict_row(row);
                        k += 1;
                    }
                }
                (k > 0).then(|| sum / k as f64)
            })
            .collect())
    }

    /// Whether bootstrap bookkeeping is available for out-of-bag scoring.
    pub fn has_oob(&self) -> bool {
        !self.in_bag.is_empty()
    }

    /// R² over rows with at least one out-of-bag tree.
    pub fn oob_r_squared(&self, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
        let preds = self.oob_predictions(x)?;
        let (obs, pred): (Vec<f64>, Vec<f64>) = y.iter().zip(&preds).filter_map(|(&yi, p)| p.map(|p| (yi, p))).unzip();
        if obs.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                found: obs.len(),
            });
        }
        Ok(stats::r_squared(&obs, &pred))
    }

    pub fn to_json(&self, feature_names: &[String]) -> Result<String> {
        #[derive(Serialize)]
        struct Dump<'a> {
            feature_names: &'a [String],
            #[serde(flatten)]
            forest: &'a Forest,
        }
        Ok(serde_json::to_string_pretty(&Dump {
            feature_names,
            forest: self,
        })?)
    }
}

fn check_columns(x: &[Vec<f64>], n_features: usize) -> Result<()> {
    match x.iter().find(|r| r.len() != n_features) {
        Some(r) => Err(Error::DimensionMismatch {
            expected: n_features,
            found: r.len(),
        }),
        None => Ok(()),
    }
}
