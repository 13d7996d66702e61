use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tree node. Children are indices into [`RegressionTree::nodes`]; a row
/// goes left when its value is `<= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Root first.
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Number of sorted samples going left.
    n_left: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    /// Grows a CART regression tree on `samples` (row indices, repeats
    /// allowed) by greedy variance reduction.
    pub(crate) fn grow<R: Rng>(
        x: &[Vec<f64>],
        y: &[f64],
        samples: Vec<usize>,
        params: GrowParams,
        rng: &mut R,
    ) -> Self {
        let mut tree = RegressionTree { nodes: Vec::new() };
        let n_features = x.first().map_or(0, Vec::len);
        let mut features: Vec<usize> = (0..n_features).collect();
        tree.grow_node(x, y, samples, 0, params, &mut features, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow_node<R: Rng>(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        mut samples: Vec<usize>,
        depth: usize,
        params: GrowParams,
        features: &mut [usize],
        rng: &mut R,
    ) -> usize {
        let id = self.nodes.len();
        let n = samples.len();
        let sum: f64 = samples.iter().map(|&i| y[i]).sum();
        let mean = sum / n as f64;
        self.nodes.push(Node::Leaf {
            value: mean,
            n_samples: n,
        });

        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        let constant = samples.iter().all(|&i| y[i] == y[samples[0]]);
        if !depth_ok || constant || n < 2 * params.min_leaf {
            return id;
        }
        let Some(split) = best_split(x, y, &mut samples, sum, params, features, rng) else {
            return id;
        };
        let right_samples = samples.split_off(split.n_left);
        let left = self.grow_node(x, y, samples, depth + 1, params, features, rng);
        let right = self.grow_node(x, y, right_samples, depth + 1, params, features, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Visits features in random order until `mtry` non-constant ones have been
/// scored, and returns the split with the largest reduction in squared
/// error. On success `samples` is left sorted by the chosen feature.
fn best_split<R: Rng>(
    x: &[Vec<f64>],
    y: &[f64],
    samples: &mut [usize],
    sum: f64,
    params: GrowParams,
    features: &mut [usize],
    rng: &mut R,
) -> Option<Split> {
    let n = samples.len();
    let parent = sum * sum / n as f64;
    let sst: f64 = samples.iter().map(|&i| y[i] * y[i]).sum::<f64>() - parent;
    let min_gain = 1e-12 * sst.max(f64::MIN_POSITIVE);
    features.shuffle(rng);

    let mut best: Option<(f64, Split)> = None;
    let mut visited = 0;
    let mut order = samples.to_vec();
    for &f in features.iter() {
        if visited == params.mtry {
            break;
        }
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let (lo, hi) = (x[order[0]][f], x[order[n - 1]][f]);
        if lo == hi {
            continue;
        }
        visited += 1;
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += y[order[k - 1]];
            let (a, b) = (x[order[k - 1]][f], x[order[k]][f]);
            if k < params.min_leaf || n - k < params.min_leaf || a == b {
                continue;
            }
            let right_sum = sum - left_sum;
            let score = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
            let gain = score - parent;
            if gain > min_gain && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((
                    gain,
                    Split {
                        feature: f,
                        threshold,
                        n_left: k,
                    },
                ));
            }
        }
    }
    let (_, split) = best?;
    samples.sort_by(|&a, &b| x[a][split.feature].total_cmp(&x[b][split.feature]));
    Some(split)
}
