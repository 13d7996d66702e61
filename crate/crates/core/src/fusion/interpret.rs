use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::forest::Forest;
use super::tree::Node;
use crate::{Error, Result};

fn mse(forest: &Forest, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &yi)| (forest.predict_row(r) - yi).powi(2))
        .sum();
    sse / y.len() as f64
}

/// Mean increase in squared error when one column is shuffled. Repeat `r`
/// of feature `f` shuffles with ChaCha stream `f * n_repeats + r`.
pub fn permutation_importance(
    forest: &Forest,
    x: &[Vec<f64>],
    y: &[f64],
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_repeats == 0 {
        return Err(Error::InvalidValue("n_repeats must be at least 1"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("importance data"));
    }
    forest.predict(&x[..1])?;
    let baseline = mse(forest, x, y);
    Ok((0..forest.n_features)
        .into_par_iter()
        .map(|f| {
            let mut shuffled = x.to_vec();
            let mut column: Vec<f64> = x.iter().map(|r| r[f]).collect();
            // differences first so an ignored column gives exactly zero
            let mut total = 0.0;
            for r in 0..n_repeats {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((f * n_repeats + r) as u64);
                column.shuffle(&mut rng);
                for (row, &v) in shuffled.iter_mut().zip(&column) {
                    row[f] = v;
                }
                total += mse(forest, &shuffled, y) - baseline;
            }
            total / n_repeats as f64
        })
        .collect())
}

fn oob_mse(forest: &Forest, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let (mut sse, mut n) = (0.0, 0usize);
    for (p, &yi) in forest.oob_predictions(x)?.into_iter().zip(y) {
        if let Some(p) = p {
            sse += (p - yi).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    Ok(sse / n as f64)
}

/// Permutation importance scored on out-of-bag predictions: each row is
/// predicted only by trees that did not draw it, before and after the
/// column is shuffled. `x` and `y` must be the training data. Same
/// seeding as [`permutation_importance`].
pub fn oob_permutation_importance(
    forest: &Forest,
    x: &[Vec<f64>],
    y: &[f64],
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_repeats == 0 {
        return Err(Error::InvalidValue("n_repeats must be at least 1"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if !forest.has_oob() {
        return Err(Error::InvalidValue("forest carries no out-of-bag bookkeeping"));
    }
    let baseline = oob_mse(forest, x, y)?;
    (0..forest.n_features)
        .into_par_iter()
        .map(|f| {
            let mut shuffled = x.to_vec();
            let mut column: Vec<f64> = x.iter().map(|r| r[f]).collect();
            let mut total = 0.0;
            for r in 0..n_repeats {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((f * n_repeats + r) as u64);
                column.shuffle(&mut rng);
                for (row, &v) in shuffled.iter_mut().zip(&column) {
                    row[f] = v;
                }
                total += oob_mse(forest, &shuffled, y)? - baseline;
            }
            Ok(total / n_repeats as f64)
        })
        .collect()
}

/// Share of internal nodes splitting on each feature, over the whole
/// forest. All zeros when no tree has a split.
pub fn split_frequency_importance(forest: &Forest) -> Vec<f64> {
    let mut counts = vec![0u64; forest.n_features];
    for tree in &forest.trees {
        for node in &tree.nodes {
            if let Node::Split { feature, .. } = node {
                counts[*feature] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; forest.n_features];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Mean prediction with column `feature` of every row set to each of
/// `grid_size` equally spaced values over the column's observed range.
/// A constant column yields a single point.
pub fn partial_dependence(
    forest: &Forest,
    x: &[Vec<f64>],
    feature: usize,
    grid_size: usize,
) -> Result<Vec<(f64, f64)>> {
    if grid_size < 2 {
        return Err(Error::InvalidValue("grid_size must be at least 2"));
    }
    if feature >= forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            found: feature + 1,
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("partial dependence data"));
    }
    forest.predict(&x[..1])?;
    let lo = x.iter().map(|r| r[feature]).fold(f64::INFINITY, f64::min);
    let hi = x.iter().map(|r| r[feature]).fold(f64::NEG_INFINITY, f64::max);
    let grid: Vec<f64> = if lo == hi {
        vec![lo]
    } else {
        (0..grid_size)
            .map(|k| {
                if k == grid_size - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (grid_size - 1) as f64
                }
            })
            .collect()
    };
    Ok(grid
        .into_par_iter()
        .map(|g| {
            let sum: f64 = x
                .iter()
                .map(|r| {
                    let mut row = r.clone();
                    row[feature] = g;
                    forest.predict_row(&row)
                })
                .sum();
            (g, sum / x.len() as f64)
        })
        .collect())
}
