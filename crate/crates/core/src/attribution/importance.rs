use ndarray::{Array2, ArrayView2, Zip};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttributionError, Regressor};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Scored features (column indices), in the order they were given.
    pub features: Vec<usize>,
    /// Mean MSE increase under column shuffling, parallel to `features`.
    pub scores: Vec<f64>,
    pub baseline_mse: f64,
    pub n_shuffles: usize,
    /// Column indices by descending score; ties go to the lower index.
    pub ranking: Vec<usize>,
}

impl ImportanceReport {
    pub fn score(&self, feature: usize) -> Option<f64> {
        self.features.iter().position(|&f| f == feature).map(|i| self.scores[i])
    }

    pub fn top(&self) -> Option<usize> {
        self.ranking.first().copied()
    }
}

fn mse(y: &Array2<f64>, t: &ArrayView2<f64>) -> f64 {
    let mut s = 0.0;
    Zip::from(y).and(t).for_each(|&a, &b| s += (a - b) * (a - b));
    s / y.len() as f64
}

/// Indices of `items` ordered by descending `score`, ties by ascending index.
pub fn rank_descending(items: &[usize], scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(items[a].cmp(&items[b])));
    idx.into_iter().map(|i| items[i]).collect()
}

/// Permutation importance on a held-out set.
///
/// Each feature owns a random stream keyed by its column index, so scores do
/// not depend on which other features are in the set.
pub fn permutation_importance<M: Regressor + ?Sized>(
    model: &M,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    features: &[usize],
    n_shuffles: usize,
    seed: u64,
) -> Result<ImportanceReport, AttributionError> {
    let n = inputs.nrows();
    if n < 2 {
        return Err(AttributionError::Invalid(format!("permutation importance needs at least 2 rows, got {n}")));
    }
    if n_shuffles == 0 {
        return Err(AttributionError::Invalid("n_shuffles must be >= 1".into()));
    }
    if let Some(&f) = features.iter().find(|&&f| f >= inputs.ncols()) {
        return Err(AttributionError::Invalid(format!("feature {f} out of range")));
    }
    let baseline_mse = mse(&model.predict(inputs), &targets);
    let scores: Vec<f64> = features
        .par_iter()
        .map(|&f| {
            let mut rng = seed::rng(seed, &[stream::PERMUTATION, f as u64]);
            let original = inputs.column(f).to_owned();
            let mut x = inputs.to_owned();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut total = 0.0;
            for _ in 0..n_shuffles {
                perm.shuffle(&mut rng);
                for (r, &p) in perm.iter().enumerate() {
                    x[[r, f]] = original[p];
                }
                total += mse(&model.predict(x.view()), &targets);
            }
            total / n_shuffles as f64 - baseline_mse
        })
        .collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(AttributionError::Invalid("non-finite importance score".into()));
    }
    let ranking = rank_descending(features, &scores);
    Ok(ImportanceReport { features: features.to_vec(), scores, baseline_mse, n_shuffles, ranking })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpModel;
    use ndarray::Array2;
    use rand::Rng;

    fn uniform(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seed::rng(seed, &[0]);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn dead_input_scores_zero() {
        let mut m = MlpModel::init(&[4, 8, 2], 3).unwrap();
        m.layers[0].weights.column_mut(2).fill(0.0);
        let x = uniform(40, 4, 1);
        let t = uniform(40, 2, 2);
        let r = permutation_importance(&m, x.view(), t.view(), &[0, 1, 2, 3], 10, 7).unwrap();
        assert!(r.score(2).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn linear_model_matches_closed_form() {
        // y = 3 x0: a uniform row permutation gives E[(x_π(i) − x_i)²] averaged
        // over i equal to twice the population variance, so the expected MSE
        // increase is 2 · 9 · Var(x0)
        let n = 400;
        let x = uniform(n, 3, 5);
        let model = |x: ArrayView2<f64>| x.column(0).mapv(|v| 3.0 * v).insert_axis(ndarray::Axis(1));
        let t = model(x.view());
        let r = permutation_importance(&model, x.view(), t.view(), &[0, 1, 2], 200, 11).unwrap();
        let col = x.column(0);
        let mean = col.mean().unwrap();
        let pop_var = col.mapv(|v| (v - mean).powi(2)).mean().unwrap();
        let expected = 2.0 * 9.0 * pop_var;
        let got = r.score(0).unwrap();
        assert!((got - expected).abs() / expected < 0.03, "{got} vs {expected}");
        assert_eq!(r.score(1), Some(0.0));
        assert_eq!(r.score(2), Some(0.0));
        assert_eq!(r.ranking, vec![0, 1, 2]);
    }

    #[test]
    fn scores_do_not_depend_on_feature_subset() {
        let m = MlpModel::init(&[4, 8, 2], 3).unwrap();
        let x = uniform(30, 4, 1);
        let t = uniform(30, 2, 2);
        let all = permutation_importance(&m, x.view(), t.view(), &[0, 1, 2, 3], 5, 7).unwrap();
        let some = permutation_importance(&m, x.view(), t.view(), &[3, 1], 5, 7).unwrap();
        assert_eq!(all.score(1), some.score(1));
        assert_eq!(all.score(3), some.score(3));
    }

    #[test]
    fn rank_ties_by_index() {
        assert_eq!(rank_descending(&[4, 1, 7, 2], &[1.0, 2.0, 1.0, 2.0]), vec![1, 2, 4, 7]);
    }

    #[test]
    fn too_few_rows() {
        let m = MlpModel::init(&[2, 2], 3).unwrap();
        let x = uniform(1, 2, 1);
        assert!(permutation_importance(&m, x.view(), x.view(), &[0], 3, 1).is_err());
    }
}
