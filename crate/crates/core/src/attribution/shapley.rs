use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttributionError, Regressor};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    /// `rows × features × outputs`.
    pub values: Array3<f64>,
    /// Standard error of each entry of `values`.
    pub std_err: Array3<f64>,
    /// Standard error of `Σ_features values` per `rows × outputs`.
    pub sum_std_err: Array2<f64>,
    /// `f(x)` per evaluation row.
    pub predictions: Array2<f64>,
    /// Mean model output over the background rows.
    pub base_value: Array1<f64>,
    pub n_permutations: usize,
}

impl ShapleyValues {
    /// `Σ_features φ − (f(x) − E f(z))` per `rows × outputs`.
    pub fn efficiency_residual(&self) -> Array2<f64> {
        let total = self.values.sum_axis(Axis(1));
        total - (&self.predictions - &self.base_value)
    }
}

/// Monte-Carlo permutation Shapley values.
///
/// For each evaluation row `x` and sampled ordering `π` paired with a
/// background row `z`, features switch from `z`'s value to `x`'s in the order
/// `π`; each switch's output change is that feature's marginal contribution.
/// Orderings are drawn in antithetic pairs (`π`, then `π` reversed) that share
/// a background row, and background rows are cycled through a seeded shuffle
/// so each is used equally often. When `n_permutations` is a multiple of
/// `2 · |background|`, `Σ φ = f(x) − mean f(z)` holds up to rounding.
///
/// Standard errors treat each antithetic pair as one sample.
pub fn shapley_values<M: Regressor + ?Sized>(
    model: &M,
    rows: ArrayView2<f64>,
    background: ArrayView2<f64>,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyValues, AttributionError> {
    let (n_rows, n_feat) = rows.dim();
    if background.nrows() == 0 {
        return Err(AttributionError::Invalid("background set is empty".into()));
    }
    if background.ncols() != n_feat {
        return Err(AttributionError::Invalid("background and evaluation rows differ in width".into()));
    }
    if n_permutations == 0 {
        return Err(AttributionError::Invalid("n_permutations must be >= 1".into()));
    }
    let predictions = model.predict(rows);
    let n_out = predictions.ncols();
    let base_value = model.predict(background).mean_axis(Axis(0)).expect("nonempty background");

    let per_row: Vec<(Array2<f64>, Array2<f64>, Array1<f64>)> = (0..n_rows)
        .into_par_iter()
        .map(|r| explain_row(model, rows.row(r).to_owned(), background, n_permutations, seed, r as u64, n_out))
        .collect();

    let mut values = Array3::zeros((n_rows, n_feat, n_out));
    let mut std_err = Array3::zeros((n_rows, n_feat, n_out));
    let mut sum_std_err = Array2::zeros((n_rows, n_out));
    for (r, (v, e, se)) in per_row.into_iter().enumerate() {
        values.slice_mut(s![r, .., ..]).assign(&v);
        std_err.slice_mut(s![r, .., ..]).assign(&e);
        sum_std_err.row_mut(r).assign(&se);
    }
    Ok(ShapleyValues { values, std_err, sum_std_err, predictions, base_value, n_permutations })
}

fn explain_row<M: Regressor + ?Sized>(
    model: &M,
    x: Array1<f64>,
    background: ArrayView2<f64>,
    n_permutations: usize,
    seed: u64,
    row: u64,
    n_out: usize,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let n_feat = x.len();
    let n_bg = background.nrows();
    let mut rng = seed::rng(seed, &[stream::SHAPLEY, row]);
    let mut bg_order: Vec<usize> = (0..n_bg).collect();
    let mut order: Vec<usize> = (0..n_feat).collect();

    // Per-pair contribution sums, used for the mean and its standard error.
    let n_units = n_permutations.div_ceil(2);
    let mut unit_contrib = Array3::<f64>::zeros((n_units, n_feat, n_out));
    let mut unit_size = vec![0usize; n_units];

    // Evaluate a chunk of orderings per model call to amortize overhead.
    const CHUNK: usize = 16;
    let mut k = 0;
    while k < n_permutations {
        let batch = CHUNK.min(n_permutations - k);
        let mut walks = Array2::<f64>::zeros((batch * (n_feat + 1), n_feat));
        let mut orders = Vec::with_capacity(batch);
        for b in 0..batch {
            let kk = k + b;
            let pair = kk / 2;
            if kk % 2 == 0 {
                if pair % n_bg == 0 {
                    bg_order.shuffle(&mut rng);
                }
                order.shuffle(&mut rng);
            } else {
                order.reverse();
            }
            let z = background.row(bg_order[pair % n_bg]);
            let base = b * (n_feat + 1);
            walks.row_mut(base).assign(&z);
            for (step, &f) in order.iter().enumerate() {
                let (prev, mut next) = walks.multi_slice_mut((s![base + step, ..], s![base + step + 1, ..]));
                next.assign(&prev);
                next[f] = x[f];
            }
            orders.push(order.clone());
        }
        let out = model.predict(walks.view());
        for (b, ord) in orders.iter().enumerate() {
            let unit = (k + b) / 2;
            let base = b * (n_feat + 1);
            unit_size[unit] += 1;
            for (step, &f) in ord.iter().enumerate() {
                for o in 0..n_out {
                    unit_contrib[[unit, f, o]] += out[[base + step + 1, o]] - out[[base + step, o]];
                }
            }
        }
        k += batch;
    }

    // Each unit's mean contribution; the estimate is the permutation-weighted mean.
    let weights: Array1<f64> = unit_size.iter().map(|&w| w as f64).collect();
    let mut unit_mean = unit_contrib.clone();
    for (u, &w) in weights.iter().enumerate() {
        unit_mean.slice_mut(s![u, .., ..]).mapv_inplace(|v| v / w);
    }
    let values = unit_contrib.sum_axis(Axis(0)) / n_permutations as f64;
    let std_err = if n_units > 1 {
        let dev = &unit_mean - &values.view().insert_axis(Axis(0));
        (dev.mapv(|d| d * d).sum_axis(Axis(0)) / ((n_units - 1) * n_units) as f64).mapv(f64::sqrt)
    } else {
        Array2::zeros((n_feat, n_out))
    };
    let sum_std_err = if n_units > 1 {
        let totals = unit_mean.sum_axis(Axis(1));
        let mean = values.sum_axis(Axis(0));
        let dev = &totals - &mean.view().insert_axis(Axis(0));
        (dev.mapv(|d| d * d).sum_axis(Axis(0)) / ((n_units - 1) * n_units) as f64).mapv(f64::sqrt)
    } else {
        Array1::zeros(n_out)
    };
    (values, std_err, sum_std_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn linear(w: Vec<f64>) -> impl Fn(ArrayView2<f64>) -> Array2<f64> + Sync {
        move |x: ArrayView2<f64>| x.dot(&Array1::from(w.clone())).insert_axis(Axis(1))
    }

    #[test]
    fn linear_single_background_is_exact() {
        let w = vec![1.5, -2.0, 0.25, 4.0];
        let model = linear(w.clone());
        let x = array![[0.3, 1.0, -2.0, 0.5], [1.0, 1.0, 1.0, 1.0]];
        let z = array![[0.1, -0.4, 0.0, 2.0]];
        for n in [1, 3, 10] {
            let phi = shapley_values(&model, x.view(), z.view(), n, 5).unwrap();
            for r in 0..2 {
                for i in 0..4 {
                    let exact = w[i] * (x[[r, i]] - z[[0, i]]);
                    assert!((phi.values[[r, i, 0]] - exact).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn efficiency_exact_with_balanced_background() {
        let mut rng = seed::rng(1, &[0]);
        let x = Array2::from_shape_simple_fn((3, 5), || rng.random_range(-1.0..1.0));
        let bg = Array2::from_shape_simple_fn((4, 5), || rng.random_range(-1.0..1.0));
        let model = |x: ArrayView2<f64>| {
            let mut y = Array2::zeros((x.nrows(), 2));
            for (mut o, r) in y.rows_mut().into_iter().zip(x.rows()) {
                o[0] = (r[0] * r[1]).tanh() + r[2].powi(2);
                o[1] = r[3].max(r[4]) - r[0];
            }
            y
        };
        let phi = shapley_values(&model, x.view(), bg.view(), 24, 2).unwrap();
        assert!(phi.efficiency_residual().iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn symmetric_features_get_equal_values() {
        // features 0 and 1 enter symmetrically and take identical values
        let model = |x: ArrayView2<f64>| x.map_axis(Axis(1), |r| (r[0] + r[1]).powi(2) + r[2]).insert_axis(Axis(1));
        let x = array![[1.0, 1.0, 0.5]];
        let z = array![[0.0, 0.0, 0.0], [-0.5, -0.5, 1.0]];
        let phi = shapley_values(&model, x.view(), z.view(), 400, 3).unwrap();
        let (a, b) = (phi.values[[0, 0, 0]], phi.values[[0, 1, 0]]);
        let tol = 3.0 * (phi.std_err[[0, 0, 0]] + phi.std_err[[0, 1, 0]]) + 1e-12;
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn deterministic() {
        let model = linear(vec![1.0, 2.0]);
        let x = array![[1.0, 2.0]];
        let z = array![[0.0, 1.0], [3.0, 3.0]];
        assert_eq!(
            shapley_values(&model, x.view(), z.view(), 8, 4).unwrap(),
            shapley_values(&model, x.view(), z.view(), 8, 4).unwrap()
        );
    }

    #[test]
    fn rejects_empty_background() {
        let model = linear(vec![1.0]);
        let x = array![[1.0]];
        let z = Array2::<f64>::zeros((0, 1));
        assert!(shapley_values(&model, x.view(), z.view(), 4, 0).is_err());
    }
}
