//! Closed-form ridge probes with an unpenalized intercept.
//!
//! The model is `ŷ = wᵀx + b`, fit by minimizing
//! `Σ (yᵢ − wᵀxᵢ − b)² + λ‖w‖²`. Centering features and targets by their
//! training means removes `b` from the penalty, leaving the normal equations
//! `(XcᵀXc + λI) w = Xcᵀyc` and `b = ȳ − wᵀx̄`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{train_test_split, JoinedDesign, SplitSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub feature_means: DVector<f64>,
    pub target_mean: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = x * &self.weights;
        out.add_scalar_mut(self.intercept);
        out
    }
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Fits ridge regression on rows of `x`.
///
/// The SPD system is solved in whichever of the primal (`d×d`) or dual
/// (`n×n`) forms is smaller; both give the same `w`, since
/// `(XcᵀXc + λI)⁻¹Xcᵀ = Xcᵀ(XcXcᵀ + λI)⁻¹`.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in ridge inputs".into()));
    }

    let feature_means = column_means(x);
    let target_mean = y.iter().sum::<f64>() / n as f64;
    let mut xc = x.clone();
    for (mut col, m) in xc.column_iter_mut().zip(feature_means.iter()) {
        col.add_scalar_mut(-m);
    }
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - target_mean));

    let weights = if d <= n {
        let mut gram = xc.tr_mul(&xc);
        for i in 0..d {
            gram[(i, i)] += lambda;
        }
        let rhs = xc.tr_mul(&yc);
        gram.cholesky()
            .ok_or_else(|| Error::Numerical("ridge system not positive definite".into()))?
            .solve(&rhs)
    } else {
        let mut kernel = &xc * xc.transpose();
        for i in 0..n {
            kernel[(i, i)] += lambda;
        }
        let alpha = kernel
            .cholesky()
            .ok_or_else(|| Error::Numerical("ridge system not positive definite".into()))?
            .solve(&yc);
        xc.tr_mul(&alpha)
    };
    let intercept = target_mean - weights.dot(&feature_means);
    Ok(RidgeModel {
        weights,
        intercept,
        lambda,
        feature_means,
        target_mean,
    })
}

/// `1 − SS_res / SS_tot` around the mean of `actual`; `None` when
/// `actual` has zero variance.
pub fn r2_score(actual: &[f64], predicted: &[f64]) -> Option<f64> {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return None;
    }
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum();
    Some(1.0 - ss_res / ss_tot)
}

pub fn mean_absolute_error(actual: &[f64], predicted: &[f64]) -> f64 {
    actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / actual.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `None` when the test targets have zero variance.
    pub r2: Option<f64>,
    pub mae: f64,
}

pub fn evaluate(model: &RidgeModel, x_test: &DMatrix<f64>, y_test: &[f64]) -> Result<Evaluation> {
    if y_test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    if x_test.nrows() != y_test.len() {
        return Err(Error::DimensionMismatch {
            expected: x_test.nrows(),
            got: y_test.len(),
        });
    }
    if x_test.ncols() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            got: x_test.ncols(),
        });
    }
    let pred = model.predict(x_test);
    Ok(Evaluation {
        r2: r2_score(y_test, pred.as_slice()),
        mae: mean_absolute_error(y_test, pred.as_slice()),
    })
}

/// `count` log-uniform values from `lo` to `hi`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && count >= 1) || (count == 1 && hi != lo) {
        return Err(Error::InvalidArgument(format!(
            "bad lambda grid lo={lo} hi={hi} count={count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let step = (b - a) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                10f64.powf(a + step * i as f64)
            }
        })
        .collect())
}

/// Eight values from 1e-2 to 1e3, exponent step 5/7.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-2, 1e3, 8).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: 5,
            lambda_grid: default_lambda_grid(),
            seed: 0,
        }
    }
}

impl CvSpec {
    pub fn with_seed(&self, seed: u64) -> CvSpec {
        CvSpec {
            seed,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::InvalidArgument("empty lambda grid".into()));
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite()))
            || self.lambda_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidArgument(
                "lambda grid must be positive and strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

/// Fold index of each of `n` rows: a seeded shuffle dealt round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        fold[row] = pos % folds;
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub lambda: f64,
    /// Mean validation MSE for each grid value, in grid order.
    pub mean_mse: Vec<f64>,
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows)
}

/// Picks the grid value with the smallest mean validation MSE; ties go to
/// the smallest λ.
pub fn cross_validate_lambda(x: &DMatrix<f64>, y: &[f64], spec: &CvSpec) -> Result<CvOutcome> {
    spec.validate()?;
    let n = x.nrows();
    if n < spec.folds {
        return Err(Error::TooFewRows {
            needed: spec.folds,
            got: n,
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let assignment = fold_assignment(n, spec.folds, spec.seed);
    let fold_data: Vec<_> = (0..spec.folds)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == f);
            (
                select_rows(x, &train),
                train.iter().map(|&i| y[i]).collect::<Vec<_>>(),
                select_rows(x, &val),
                val.iter().map(|&i| y[i]).collect::<Vec<_>>(),
            )
        })
        .collect();

    let mean_mse = spec
        .lambda_grid
        .par_iter()
        .map(|&lambda| -> Result<f64> {
            let mut total = 0.0;
            for (xt, yt, xv, yv) in &fold_data {
                let model = ridge_fit(xt, yt, lambda)?;
                let pred = model.predict(xv);
                let mse = yv
                    .iter()
                    .zip(pred.iter())
                    .map(|(a, p)| (a - p).powi(2))
                    .sum::<f64>()
                    / yv.len() as f64;
                total += mse;
            }
            Ok(total / spec.folds as f64)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, &mse) in mean_mse.iter().enumerate().skip(1) {
        if mse < mean_mse[best] {
            best = i;
        }
    }
    Ok(CvOutcome {
        lambda: spec.lambda_grid[best],
        mean_mse,
    })
}

/// Everything needed to reproduce and plot one held-out probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub target: String,
    pub lambda_chosen: f64,
    pub r2_test: f64,
    pub mae_test: f64,
    pub split: SplitSpec,
    pub cv_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub cv_mean_mse: Vec<f64>,
    pub test_names: Vec<String>,
    pub actual: Vec<f64>,
    pub predictions: Vec<f64>,
}

/// Split → CV on train → refit on all of train → score on test.
///
/// The split is drawn over every design row so all targets of a design
/// share it; rows missing this target are then dropped from each side.
pub fn probe_target(
    design: &JoinedDesign,
    target: &str,
    split: &SplitSpec,
    cv: &CvSpec,
) -> Result<ProbeResult> {
    let column = design.target(target)?;
    let present = column.iter().filter(|v| v.is_some()).count();
    if present < 10 {
        return Err(Error::TooFewRows {
            needed: 10,
            got: present,
        });
    }
    let parts = train_test_split(design.n(), split)?;
    let keep = |rows: &[usize]| -> Vec<usize> {
        rows.iter().copied().filter(|&i| column[i].is_some()).collect()
    };
    let (train, test) = (keep(&parts.train), keep(&parts.test));
    if test.is_empty() {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }
    let x_train = select_rows(&design.x, &train);
    let y_train: Vec<f64> = train.iter().map(|&i| column[i].unwrap_or_default()).collect();
    let x_test = select_rows(&design.x, &test);
    let y_test: Vec<f64> = test.iter().map(|&i| column[i].unwrap_or_default()).collect();

    let outcome = cross_validate_lambda(&x_train, &y_train, cv)?;
    let model = ridge_fit(&x_train, &y_train, outcome.lambda)?;
    let eval = evaluate(&model, &x_test, &y_test)?;
    let r2 = eval.r2.ok_or(Error::UndefinedR2)?;
    Ok(ProbeResult {
        target: target.to_string(),
        lambda_chosen: outcome.lambda,
        r2_test: r2,
        mae_test: eval.mae,
        split: *split,
        cv_seed: cv.seed,
        n_train: train.len(),
        n_test: test.len(),
        cv_mean_mse: outcome.mean_mse,
        test_names: test.iter().map(|&i| design.names[i].clone()).collect(),
        actual: y_test,
        predictions: model.predict(&x_test).iter().copied().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySweep {
    pub target: String,
    pub seeds: Vec<u64>,
    pub r2: Vec<f64>,
    pub mean_r2: f64,
    pub min_r2: f64,
    pub results: Vec<ProbeResult>,
}

/// Probes with split and fold seeds `first_seed, first_seed + 1, …`.
pub fn stability_sweep(
    design: &JoinedDesign,
    target: &str,
    first_seed: u64,
    test_fraction: f64,
    n_seeds: usize,
    cv: &CvSpec,
) -> Result<StabilitySweep> {
    if n_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| first_seed.wrapping_add(i)).collect();
    let results = seeds
        .par_iter()
        .map(|&s| probe_target(design, target, &SplitSpec::new(test_fraction, s), &cv.with_seed(s)))
        .collect::<Result<Vec<_>>>()?;
    let r2: Vec<f64> = results.iter().map(|r| r.r2_test).collect();
    let mean_r2 = r2.iter().sum::<f64>() / r2.len() as f64;
    let min_r2 = r2.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(StabilitySweep {
        target: target.to_string(),
        seeds,
        r2,
        mean_r2,
        min_r2,
        results,
    })
}
