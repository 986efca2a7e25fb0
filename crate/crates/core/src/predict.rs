//! Predictive inference: the mixture predictive density over Monte Carlo
//! draws, the regression-function estimate via Gauss-Hermite quadrature on
//! the margin quantile, and ten-fold cross-validated mean log scores.

use crate::copula::{build_factor, RegressionData};
use crate::error::{Error, Result};
use crate::margins::{fit_margin, MarginKind, MarginModel};
use crate::priors::GPrior;
use crate::sampler::{run_chain, SamplerConfig, Trace};
use crate::stats::{self, logsumexp, norm_cdf, norm_log_pdf};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rayon::prelude::*;
use std::collections::HashMap;

/// Predictive standard-deviation factor for a new covariate vector:
/// s = (1 + g x'(X_g'X_g)^{-1} x)^{-1/2}.
pub fn predictive_scale(factor: &crate::copula::GammaFactor, g: f64, x_new: &DVector<f64>) -> f64 {
    (1.0 + g * factor.leverage_for(x_new)).powf(-0.5)
}

/// Per-draw predictive location/scale pairs for one covariate vector:
/// mu_k = s_k x' beta_hat_k and s_k, grouped by configuration so each
/// distinct gamma is factorized once.
#[derive(Debug, Clone)]
pub struct PredictiveMixture {
    pub s: Vec<f64>,
    pub mu: Vec<f64>,
}

pub fn predictive_mixture(
    trace: &Trace,
    data: &RegressionData,
    x_new: &DVector<f64>,
) -> Result<PredictiveMixture> {
    let post = trace.post_burnin();
    if post.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut groups: HashMap<&[bool], Vec<usize>> = HashMap::new();
    for (k, rec) in post.iter().enumerate() {
        groups.entry(rec.gamma.as_slice()).or_default().push(k);
    }
    let mut s = vec![0.0; post.len()];
    let mut mu = vec![0.0; post.len()];
    for (gamma, idxs) in groups {
        let factor = build_factor(data, gamma)?;
        for &k in &idxs {
            let g = post[k].g;
            let sk = predictive_scale(&factor, g, x_new);
            s[k] = sk;
            mu[k] = sk * factor.linear_predictor(g, &data.z, x_new);
        }
    }
    Ok(PredictiveMixture { s, mu })
}

impl PredictiveMixture {
    /// log of the mixture density of the pseudo-datum z.
    fn log_density_z(&self, z: f64) -> f64 {
        let terms: Vec<f64> = self
            .s
            .iter()
            .zip(self.mu.iter())
            .map(|(&s, &mu)| norm_log_pdf((z - mu) / s) - s.ln())
            .collect();
        logsumexp(&terms) - (self.s.len() as f64).ln()
    }
}

/// Predictive density of y given the training data, evaluated on a grid:
/// p(y) = p_Y(y)/phi(z) * (1/K) sum_k phi((z - mu_k)/s_k)/s_k with
/// z = Phi^{-1}(F_Y(y)).
pub fn predictive_density(
    trace: &Trace,
    data: &RegressionData,
    margin: &MarginModel,
    x_new: &DVector<f64>,
    y_grid: &[f64],
) -> Result<Vec<f64>> {
    let mix = predictive_mixture(trace, data, x_new)?;
    Ok(y_grid
        .iter()
        .map(|&y| {
            let z = margin.pit(y);
            (margin.log_density(y) - norm_log_pdf(z) + mix.log_density_z(z)).exp()
        })
        .collect())
}

/// Log predictive density at a single response value.
pub fn log_predictive_density_at(
    mix: &PredictiveMixture,
    margin: &MarginModel,
    y: f64,
) -> f64 {
    let z = margin.pit(y);
    margin.log_density(y) - norm_log_pdf(z) + mix.log_density_z(z)
}

/// Predictive mean (the regression-function estimate): for each draw the
/// conditional mean of Y = F^{-1}(Phi(Z)), Z ~ N(mu_k, s_k^2), integrated by
/// a 20-node Gauss-Hermite rule, then averaged over draws.
pub fn predictive_mean(
    trace: &Trace,
    data: &RegressionData,
    margin: &MarginModel,
    x_new: &DVector<f64>,
) -> Result<f64> {
    let mix = predictive_mixture(trace, data, x_new)?;
    let (nodes, weights) = stats::gauss_hermite(20);
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut total = 0.0;
    for (&s, &mu) in mix.s.iter().zip(mix.mu.iter()) {
        for (&xi, &w) in nodes.iter().zip(weights.iter()) {
            total += w * margin.quantile(norm_cdf(mu + s * sqrt2 * xi));
        }
    }
    Ok(total / mix.s.len() as f64)
}

/// How the margin is estimated inside cross-validation. `Gaussian` is the
/// linear-model baseline: the same engine with the margin fixed to
/// Normal(mean(y), sd(y)) of the training fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginSpec {
    Kind(MarginKind),
}

impl MarginSpec {
    pub fn fit(&self, train_y: &[f64]) -> Result<MarginModel> {
        match self {
            MarginSpec::Kind(kind) => fit_margin(train_y, *kind),
        }
    }
}

/// Ten-fold (by default) cross-validated mean logarithmic score: rows are
/// shuffled once with the config seed, split into near-equal folds, the
/// margin and chain are refit on each training complement, and the held-out
/// log predictive densities are averaged fold-wise then across folds.
pub fn cv_mean_log_score(
    y: &[f64],
    x: &DMatrix<f64>,
    margin: MarginSpec,
    prior: &GPrior,
    config: &SamplerConfig,
    folds: usize,
) -> Result<f64> {
    let n = y.len();
    if folds < 2 || n < folds {
        return Err(Error::InvalidInput(format!(
            "need 2 <= folds <= n, got folds {folds}, n {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(config.seed ^ 0x5f5f_f01d);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); folds];
    for (pos, &row) in order.iter().enumerate() {
        blocks[pos % folds].push(row);
    }
    if blocks.iter().any(|b| b.len() < 2) {
        return Err(Error::InvalidInput("a fold has fewer than 2 points".into()));
    }

    let fold_scores: Vec<Result<f64>> = blocks
        .par_iter()
        .enumerate()
        .map(|(k, test_rows)| fold_score(y, x, &margin, prior, config, k, test_rows))
        .collect();
    let mut total = 0.0;
    for s in fold_scores {
        total += s?;
    }
    Ok(total / folds as f64)
}

fn fold_score(
    y: &[f64],
    x: &DMatrix<f64>,
    margin: &MarginSpec,
    prior: &GPrior,
    config: &SamplerConfig,
    fold: usize,
    test_rows: &[usize],
) -> Result<f64> {
    let n = y.len();
    let in_test = {
        let mut mask = vec![false; n];
        for &r in test_rows {
            mask[r] = true;
        }
        mask
    };
    let train_rows: Vec<usize> = (0..n).filter(|&r| !in_test[r]).collect();
    let train_y: Vec<f64> = train_rows.iter().map(|&r| y[r]).collect();
    let train_x = DMatrix::from_fn(train_rows.len(), x.ncols(), |i, j| x[(train_rows[i], j)]);

    let margin_model = margin.fit(&train_y)?;
    let data = RegressionData::new(train_y, train_x, &margin_model)?;
    let mut fold_config = config.clone();
    fold_config.seed = config.seed.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ fold as u64;
    let trace = run_chain(&data, prior, &fold_config)?;

    let mut total = 0.0;
    for &r in test_rows {
        // shift the held-out covariates by the training column means
        let x_new = DVector::from_iterator(
            x.ncols(),
            (0..x.ncols()).map(|j| x[(r, j)] - data.offsets[j]),
        );
        let mix = predictive_mixture(&trace, &data, &x_new)?;
        total += log_predictive_density_at(&mix, &margin_model, y[r]);
    }
    Ok(total / test_rows.len() as f64)
}
