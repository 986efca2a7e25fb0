//! Bayes factors between indicator configurations by one-dimensional
//! quadrature over g, with two algebraically equivalent integrand routes
//! that are kept separate as a cross-check: one built from the copula
//! coefficient of determination, one from the copula log-kernel.

use crate::copula::{build_factor, GammaFactor, RegressionData};
use crate::error::{Error, Result};
use crate::priors::GPrior;
use crate::stats::logsumexp;
use nalgebra::DVector;

/// A Bayes-factor query between two indicator vectors.
#[derive(Debug, Clone)]
pub struct BfRequest {
    pub gamma_a: Vec<bool>,
    pub gamma_b: Vec<bool>,
    pub prior: GPrior,
    /// Quadrature node count on the log-g grid (composite Simpson; forced
    /// odd).
    pub nodes: usize,
}

impl BfRequest {
    pub fn new(gamma_a: Vec<bool>, gamma_b: Vec<bool>, prior: GPrior) -> Self {
        BfRequest {
            gamma_a,
            gamma_b,
            prior,
            nodes: 201,
        }
    }
}

/// Implicit-copula coefficient of determination:
/// 1 - v'(I - MM')v / v'v with v = S^{-1} z. Lies in [0, 1].
pub fn copula_r_squared(factor: &GammaFactor, g: f64, z: &DVector<f64>) -> Result<f64> {
    let vtv: f64 = z
        .iter()
        .zip(factor.t.iter())
        .map(|(&zi, &ti)| zi * zi * (1.0 + g * ti))
        .sum();
    if vtv <= 0.0 {
        return Err(Error::DegeneratePseudoData);
    }
    if factor.q == 0 {
        return Ok(0.0);
    }
    let proj = projection_norm2(factor, g, z);
    Ok((proj / vtv).clamp(0.0, 1.0))
}

/// ||M'v||^2 with v = S^{-1} z.
fn projection_norm2(factor: &GammaFactor, g: f64, z: &DVector<f64>) -> f64 {
    let v = DVector::from_iterator(
        z.len(),
        z.iter()
            .zip(factor.t.iter())
            .map(|(&zi, &ti)| zi * (1.0 + g * ti).sqrt()),
    );
    factor.m_matrix().tr_mul(&v).norm_squared()
}

/// Per-model log integrand expressed through the coefficient of
/// determination: log of the g-conditional marginal kernel
/// exp{-1/2 log|R| - 1/2 z'R^{-1}z} rewritten as
/// 1/2 sum log(1+g t_i) - q/2 log(1+g) - Q(g) (1 + g(1 - R2)) / (2(1+g))
/// with Q(g) = z'S^{-1}S^{-1}z.
fn log_integrand_r2(factor: &GammaFactor, g: f64, z: &DVector<f64>) -> f64 {
    let mut sum_log = 0.0;
    let mut qg = 0.0;
    for (&zi, &ti) in z.iter().zip(factor.t.iter()) {
        let si2 = 1.0 + g * ti;
        sum_log += si2.ln();
        qg += zi * zi * si2;
    }
    let r2 = if factor.q == 0 {
        0.0
    } else {
        (projection_norm2(factor, g, z) / qg).clamp(0.0, 1.0)
    };
    0.5 * sum_log - factor.q as f64 / 2.0 * g.ln_1p() - qg * (1.0 + g * (1.0 - r2)) / (2.0 * (1.0 + g))
}

/// log integral of exp(log_f(g)) p(g) dg by composite Simpson on the log-g
/// scale, adaptively widening the window until both endpoints contribute
/// less than 1e-12 of the peak.
pub fn log_integral_over_g<F>(prior: &GPrior, nodes: usize, log_f: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if let GPrior::Fixed { value } = prior {
        return Ok(log_f(*value));
    }
    let nodes = if nodes % 2 == 0 { nodes + 1 } else { nodes.max(3) };
    let (mut lo, mut hi) = (-10.0f64, 20.0f64);
    for _ in 0..12 {
        let h = (hi - lo) / (nodes - 1) as f64;
        let mut terms = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let t = lo + h * k as f64;
            let w = if k == 0 || k == nodes - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let g = t.exp();
            let lp = prior.log_density(g).unwrap_or(f64::NEG_INFINITY);
            terms.push(log_f(g) + lp + t + (w * h / 3.0).ln());
        }
        let total = logsumexp(&terms);
        if !total.is_finite() {
            return Err(Error::QuadratureFailed(format!(
                "non-finite quadrature on log-g window [{lo}, {hi}]"
            )));
        }
        let peak = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = peak - (1e12f64).ln();
        let (lo_bad, hi_bad) = (terms[0] > tol, terms[nodes - 1] > tol);
        if !lo_bad && !hi_bad {
            return Ok(total);
        }
        if lo_bad {
            lo -= 10.0;
        }
        if hi_bad {
            hi += 10.0;
        }
    }
    Err(Error::QuadratureFailed(
        "integrand did not decay within the widened log-g window".into(),
    ))
}

/// log BF(gamma_a | gamma_b) via the coefficient-of-determination integrand.
pub fn log_bayes_factor(data: &RegressionData, req: &BfRequest) -> Result<f64> {
    let fa = build_factor(data, &req.gamma_a)?;
    let fb = build_factor(data, &req.gamma_b)?;
    let la = log_integral_over_g(&req.prior, req.nodes, |g| log_integrand_r2(&fa, g, &data.z))?;
    let lb = log_integral_over_g(&req.prior, req.nodes, |g| log_integrand_r2(&fb, g, &data.z))?;
    Ok(la - lb)
}

/// log BF via the ratio of marginal likelihoods computed from the copula
/// log-kernel. Must agree with `log_bayes_factor` to quadrature precision.
pub fn log_bayes_factor_marginal_route(data: &RegressionData, req: &BfRequest) -> Result<f64> {
    let fa = build_factor(data, &req.gamma_a)?;
    let fb = build_factor(data, &req.gamma_b)?;
    let la = log_integral_over_g(&req.prior, req.nodes, |g| fa.log_kernel(g, &data.z))?;
    let lb = log_integral_over_g(&req.prior, req.nodes, |g| fb.log_kernel(g, &data.z))?;
    Ok(la - lb)
}

/// log marginal likelihood of one configuration against the empty-model
/// baseline prod phi(z_i) (whose kernel is constant in g).
pub fn log_marginal_vs_empty(data: &RegressionData, gamma: &[bool], prior: &GPrior, nodes: usize) -> Result<f64> {
    let f = build_factor(data, gamma)?;
    let lm = log_integral_over_g(prior, nodes, |g| f.log_kernel(g, &data.z))?;
    Ok(lm + 0.5 * data.z.dot(&data.z))
}
