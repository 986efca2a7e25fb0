//! Correlation structure of the selection copula through low-rank factors.
//!
//! For an indicator vector gamma with q active columns, the n x n correlation
//! matrix R = S (I + g X_g (X_g'X_g)^{-1} X_g') S is never formed. All
//! quantities flow through the orthonormal-column matrix M = X_g U^{-1}
//! (U'U = X_g'X_g upper-triangular Cholesky) and the leverage terms
//! t_i = sum_j M[i,j]^2:
//!
//! ```text
//! log|R|    = q log(1+g) - sum_i log(1 + g t_i)
//! z'R^{-1}z = v'v - g/(1+g) ||M'v||^2,   v_i = z_i (1 + g t_i)^{1/2}
//! ```
//!
//! because R^{-1} = S^{-1}(I - g/(1+g) M M')S^{-1} and
//! det(I + g M M') = (1+g)^q. Every operation costs O(nq).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Response, centered design and PIT pseudo-data for one regression problem.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub z: DVector<f64>,
    /// Column means removed during ingestion.
    pub offsets: DVector<f64>,
}

impl RegressionData {
    /// Center the design columns and attach precomputed pseudo-data.
    pub fn from_parts(y: Vec<f64>, x: DMatrix<f64>, z: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || z.len() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: y has {n} rows, X has {}, z has {}",
                x.nrows(),
                z.len()
            )));
        }
        if y.iter().chain(z.iter()).any(|v| !v.is_finite())
            || x.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("non-finite value in regression data".into()));
        }
        let mut x = x;
        let mut offsets = DVector::zeros(x.ncols());
        for j in 0..x.ncols() {
            let mean = x.column(j).sum() / n as f64;
            offsets[j] = mean;
            for i in 0..n {
                x[(i, j)] -= mean;
            }
            if x.column(j).amax() == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "column {} of X is constant",
                    j + 1
                )));
            }
            debug_assert!(x.column(j).sum().abs() / (n as f64) < 1e-8);
        }
        Ok(RegressionData {
            y: DVector::from_vec(y),
            x,
            z: DVector::from_vec(z),
            offsets,
        })
    }

    /// Center the design and derive pseudo-data from a fitted margin.
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, margin: &crate::margins::MarginModel) -> Result<Self> {
        let z = margin.pit_transform(&y);
        Self::from_parts(y, x, z)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Cached factorization for one indicator configuration.
#[derive(Debug, Clone)]
pub struct GammaFactor {
    pub gamma: Vec<bool>,
    pub q: usize,
    /// Lower Cholesky factor L with L L' = X_g'X_g (so U = L').
    chol_l: DMatrix<f64>,
    /// M = X_g U^{-1}, orthonormal columns.
    m: DMatrix<f64>,
    /// Leverage terms t_i = sum_j M[i,j]^2.
    pub t: DVector<f64>,
    /// Column indices with gamma_j = 1.
    active: Vec<usize>,
}

/// Build the factor for a configuration; q = 0 yields the empty factor.
pub fn build_factor(data: &RegressionData, gamma: &[bool]) -> Result<GammaFactor> {
    assert_eq!(gamma.len(), data.p());
    let n = data.n();
    let active: Vec<usize> = (0..gamma.len()).filter(|&j| gamma[j]).collect();
    let q = active.len();
    if q == 0 {
        return Ok(GammaFactor {
            gamma: gamma.to_vec(),
            q: 0,
            chol_l: DMatrix::zeros(0, 0),
            m: DMatrix::zeros(n, 0),
            t: DVector::zeros(n),
            active,
        });
    }
    let xg = data.x.select_columns(&active);
    let xtx = xg.tr_mul(&xg);
    let chol = nalgebra::Cholesky::new(xtx).ok_or(Error::SingularSubmatrix)?;
    let l = chol.l();
    // M' = L^{-1} X_g'
    let mut mt = xg.transpose();
    l.solve_lower_triangular_mut(&mut mt);
    let m = mt.transpose();
    let t = DVector::from_iterator(n, m.row_iter().map(|r| r.norm_squared()));
    Ok(GammaFactor {
        gamma: gamma.to_vec(),
        q,
        chol_l: l,
        m,
        t,
        active,
    })
}

impl GammaFactor {
    /// s_i = (1 + g t_i)^{-1/2}.
    pub fn scale_factors(&self, g: f64) -> DVector<f64> {
        assert!(g >= 0.0);
        self.t.map(|t| (1.0 + g * t).powf(-0.5))
    }

    /// log phi(z; 0, R) + (n/2) log(2 pi), i.e. -0.5 log|R| - 0.5 z'R^{-1}z.
    pub fn log_kernel(&self, g: f64, z: &DVector<f64>) -> f64 {
        if self.q == 0 || g == 0.0 {
            return -0.5 * z.dot(z);
        }
        let mut log_det = self.q as f64 * g.ln_1p();
        let mut vtv = 0.0;
        let v = DVector::from_iterator(
            z.len(),
            z.iter().zip(self.t.iter()).map(|(&zi, &ti)| {
                let si2 = 1.0 + g * ti;
                log_det -= si2.ln();
                let vi = zi * si2.sqrt();
                vtv += vi * vi;
                vi
            }),
        );
        let w = self.m.tr_mul(&v);
        let quad = vtv - g / (1.0 + g) * w.norm_squared();
        -0.5 * (log_det + quad)
    }

    /// d/dg of `log_kernel` at fixed gamma and z.
    pub fn log_kernel_dg(&self, g: f64, z: &DVector<f64>) -> f64 {
        if self.q == 0 {
            return 0.0;
        }
        let n = z.len();
        let mut dlogdet = self.q as f64 / (1.0 + g);
        let mut dvtv = 0.0;
        let mut v = DVector::zeros(n);
        let mut dv = DVector::zeros(n);
        for i in 0..n {
            let ti = self.t[i];
            let si2 = 1.0 + g * ti;
            dlogdet -= ti / si2;
            v[i] = z[i] * si2.sqrt();
            dv[i] = 0.5 * z[i] * ti / si2.sqrt();
            dvtv += z[i] * z[i] * ti;
        }
        let w = self.m.tr_mul(&v);
        let dw = self.m.tr_mul(&dv);
        let wn2 = w.norm_squared();
        let dquad = dvtv - wn2 / ((1.0 + g) * (1.0 + g)) - 2.0 * g / (1.0 + g) * w.dot(&dw);
        -0.5 * (dlogdet + dquad)
    }

    /// Posterior mean of the active coefficients,
    /// beta_hat = g/(1+g) (X_g'X_g)^{-1} X_g' S^{-1} z.
    pub fn posterior_mean_beta(&self, g: f64, z: &DVector<f64>) -> DVector<f64> {
        if self.q == 0 {
            return DVector::zeros(0);
        }
        let v = DVector::from_iterator(
            z.len(),
            z.iter()
                .zip(self.t.iter())
                .map(|(&zi, &ti)| zi * (1.0 + g * ti).sqrt()),
        );
        let w = self.m.tr_mul(&v);
        let mut beta = w;
        self.chol_l
            .transpose()
            .solve_upper_triangular_mut(&mut beta);
        beta * (g / (1.0 + g))
    }

    /// x'(X_g'X_g)^{-1} x for a new full-p covariate vector (gamma-subset
    /// gathered internally); 0 for the empty model.
    pub fn leverage_for(&self, x_new: &DVector<f64>) -> f64 {
        if self.q == 0 {
            return 0.0;
        }
        let mut xg = DVector::from_iterator(self.q, self.active.iter().map(|&j| x_new[j]));
        self.chol_l.solve_lower_triangular_mut(&mut xg);
        xg.norm_squared()
    }

    /// Linear predictor x_g' beta_hat for a new covariate vector.
    pub fn linear_predictor(&self, g: f64, z: &DVector<f64>, x_new: &DVector<f64>) -> f64 {
        if self.q == 0 {
            return 0.0;
        }
        let beta = self.posterior_mean_beta(g, z);
        self.active
            .iter()
            .enumerate()
            .map(|(k, &j)| x_new[j] * beta[k])
            .sum()
    }

    pub fn active_columns(&self) -> &[usize] {
        &self.active
    }

    pub(crate) fn m_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

/// Current configuration of the stochastic search: indicators plus g.
#[derive(Debug, Clone)]
pub struct SelectionState {
    pub factor: std::sync::Arc<GammaFactor>,
    pub g: f64,
}

impl SelectionState {
    pub fn new(factor: GammaFactor, g: f64) -> Self {
        assert!(g > 0.0);
        SelectionState {
            factor: std::sync::Arc::new(factor),
            g,
        }
    }

    pub fn log_g(&self) -> f64 {
        self.g.ln()
    }
}

/// Memoized factorizations keyed by indicator vector. Configurations whose
/// submatrix is singular are remembered as absent. The map is cleared when
/// it outgrows its capacity bound.
pub struct FactorCache {
    map: std::collections::HashMap<Vec<bool>, Option<std::sync::Arc<GammaFactor>>>,
    cap: usize,
}

impl FactorCache {
    pub fn new(cap: usize) -> Self {
        FactorCache {
            map: std::collections::HashMap::new(),
            cap,
        }
    }

    /// The factor for a configuration, built on first use; `None` marks a
    /// rank-deficient (zero posterior mass) configuration.
    pub fn get(
        &mut self,
        data: &RegressionData,
        gamma: &[bool],
    ) -> Result<Option<std::sync::Arc<GammaFactor>>> {
        if let Some(hit) = self.map.get(gamma) {
            return Ok(hit.clone());
        }
        let entry = match build_factor(data, gamma) {
            Ok(f) => Some(std::sync::Arc::new(f)),
            Err(Error::SingularSubmatrix) => None,
            Err(e) => return Err(e),
        };
        if self.map.len() >= self.cap {
            self.map.clear();
        }
        self.map.insert(gamma.to_vec(), entry.clone());
        Ok(entry)
    }
}
