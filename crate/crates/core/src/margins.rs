//! Marginal distribution models for the dependent variable: Gaussian-kernel
//! density estimates, a rescaled empirical distribution and two parametric
//! families, each exposing a density, a distribution function, a quantile
//! function and the probability-integral transforms between observations and
//! standardized pseudo-data.

use crate::error::{Error, Result};
use crate::stats::{self, norm_cdf, norm_pdf, norm_quantile};

/// CDF values are clamped into [EPS_U, 1 - EPS_U] before any standard-normal
/// quantile transform, so pseudo-data stays finite.
pub const EPS_U: f64 = 1e-10;

/// Grid-backed kinds map the covered probability mass into
/// [TAIL_U, 1 - TAIL_U]; the sliver beyond is handled by the linear-in-z
/// tail extension.
const TAIL_U: f64 = 1e-8;

const GRID_POINTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    Kde,
    Empirical,
    Normal,
    LogNormal,
}

impl MarginKind {
    pub fn name(&self) -> &'static str {
        match self {
            MarginKind::Kde => "kde",
            MarginKind::Empirical => "empirical",
            MarginKind::Normal => "normal",
            MarginKind::LogNormal => "lognormal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kde" => Ok(MarginKind::Kde),
            "empirical" => Ok(MarginKind::Empirical),
            "normal" => Ok(MarginKind::Normal),
            "lognormal" => Ok(MarginKind::LogNormal),
            other => Err(Error::InvalidInput(format!("unknown margin kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// Gaussian-kernel estimate with per-point bandwidths: exact kernel sums
    /// for the density, a precomputed grid for the CDF/quantile pair.
    Kde {
        sample: Vec<f64>,
        /// pilot (global) bandwidth
        bandwidth: f64,
        /// per-point bandwidths; equal to the pilot for a fixed-width fit
        bandwidths: Vec<f64>,
        grid: Vec<f64>,
        cdf: Vec<f64>,
        pdf: Vec<f64>,
    },
    /// Rescaled empirical CDF i/(n+1), linearly interpolated between distinct
    /// order statistics, with normal-score tails beyond the sample range.
    Empirical { knots_y: Vec<f64>, knots_u: Vec<f64> },
    Normal { mu: f64, sd: f64 },
    LogNormal { mu: f64, sd: f64 },
}

/// A calibrated univariate margin: density, CDF and quantile evaluation plus
/// the PIT transforms. Immutable after fitting.
#[derive(Debug, Clone)]
pub struct MarginModel {
    repr: Repr,
}

/// Fit a margin of the requested kind to a sample.
pub fn fit_margin(sample: &[f64], kind: MarginKind) -> Result<MarginModel> {
    if sample.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: sample.len(),
        });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("sample contains non-finite values".into()));
    }
    let var = stats::variance(sample);
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("sample variance is zero".into()));
    }
    match kind {
        MarginKind::Kde => {
            let h = silverman_bandwidth(sample);
            fit_kde_adaptive(sample, h)
        }
        MarginKind::Empirical => Ok(MarginModel {
            repr: empirical_repr(sample),
        }),
        MarginKind::Normal => Ok(MarginModel::normal(
            stats::mean(sample),
            var.sqrt(),
        )),
        MarginKind::LogNormal => {
            if sample.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidInput(
                    "lognormal margin requires strictly positive data".into(),
                ));
            }
            let logs: Vec<f64> = sample.iter().map(|v| v.ln()).collect();
            let lv = stats::variance(&logs);
            if !(lv > 0.0) {
                return Err(Error::DegenerateSample("log-sample variance is zero".into()));
            }
            Ok(MarginModel::lognormal(stats::mean(&logs), lv.sqrt()))
        }
    }
}

/// Silverman's rule: 0.9 * min(sd, IQR/1.34) * n^(-1/5).
pub fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let sd = stats::variance(sample).sqrt();
    let iqr = stats::iqr(sample);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (sample.len() as f64).powf(-0.2)
}

/// Refine a starting bandwidth by golden-section search on the leave-one-out
/// log likelihood over [h0/3, 3 h0]. The objective subsamples to at most
/// 2000 points.
pub fn refine_bandwidth(sample: &[f64], h0: f64, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut pts = sample.to_vec();
    if pts.len() > 2000 {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        pts.shuffle(&mut rng);
        pts.truncate(2000);
    }
    let loo = |h: f64| -> f64 {
        let n = pts.len() as f64;
        let mut total = 0.0;
        for (i, &y) in pts.iter().enumerate() {
            let mut s = 0.0;
            for (j, &x) in pts.iter().enumerate() {
                if i != j {
                    s += norm_pdf((y - x) / h);
                }
            }
            total += (s / ((n - 1.0) * h)).max(1e-300).ln();
        }
        total
    };
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((h0 / 3.0).ln(), (3.0 * h0).ln());
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (loo(c.exp()), loo(d.exp()));
    for _ in 0..24 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = loo(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = loo(d.exp());
        }
    }
    (0.5 * (a + b)).exp()
}

/// Fit a Gaussian-kernel margin with one fixed bandwidth.
pub fn fit_kde_with_bandwidth(sample: &[f64], bandwidth: f64) -> Result<MarginModel> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput("bandwidth must be positive".into()));
    }
    build_kde(sample, bandwidth, vec![bandwidth; sample.len()])
}

/// Adaptive kernel estimate: starting from a fixed-bandwidth pilot, the
/// per-point bandwidths are refined as h_i = h0 (f(x_i)/G)^{-1/2} with G the
/// geometric mean of the current density at the data, iterated a few times
/// so sparse regions widen and dense spikes sharpen even when the pilot is
/// far off.
pub fn fit_kde_adaptive(sample: &[f64], pilot_bandwidth: f64) -> Result<MarginModel> {
    if !(pilot_bandwidth > 0.0) {
        return Err(Error::InvalidInput("bandwidth must be positive".into()));
    }
    let n = sample.len() as f64;
    let mut bandwidths = vec![pilot_bandwidth; sample.len()];
    for _ in 0..3 {
        let dens: Vec<f64> = sample
            .iter()
            .map(|&y| {
                sample
                    .iter()
                    .zip(bandwidths.iter())
                    .map(|(&x, &h)| norm_pdf((y - x) / h) / h)
                    .sum::<f64>()
                    / n
            })
            .map(|d| d.max(1e-300))
            .collect();
        let gmean = (dens.iter().map(|d| d.ln()).sum::<f64>() / n).exp();
        bandwidths = dens
            .iter()
            .map(|&d| pilot_bandwidth * (d / gmean).powf(-0.5).clamp(0.02, 50.0))
            .collect();
    }
    build_kde(sample, pilot_bandwidth, bandwidths)
}

fn build_kde(sample: &[f64], pilot: f64, bandwidths: Vec<f64>) -> Result<MarginModel> {
    let n = sample.len() as f64;
    let h_max = bandwidths.iter().cloned().fold(0.0f64, f64::max);
    let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * h_max;
    let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h_max;
    // uniform backbone plus refinement at each point's own bandwidth scale,
    // so sharp local features are resolved by the CDF interpolant
    let step = (hi - lo) / (GRID_POINTS / 2 - 1) as f64;
    let mut grid: Vec<f64> = (0..GRID_POINTS / 2).map(|k| lo + step * k as f64).collect();
    let stride = (sample.len() / 1500).max(1);
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample[a].partial_cmp(&sample[b]).unwrap());
    for idx in order.iter().step_by(stride) {
        let (x, h) = (sample[*idx], bandwidths[*idx]);
        for m in [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0] {
            let v = x + m * h;
            if v > lo && v < hi {
                grid.push(v);
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let pdf: Vec<f64> = grid
        .iter()
        .map(|&y| {
            sample
                .iter()
                .zip(bandwidths.iter())
                .map(|(&x, &h)| norm_pdf((y - x) / h) / h)
                .sum::<f64>()
                / n
        })
        .collect();
    let points = grid.len();
    let mut cdf = vec![0.0; points];
    for k in 1..points {
        cdf[k] = cdf[k - 1] + 0.5 * (pdf[k - 1] + pdf[k]) * (grid[k] - grid[k - 1]);
    }
    let total = cdf[points - 1];
    if !(total > 0.0) {
        return Err(Error::DegenerateSample("estimated density has zero mass".into()));
    }
    // Map the grid mass into [TAIL_U, 1-TAIL_U] and force strict monotonicity
    // so the CDF is invertible on the whole grid.
    for v in cdf.iter_mut() {
        *v = TAIL_U + (1.0 - 2.0 * TAIL_U) * (*v / total);
    }
    for k in 1..points {
        if cdf[k] <= cdf[k - 1] {
            cdf[k] = cdf[k - 1] + 1e-15;
        }
    }
    Ok(MarginModel {
        repr: Repr::Kde {
            sample: sample.to_vec(),
            bandwidth: pilot,
            bandwidths,
            grid,
            cdf,
            pdf,
        },
    })
}

fn empirical_repr(sample: &[f64]) -> Repr {
    let n = sample.len();
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // collapse ties, averaging the rescaled ranks i/(n+1)
    let mut knots_y = Vec::with_capacity(n);
    let mut knots_u = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let u = (i + 1..=j + 1).map(|r| r as f64).sum::<f64>() / ((j - i + 1) as f64)
            / (n as f64 + 1.0);
        knots_y.push(sorted[i]);
        knots_u.push(u);
        i = j + 1;
    }
    Repr::Empirical { knots_y, knots_u }
}

fn clamp_u(u: f64) -> f64 {
    u.clamp(EPS_U, 1.0 - EPS_U)
}

/// Linear interpolation helpers on a piecewise-linear CDF given as parallel
/// knot vectors. Outside the knot range both directions fall back to a
/// linear-in-z extension anchored at the two outermost knots with distinct
/// clamped z values.
struct PwlCdf<'a> {
    ys: &'a [f64],
    us: &'a [f64],
}

impl<'a> PwlCdf<'a> {
    fn left_anchor(&self) -> (f64, f64, f64, f64) {
        let z0 = norm_quantile(clamp_u(self.us[0]));
        let mut k = 1;
        while k < self.ys.len() - 1 {
            let zk = norm_quantile(clamp_u(self.us[k]));
            if zk - z0 > 1e-9 && self.ys[k] > self.ys[0] {
                return (self.ys[0], z0, self.ys[k], zk);
            }
            k += 1;
        }
        (self.ys[0], z0, *self.ys.last().unwrap(), norm_quantile(clamp_u(*self.us.last().unwrap())))
    }

    fn right_anchor(&self) -> (f64, f64, f64, f64) {
        let m = self.ys.len();
        let z1 = norm_quantile(clamp_u(self.us[m - 1]));
        let mut k = m - 2;
        loop {
            let zk = norm_quantile(clamp_u(self.us[k]));
            if z1 - zk > 1e-9 && self.ys[m - 1] > self.ys[k] {
                return (self.ys[k], zk, self.ys[m - 1], z1);
            }
            if k == 0 {
                return (self.ys[0], norm_quantile(clamp_u(self.us[0])), self.ys[m - 1], z1);
            }
            k -= 1;
        }
    }

    fn cdf(&self, y: f64) -> f64 {
        let m = self.ys.len();
        if y <= self.ys[0] {
            let (ya, za, yb, zb) = self.left_anchor();
            let slope = (zb - za) / (yb - ya);
            return norm_cdf(za + slope * (y - ya));
        }
        if y >= self.ys[m - 1] {
            let (ya, za, yb, zb) = self.right_anchor();
            let slope = (zb - za) / (yb - ya);
            return norm_cdf(zb + slope * (y - yb));
        }
        let k = match self.ys.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(k) => return self.us[k],
            Err(k) => k,
        };
        let (y0, y1, u0, u1) = (self.ys[k - 1], self.ys[k], self.us[k - 1], self.us[k]);
        u0 + (u1 - u0) * (y - y0) / (y1 - y0)
    }

    fn quantile(&self, u: f64) -> f64 {
        let u = clamp_u(u);
        let m = self.ys.len();
        if u <= self.us[0] {
            let (ya, za, yb, zb) = self.left_anchor();
            let slope = (yb - ya) / (zb - za);
            return ya + slope * (norm_quantile(u) - za);
        }
        if u >= self.us[m - 1] {
            let (ya, za, yb, zb) = self.right_anchor();
            let slope = (yb - ya) / (zb - za);
            return yb + slope * (norm_quantile(u) - zb);
        }
        let k = match self.us.binary_search_by(|v| v.partial_cmp(&u).unwrap()) {
            Ok(k) => return self.ys[k],
            Err(k) => k,
        };
        let (y0, y1, u0, u1) = (self.ys[k - 1], self.ys[k], self.us[k - 1], self.us[k]);
        y0 + (y1 - y0) * (u - u0) / (u1 - u0)
    }

    /// Density implied by the tails (normal score times slope); used outside
    /// the knot range where kernel sums or step densities vanish.
    fn tail_density(&self, y: f64) -> f64 {
        let (ya, za, yb, zb) = if y <= self.ys[0] {
            self.left_anchor()
        } else {
            self.right_anchor()
        };
        let slope = (zb - za) / (yb - ya);
        let z = if y <= self.ys[0] {
            za + slope * (y - ya)
        } else {
            zb + slope * (y - yb)
        };
        norm_pdf(z) * slope
    }
}

impl MarginModel {
    /// Exact normal margin with the given mean and standard deviation.
    pub fn normal(mu: f64, sd: f64) -> Self {
        assert!(sd > 0.0);
        MarginModel {
            repr: Repr::Normal { mu, sd },
        }
    }

    /// Exact lognormal margin parameterized on the log scale.
    pub fn lognormal(mu: f64, sd: f64) -> Self {
        assert!(sd > 0.0);
        MarginModel {
            repr: Repr::LogNormal { mu, sd },
        }
    }

    /// Build a margin from an externally estimated density evaluated on a
    /// monotone grid. This is the seam for plugging in alternative margin
    /// estimators: anything able to produce (grid, density) pairs can stand
    /// in for the built-in kernel estimator.
    pub fn from_density_grid(grid: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        if grid.len() != pdf.len() || grid.len() < 8 {
            return Err(Error::InvalidInput("grid and density lengths must match (>= 8)".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        if pdf.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("density values must be finite and nonnegative".into()));
        }
        let mut cdf = vec![0.0; grid.len()];
        for k in 1..grid.len() {
            cdf[k] = cdf[k - 1] + 0.5 * (pdf[k - 1] + pdf[k]) * (grid[k] - grid[k - 1]);
        }
        let total = cdf[grid.len() - 1];
        if !(total > 0.0) {
            return Err(Error::DegenerateSample("density has zero mass".into()));
        }
        for v in cdf.iter_mut() {
            *v = TAIL_U + (1.0 - 2.0 * TAIL_U) * (*v / total);
        }
        for k in 1..cdf.len() {
            if cdf[k] <= cdf[k - 1] {
                cdf[k] = cdf[k - 1] + 1e-15;
            }
        }
        Ok(MarginModel {
            repr: Repr::Kde {
                sample: Vec::new(),
                bandwidth: 0.0,
                bandwidths: Vec::new(),
                grid,
                cdf,
                pdf,
            },
        })
    }

    pub fn kind(&self) -> MarginKind {
        match &self.repr {
            Repr::Kde { .. } => MarginKind::Kde,
            Repr::Empirical { .. } => MarginKind::Empirical,
            Repr::Normal { .. } => MarginKind::Normal,
            Repr::LogNormal { .. } => MarginKind::LogNormal,
        }
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match &self.repr {
            Repr::Kde { bandwidth, .. } if *bandwidth > 0.0 => Some(*bandwidth),
            _ => None,
        }
    }

    /// Marginal density p_Y(y).
    pub fn density(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Kde {
                sample,
                bandwidths,
                grid,
                pdf,
                cdf,
                ..
            } => {
                if y < grid[0] || y > grid[grid.len() - 1] {
                    return PwlCdf { ys: grid, us: cdf }.tail_density(y);
                }
                if sample.is_empty() {
                    // grid-backed external estimator: interpolate
                    let k = grid.partition_point(|&v| v < y).max(1).min(grid.len() - 1);
                    let w = (y - grid[k - 1]) / (grid[k] - grid[k - 1]);
                    return pdf[k - 1] * (1.0 - w) + pdf[k] * w;
                }
                let n = sample.len() as f64;
                sample
                    .iter()
                    .zip(bandwidths.iter())
                    .map(|(&x, &h)| norm_pdf((y - x) / h) / h)
                    .sum::<f64>()
                    / n
            }
            Repr::Empirical { knots_y, knots_u } => {
                let pwl = PwlCdf { ys: knots_y, us: knots_u };
                let m = knots_y.len();
                if y <= knots_y[0] || y >= knots_y[m - 1] {
                    return pwl.tail_density(y);
                }
                let k = knots_y.partition_point(|&v| v < y).max(1);
                (knots_u[k] - knots_u[k - 1]) / (knots_y[k] - knots_y[k - 1])
            }
            Repr::Normal { mu, sd } => norm_pdf((y - mu) / sd) / sd,
            Repr::LogNormal { mu, sd } => {
                if y <= 0.0 {
                    0.0
                } else {
                    norm_pdf((y.ln() - mu) / sd) / (sd * y)
                }
            }
        }
    }

    pub fn log_density(&self, y: f64) -> f64 {
        self.density(y).max(1e-300).ln()
    }

    /// Marginal distribution function F_Y(y).
    pub fn cdf(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Kde { grid, cdf, .. } => PwlCdf { ys: grid, us: cdf }.cdf(y),
            Repr::Empirical { knots_y, knots_u } => PwlCdf { ys: knots_y, us: knots_u }.cdf(y),
            Repr::Normal { mu, sd } => norm_cdf((y - mu) / sd),
            Repr::LogNormal { mu, sd } => {
                if y <= 0.0 {
                    0.0
                } else {
                    norm_cdf((y.ln() - mu) / sd)
                }
            }
        }
    }

    /// Quantile function F_Y^{-1}(u).
    pub fn quantile(&self, u: f64) -> f64 {
        let u = clamp_u(u);
        match &self.repr {
            Repr::Kde { grid, cdf, .. } => PwlCdf { ys: grid, us: cdf }.quantile(u),
            Repr::Empirical { knots_y, knots_u } => {
                PwlCdf { ys: knots_y, us: knots_u }.quantile(u)
            }
            Repr::Normal { mu, sd } => mu + sd * norm_quantile(u),
            Repr::LogNormal { mu, sd } => (mu + sd * norm_quantile(u)).exp(),
        }
    }

    /// z_i = Phi^{-1}(clamp(F_Y(y_i))); always finite.
    pub fn pit_transform(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter()
            .map(|&y| norm_quantile(clamp_u(self.cdf(y))))
            .collect()
    }

    /// Scalar version of the PIT.
    pub fn pit(&self, y: f64) -> f64 {
        norm_quantile(clamp_u(self.cdf(y)))
    }

    /// Y = F_Y^{-1}(Phi(z)).
    pub fn inverse_pit(&self, z: f64) -> f64 {
        self.quantile(norm_cdf(z))
    }

    /// Dump (grid, pdf, cdf) triples for diagnostics, if the margin is
    /// grid-backed.
    pub fn grid_dump(&self) -> Option<Vec<(f64, f64, f64)>> {
        match &self.repr {
            Repr::Kde { grid, pdf, cdf, .. } => Some(
                grid.iter()
                    .zip(pdf)
                    .zip(cdf)
                    .map(|((&g, &p), &c)| (g, p, c))
                    .collect(),
            ),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn kde_cdf_near_half_at_zero_for_standard_normal() {
        let sample = normal_sample(10_000, 1);
        let m = fit_margin(&sample, MarginKind::Kde).unwrap();
        let c = m.cdf(0.0);
        assert!(c > 0.48 && c < 0.52, "cdf(0) = {c}");
    }

    #[test]
    fn empirical_cdf_is_rescaled_rank() {
        // n = 3 is below the fit_margin floor; exercise the representation
        // directly plus the public path on a padded sample.
        let repr = empirical_repr(&[1.0, 2.0, 3.0]);
        let m = MarginModel { repr };
        assert!((m.cdf(2.0) - 0.5).abs() < 1e-12);
        assert!((m.cdf(1.0) - 0.25).abs() < 1e-12);
        assert!((m.cdf(1.5) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sample_is_rejected() {
        let sample = vec![3.5; 50];
        match fit_margin(&sample, MarginKind::Kde) {
            Err(Error::DegenerateSample(_)) => {}
            other => panic!("expected degenerate-sample, got {other:?}"),
        }
    }

    #[test]
    fn insufficient_data_is_rejected() {
        match fit_margin(&[1.0, 2.0, 3.0], MarginKind::Empirical) {
            Err(Error::InsufficientData { .. }) => {}
            other => panic!("expected insufficient-data, got {other:?}"),
        }
    }

    #[test]
    fn pit_is_identity_for_exact_normal_margin() {
        let m = MarginModel::normal(0.0, 1.0);
        let z = m.pit_transform(&[1.5]);
        assert!((z[0] - 1.5).abs() < 1e-9);
        assert!((m.inverse_pit(-2.0) + 2.0).abs() < 1e-9);
    }

    #[test]
    fn pit_maps_lognormal_median_to_zero() {
        let m = MarginModel::lognormal(0.0, 1.0);
        let z = m.pit_transform(&[1.0]);
        assert!(z[0].abs() < 1e-12);
        let med = MarginModel::lognormal(-2.89, 2.0).inverse_pit(0.0);
        assert!((med - (-2.89f64).exp()).abs() < 1e-12, "median {med}");
    }

    #[test]
    fn pit_at_975_percentile() {
        let sample = normal_sample(5_000, 2);
        let m = fit_margin(&sample, MarginKind::Kde).unwrap();
        let y = m.quantile(0.975);
        let z = m.pit(y);
        assert!((z - 1.95996).abs() < 1e-4, "z = {z}");
    }

    #[test]
    fn round_trip_inverse_pit_then_pit() {
        let sample = normal_sample(2_000, 3);
        let m = fit_margin(&sample, MarginKind::Kde).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let d = Normal::new(0.0, 1.5).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let z: f64 = d.sample(&mut rng);
            let y = m.inverse_pit(z);
            let z2 = m.pit(y);
            worst = worst.max((z2 - z).abs());
        }
        assert!(worst < 1e-5, "max abs error {worst}");
    }

    #[test]
    fn quantile_cdf_round_trip_on_interior() {
        let sample = normal_sample(3_000, 5);
        let m = fit_margin(&sample, MarginKind::Kde).unwrap();
        for &y in &[-1.8, -0.6, 0.0, 0.4, 1.1, 2.0] {
            let back = m.quantile(m.cdf(y));
            let rel = (back - y).abs() / y.abs().max(1.0);
            assert!(rel < 1e-6, "round trip {y} -> {back}");
        }
    }

    #[test]
    fn pit_uniformity_ks_below_critical() {
        let sample = normal_sample(10_000, 6);
        let m = fit_margin(&sample, MarginKind::Kde).unwrap();
        let us: Vec<f64> = sample.iter().map(|&y| m.cdf(y)).collect();
        let ks = stats::ks_uniform_statistic(&us);
        let critical_1pct = 1.628 / (sample.len() as f64).sqrt();
        assert!(ks < critical_1pct, "KS {ks} >= {critical_1pct}");
    }

    #[test]
    fn density_integrates_to_one_and_matches_cdf_derivative() {
        let sample = normal_sample(4_000, 7);
        let m = fit_margin(&sample, MarginKind::Kde).unwrap();
        let dump = m.grid_dump().unwrap();
        let mut mass = 0.0;
        for w in dump.windows(2) {
            mass += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        }
        assert!((mass - 1.0).abs() < 1e-3, "density mass {mass}");

        // derivative of the cdf vs the density at 100 interior grid points
        let k0 = dump.len() / 4;
        let k1 = 3 * dump.len() / 4;
        let stride = (k1 - k0) / 100;
        for k in (k0..k1).step_by(stride.max(1)) {
            let dy = dump[k + 1].0 - dump[k - 1].0;
            let deriv = (dump[k + 1].2 - dump[k - 1].2) / dy;
            assert!(
                (deriv - dump[k].1).abs() < 1e-3,
                "cdf' {deriv} vs pdf {} at grid {k}",
                dump[k].1
            );
        }
    }

    #[test]
    fn cdf_is_monotone_on_sorted_input() {
        let sample = normal_sample(500, 8);
        let m = fit_margin(&sample, MarginKind::Kde).unwrap();
        let mut ys: Vec<f64> = (-400..=400).map(|k| k as f64 * 0.01).collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cs: Vec<f64> = ys.iter().map(|&y| m.cdf(y)).collect();
        assert!(cs.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn external_density_grid_margin_behaves() {
        // plug in an exact normal density on a grid and check the CDF
        let grid: Vec<f64> = (0..1024).map(|k| -6.0 + 12.0 * k as f64 / 1023.0).collect();
        let pdf: Vec<f64> = grid.iter().map(|&y| norm_pdf(y)).collect();
        let m = MarginModel::from_density_grid(grid, pdf).unwrap();
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-4);
        assert!((m.quantile(0.975) - 1.95996).abs() < 2e-3);
    }

    #[test]
    fn refined_bandwidth_stays_in_bracket() {
        let sample = normal_sample(400, 9);
        let h0 = silverman_bandwidth(&sample);
        let h = refine_bandwidth(&sample, h0, 10);
        assert!(h > h0 / 3.0 && h < h0 * 3.0);
        let m = fit_kde_with_bandwidth(&sample, h).unwrap();
        assert!(m.bandwidth().unwrap() > 0.0);
    }

    proptest::proptest! {
        #[test]
        fn prop_cdf_monotone_and_quantile_inverts(seed in 0u64..50) {
            let sample = normal_sample(200, 100 + seed);
            let m = fit_margin(&sample, MarginKind::Kde).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for k in -30..=30 {
                let y = k as f64 * 0.1;
                let c = m.cdf(y);
                proptest::prop_assert!(c >= prev);
                prev = c;
                let back = m.quantile(c);
                proptest::prop_assert!((back - y).abs() < 1e-6 * y.abs().max(1.0));
            }
        }
    }
}
