//! Priors on the g scaling factor (hyper-g, hyper-g/n, Zellner-Siow, fixed)
//! and the beta-binomial model-size prior on the indicator vector.

use crate::error::{Error, Result};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// Prior on the coefficient scaling factor g.
#[derive(Debug, Clone, PartialEq)]
pub enum GPrior {
    /// p(g) = (a-2)/2 (1+g)^{-a/2}, proper for a > 2; a = 4 puts a uniform
    /// prior on the shrinkage factor g/(1+g).
    HyperG { a: f64 },
    /// p(g) = (a-2)/(2n) (1+g/n)^{-a/2}.
    HyperGOverN { a: f64, n: usize },
    /// Inverse-Gamma(1/2, n/2): p(g) = sqrt(n/2)/Gamma(1/2) g^{-3/2} e^{-n/(2g)}.
    ZellnerSiow { n: usize },
    /// Point mass at a fixed value; presets g = 100 and g = n.
    Fixed { value: f64 },
}

impl GPrior {
    pub fn hyper_g(a: f64) -> Result<Self> {
        if a <= 2.0 {
            return Err(Error::InvalidInput(format!("hyper-g requires a > 2, got {a}")));
        }
        Ok(GPrior::HyperG { a })
    }

    pub fn hyper_g_over_n(a: f64, n: usize) -> Result<Self> {
        if a <= 2.0 {
            return Err(Error::InvalidInput(format!("hyper-g/n requires a > 2, got {a}")));
        }
        Ok(GPrior::HyperGOverN { a, n })
    }

    pub fn zellner_siow(n: usize) -> Self {
        GPrior::ZellnerSiow { n }
    }

    pub fn fixed(value: f64) -> Result<Self> {
        if !(value > 0.0) {
            return Err(Error::InvalidInput(format!("fixed g must be positive, got {value}")));
        }
        Ok(GPrior::Fixed { value })
    }

    /// Parse a CLI prior spec: `hyper-g`, `hyper-g-n`, `zellner-siow` or
    /// `fixed:<value>` (with `fixed:n` resolving to the sample size).
    pub fn parse(spec: &str, n: usize, a: f64) -> Result<Self> {
        match spec {
            "hyper-g" => Self::hyper_g(a),
            "hyper-g-n" => Self::hyper_g_over_n(a, n),
            "zellner-siow" => Ok(Self::zellner_siow(n)),
            other => {
                if let Some(v) = other.strip_prefix("fixed:") {
                    if v == "n" {
                        return Self::fixed(n as f64);
                    }
                    let value: f64 = v
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad fixed g value `{v}`")))?;
                    Self::fixed(value)
                } else {
                    Err(Error::InvalidInput(format!("unknown g-prior `{other}`")))
                }
            }
        }
    }

    pub fn spec_string(&self) -> String {
        match self {
            GPrior::HyperG { .. } => "hyper-g".into(),
            GPrior::HyperGOverN { .. } => "hyper-g-n".into(),
            GPrior::ZellnerSiow { .. } => "zellner-siow".into(),
            GPrior::Fixed { value } => format!("fixed:{value}"),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, GPrior::Fixed { .. })
    }

    /// log p(g). Not defined for the point-mass prior.
    pub fn log_density(&self, g: f64) -> Result<f64> {
        if !(g > 0.0) {
            return Err(Error::InvalidInput(format!("g must be positive, got {g}")));
        }
        match self {
            GPrior::HyperG { a } => Ok(((a - 2.0) / 2.0).ln() - (a / 2.0) * g.ln_1p()),
            GPrior::HyperGOverN { a, n } => {
                let nf = *n as f64;
                Ok(((a - 2.0) / (2.0 * nf)).ln() - (a / 2.0) * (g / nf).ln_1p())
            }
            GPrior::ZellnerSiow { n } => {
                let nf = *n as f64;
                Ok(0.5 * (nf / 2.0).ln() - ln_gamma(0.5) - 1.5 * g.ln() - nf / (2.0 * g))
            }
            GPrior::Fixed { .. } => Err(Error::InvalidInput(
                "point-mass prior has no density on g".into(),
            )),
        }
    }

    /// Derivative of log p(g) + log g with respect to log g; the extra
    /// log g term is the change-of-variables Jacobian to the log scale.
    pub fn dlog_density_dloggtilde(&self, log_g: f64) -> f64 {
        let g = log_g.exp();
        match self {
            GPrior::HyperG { a } => 1.0 - (a / 2.0) * g / (1.0 + g),
            GPrior::HyperGOverN { a, n } => 1.0 - (a / 2.0) * g / (*n as f64 + g),
            GPrior::ZellnerSiow { n } => *n as f64 / (2.0 * g) - 0.5,
            GPrior::Fixed { .. } => 0.0,
        }
    }

    /// Exact draw from the prior (inversion / transformation sampling).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            GPrior::HyperG { a } => {
                // shrinkage factor g/(1+g) ~ Beta(1, a/2 - 1)
                let b = a / 2.0 - 1.0;
                let u: f64 = rng.random();
                let s = 1.0 - (1.0 - u).powf(1.0 / b);
                s / (1.0 - s)
            }
            GPrior::HyperGOverN { a, n } => {
                let b = a / 2.0 - 1.0;
                let u: f64 = rng.random();
                let s = 1.0 - (1.0 - u).powf(1.0 / b);
                *n as f64 * s / (1.0 - s)
            }
            GPrior::ZellnerSiow { n } => {
                // 1/g ~ Gamma(1/2, rate n/2), i.e. g = n / chi-square(1)
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                *n as f64 / (z * z).max(1e-300)
            }
            GPrior::Fixed { value } => *value,
        }
    }
}

/// log p(gamma) = log Beta(p - q + 1, q + 1).
pub fn log_prior_gamma(p: usize, q: usize) -> f64 {
    assert!(q <= p);
    let (pa, pb) = ((p - q + 1) as f64, (q + 1) as f64);
    ln_gamma(pa) + ln_gamma(pb) - ln_gamma(pa + pb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn printed_density_values() {
        let hg = GPrior::hyper_g(4.0).unwrap();
        assert!((hg.log_density(1.0).unwrap() - 0.25f64.ln()).abs() < 1e-12);

        let hgn = GPrior::hyper_g_over_n(4.0, 4).unwrap();
        assert!((hgn.log_density(4.0).unwrap() - 0.0625f64.ln()).abs() < 1e-12);

        let zs = GPrior::zellner_siow(2);
        let expect = (1.0 / std::f64::consts::PI.sqrt() * (-1.0f64).exp()).ln();
        assert!((zs.log_density(1.0).unwrap() - expect).abs() < 1e-12);
        assert!((zs.log_density(1.0).unwrap().exp() - 0.20755).abs() < 1e-5);
    }

    #[test]
    fn nonpositive_g_is_rejected() {
        let hg = GPrior::hyper_g(4.0).unwrap();
        assert!(hg.log_density(0.0).is_err());
        assert!(hg.log_density(-1.0).is_err());
    }

    #[test]
    fn hyper_g_log_scale_derivative() {
        let hg = GPrior::hyper_g(4.0).unwrap();
        // limit g -> 0 gives 1
        assert!((hg.dlog_density_dloggtilde(-40.0) - 1.0).abs() < 1e-12);
        // at g = 1: 1 - 2 * 0.5 = 0
        assert!(hg.dlog_density_dloggtilde(0.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let n = 37;
        let priors = [
            GPrior::hyper_g(4.0).unwrap(),
            GPrior::hyper_g_over_n(4.0, n).unwrap(),
            GPrior::zellner_siow(n),
        ];
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for prior in &priors {
            for _ in 0..20 {
                let lg: f64 = rng.random_range(-3.0..6.0);
                let h = 1e-5;
                let f = |t: f64| prior.log_density(t.exp()).unwrap() + t;
                let fd = (f(lg + h) - f(lg - h)) / (2.0 * h);
                let an = prior.dlog_density_dloggtilde(lg);
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                    "{prior:?} at log g = {lg}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn continuous_priors_integrate_to_one() {
        // quadrature over log g in [-30, 30] catches essentially all mass
        for prior in [
            GPrior::hyper_g(4.0).unwrap(),
            GPrior::hyper_g_over_n(4.0, 25).unwrap(),
            GPrior::zellner_siow(25),
        ] {
            let k = 20_001;
            let (lo, hi) = (-30.0, 30.0);
            let h = (hi - lo) / (k - 1) as f64;
            let mut mass = 0.0;
            for i in 0..k {
                let t = lo + h * i as f64;
                let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
                mass += w * (prior.log_density(t.exp()).unwrap() + t).exp() * h;
            }
            assert!((mass - 1.0).abs() < 1e-3, "{prior:?} mass {mass}");
        }
    }

    #[test]
    fn hyper_g_shrinkage_factor_is_uniform() {
        let hg = GPrior::hyper_g(4.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let us: Vec<f64> = (0..10_000)
            .map(|_| {
                let g = hg.sample(&mut rng);
                g / (1.0 + g)
            })
            .collect();
        let ks = stats::ks_uniform_statistic(&us);
        let critical_1pct = 1.628 / (us.len() as f64).sqrt();
        assert!(ks < critical_1pct, "KS {ks}");
    }

    #[test]
    fn model_prior_printed_values_and_total_mass() {
        assert!((log_prior_gamma(2, 1) - (1.0f64 / 6.0).ln()).abs() < 1e-12);
        assert!((log_prior_gamma(20, 0) - (1.0f64 / 21.0).ln()).abs() < 1e-12);

        // p = 2: enumerate all 4 models
        let mut total = 0.0;
        let mut by_q = [0.0f64; 3];
        for bits in 0..4u32 {
            let q = bits.count_ones() as usize;
            let m = log_prior_gamma(2, q).exp();
            total += m;
            by_q[q] += m;
        }
        assert!((total - 1.0).abs() < 1e-12);
        for q in 0..3 {
            assert!((by_q[q] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_prior_sums_to_one_exactly_for_small_p() {
        for p in 1..=10usize {
            let mut total = 0.0;
            for q in 0..=p {
                let binom = (0..q).fold(1.0f64, |acc, i| acc * (p - i) as f64 / (i + 1) as f64);
                total += binom * log_prior_gamma(p, q).exp();
            }
            assert!((total - 1.0).abs() < 1e-10, "p = {p}: total {total}");
        }
    }

    #[test]
    fn cli_parsing_and_presets() {
        let n = 50;
        assert!(matches!(GPrior::parse("hyper-g", n, 4.0).unwrap(), GPrior::HyperG { .. }));
        assert!(matches!(
            GPrior::parse("hyper-g-n", n, 4.0).unwrap(),
            GPrior::HyperGOverN { .. }
        ));
        assert!(matches!(
            GPrior::parse("zellner-siow", n, 4.0).unwrap(),
            GPrior::ZellnerSiow { .. }
        ));
        assert_eq!(
            GPrior::parse("fixed:100", n, 4.0).unwrap(),
            GPrior::Fixed { value: 100.0 }
        );
        assert_eq!(GPrior::parse("fixed:n", n, 4.0).unwrap(), GPrior::Fixed { value: 50.0 });
        assert!(GPrior::parse("cauchy", n, 4.0).is_err());
        assert!(GPrior::parse("fixed:-3", n, 4.0).is_err());
    }
}
