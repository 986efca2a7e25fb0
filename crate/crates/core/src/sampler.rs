//! Stochastic-search MCMC over indicator configurations: random pairwise
//! partition of gamma, exact bivariate Gibbs draws from the four-point
//! conditional, a Hamiltonian update for log g with dual-averaging step-size
//! adaptation, and Rao-Blackwellized inclusion probabilities.

use crate::copula::{build_factor, FactorCache, GammaFactor, RegressionData, SelectionState};
use crate::error::{Error, Result};
use crate::priors::{log_prior_gamma, GPrior};
use crate::stats::logsumexp;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub sweeps: usize,
    pub burnin: usize,
    pub seed: u64,
    pub hmc_target_accept: f64,
    pub hmc_leapfrog_steps: usize,
    /// Sweeps during which the step size adapts; defaults to the burn-in.
    pub hmc_adapt_sweeps: Option<usize>,
}

impl SamplerConfig {
    pub fn new(sweeps: usize, burnin: usize, seed: u64) -> Self {
        SamplerConfig {
            sweeps,
            burnin,
            seed,
            hmc_target_accept: 0.8,
            hmc_leapfrog_steps: 10,
            hmc_adapt_sweeps: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.burnin >= self.sweeps {
            return Err(Error::InvalidInput(format!(
                "burnin ({}) must be below sweeps ({})",
                self.burnin, self.sweeps
            )));
        }
        if !(self.hmc_target_accept > 0.0 && self.hmc_target_accept < 1.0) {
            return Err(Error::InvalidInput("hmc_target_accept must lie in (0,1)".into()));
        }
        Ok(())
    }

    fn adapt_sweeps(&self) -> usize {
        self.hmc_adapt_sweeps.unwrap_or(self.burnin)
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig::new(5_000, 1_000, 0)
    }
}

/// One retained sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub gamma: Vec<bool>,
    pub g: f64,
    pub log_kernel: f64,
}

/// Monte Carlo output of a chain run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<SweepRecord>,
    pub burnin: usize,
    rb_sum: Vec<f64>,
    rb_sweeps: usize,
    pub hmc_accepts: Vec<f64>,
    pub gradient_warnings: usize,
}

impl Trace {
    /// Assemble a trace from replayed or externally constructed records.
    /// Rao-Blackwell accumulators are unavailable on such traces.
    pub fn from_records(records: Vec<SweepRecord>, burnin: usize) -> Self {
        Trace {
            records,
            burnin,
            rb_sum: Vec::new(),
            rb_sweeps: 0,
            hmc_accepts: Vec::new(),
            gradient_warnings: 0,
        }
    }

    pub fn post_burnin(&self) -> &[SweepRecord] {
        &self.records[self.burnin.min(self.records.len())..]
    }

    /// Rao-Blackwell estimates of Pr(gamma_j = 1 | X, y).
    pub fn inclusion_probabilities(&self) -> Result<Vec<f64>> {
        if self.rb_sweeps == 0 {
            return Err(Error::EmptyTrace);
        }
        Ok(self
            .rb_sum
            .iter()
            .map(|s| (s / self.rb_sweeps as f64).clamp(0.0, 1.0))
            .collect())
    }

    /// Raw frequency estimates (1/K) sum gamma_j, for cross-checks.
    pub fn raw_inclusion_frequencies(&self) -> Result<Vec<f64>> {
        let post = self.post_burnin();
        if post.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let p = post[0].gamma.len();
        let mut freq = vec![0.0; p];
        for rec in post {
            for (j, &b) in rec.gamma.iter().enumerate() {
                if b {
                    freq[j] += 1.0;
                }
            }
        }
        Ok(freq.iter().map(|f| f / post.len() as f64).collect())
    }

    /// The `k` most visited configurations with visit frequencies.
    pub fn top_models(&self, k: usize) -> Vec<(Vec<bool>, f64)> {
        use std::collections::HashMap;
        let post = self.post_burnin();
        let mut counts: HashMap<Vec<bool>, usize> = HashMap::new();
        for rec in post {
            *counts.entry(rec.gamma.clone()).or_insert(0) += 1;
        }
        let mut items: Vec<(Vec<bool>, usize)> = counts.into_iter().collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items
            .into_iter()
            .take(k)
            .map(|(gamma, c)| (gamma, c as f64 / post.len() as f64))
            .collect()
    }

    pub fn posterior_median_g(&self) -> Result<f64> {
        let post = self.post_burnin();
        if post.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mut gs: Vec<f64> = post.iter().map(|r| r.g).collect();
        gs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(crate::stats::quantile_sorted(&gs, 0.5))
    }
}

/// Uniformly random pairing of indices 0..p. With odd p the leftover index
/// is paired with a uniformly chosen distinct partner, so one index appears
/// in two pairs.
pub fn pair_partition<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    if p < 2 {
        return Err(Error::InvalidInput(format!("pair partition needs p >= 2, got {p}")));
    }
    let mut idx: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let mut pairs: Vec<(usize, usize)> = idx.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    if p % 2 == 1 {
        let leftover = idx[p - 1];
        let mut partner = rng.random_range(0..p - 1);
        if partner >= leftover {
            partner += 1;
        }
        pairs.push((leftover, partner));
    }
    Ok(pairs)
}

const FOUR_CONFIGS: [(bool, bool); 4] = [(false, false), (false, true), (true, false), (true, true)];

/// Outcome of one bivariate Gibbs step: the conditional inclusion
/// probabilities of the two coordinates given the rest.
#[derive(Debug, Clone, Copy)]
pub struct PairUpdate {
    pub prob_i: f64,
    pub prob_j: f64,
}

/// Draw (gamma_i, gamma_j) from its exact bivariate conditional; the four
/// log weights combine the copula kernel and the model-size prior, with
/// singular configurations excluded. Updates `state` in place. Factors come
/// from the memoizing cache, so revisited configurations cost one lookup.
pub fn gibbs_pair_update<R: Rng + ?Sized>(
    data: &RegressionData,
    state: &mut SelectionState,
    pair: (usize, usize),
    cache: &mut FactorCache,
    rng: &mut R,
) -> Result<PairUpdate> {
    let (i, j) = pair;
    let p = data.p();
    let mut log_w = [f64::NEG_INFINITY; 4];
    let mut factors: [Option<Arc<GammaFactor>>; 4] = [None, None, None, None];
    for (c, &(bi, bj)) in FOUR_CONFIGS.iter().enumerate() {
        let mut gamma = state.factor.gamma.clone();
        gamma[i] = bi;
        gamma[j] = bj;
        // with i == j the last write wins; the two coordinates coincide
        if let Some(f) = cache.get(data, &gamma)? {
            log_w[c] = f.log_kernel(state.g, &data.z) + log_prior_gamma(p, f.q);
            factors[c] = Some(f);
        }
    }
    let total = logsumexp(&log_w);
    if !total.is_finite() {
        return Err(Error::NoValidConfiguration);
    }
    let probs: Vec<f64> = log_w.iter().map(|&w| (w - total).exp()).collect();
    let prob_i = probs[2] + probs[3]; // A(1,0) + A(1,1)
    let prob_j = probs[1] + probs[3]; // A(0,1) + A(1,1)

    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = 3;
    for (c, &pr) in probs.iter().enumerate() {
        acc += pr;
        if u <= acc {
            chosen = c;
            break;
        }
    }
    // a singular configuration can never be chosen: its probability is 0
    let factor = factors[chosen]
        .take()
        .expect("chosen configuration must be non-singular");
    state.factor = factor;
    Ok(PairUpdate { prob_i, prob_j })
}

/// Dual-averaging step-size adaptation (gamma = 0.05, t0 = 10, kappa = 0.75).
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    m: usize,
    target: f64,
}

impl DualAveraging {
    pub fn new(eps0: f64, target: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: eps0.ln(),
            h_bar: 0.0,
            m: 0,
            target,
        }
    }

    pub fn current_eps(&self) -> f64 {
        self.log_eps.exp()
    }

    pub fn adapted_eps(&self) -> f64 {
        self.log_eps_bar.exp()
    }

    pub fn update(&mut self, accept_prob: f64) {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.m += 1;
        let m = self.m as f64;
        let w = 1.0 / (m + T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - m.sqrt() / GAMMA * self.h_bar;
        let mw = m.powf(-KAPPA);
        self.log_eps_bar = mw * self.log_eps + (1.0 - mw) * self.log_eps_bar;
    }
}

fn log_target(factor: &GammaFactor, prior: &GPrior, log_g: f64, z: &nalgebra::DVector<f64>) -> f64 {
    let g = log_g.exp();
    match prior.log_density(g) {
        Ok(lp) => factor.log_kernel(g, z) + lp + log_g,
        Err(_) => f64::NEG_INFINITY,
    }
}

fn grad_log_target(
    factor: &GammaFactor,
    prior: &GPrior,
    log_g: f64,
    z: &nalgebra::DVector<f64>,
) -> f64 {
    let g = log_g.exp();
    g * factor.log_kernel_dg(g, z) + prior.dlog_density_dloggtilde(log_g)
}

/// One Hamiltonian transition on log g. Returns the acceptance probability
/// (0.0 when the trajectory produced non-finite values, which counts as a
/// gradient warning).
pub fn hmc_update_g<R: Rng + ?Sized>(
    data: &RegressionData,
    state: &mut SelectionState,
    prior: &GPrior,
    eps: f64,
    leapfrog_steps: usize,
    rng: &mut R,
) -> (f64, bool) {
    if let GPrior::Fixed { value } = prior {
        state.g = *value;
        return (1.0, false);
    }
    let z = &data.z;
    let lg0 = state.log_g();
    let mut lg = lg0;
    let mut mom: f64 = rng.sample(rand_distr::StandardNormal);
    let h0 = -log_target(&state.factor, prior, lg, z) + 0.5 * mom * mom;

    let mut warned = false;
    let mut grad = grad_log_target(&state.factor, prior, lg, z);
    if !grad.is_finite() {
        return (0.0, true);
    }
    for _ in 0..leapfrog_steps {
        mom += 0.5 * eps * grad;
        lg += eps * mom;
        grad = grad_log_target(&state.factor, prior, lg, z);
        if !grad.is_finite() || !lg.is_finite() {
            warned = true;
            break;
        }
        mom += 0.5 * eps * grad;
    }
    if warned {
        return (0.0, true);
    }
    let h1 = -log_target(&state.factor, prior, lg, z) + 0.5 * mom * mom;
    let accept_prob = if h1.is_finite() {
        (h0 - h1).exp().min(1.0)
    } else {
        0.0
    };
    if rng.random::<f64>() < accept_prob {
        state.g = lg.exp();
    }
    (accept_prob, false)
}

/// Run the full chain: per sweep a random pair partition with exact bivariate
/// Gibbs draws, then the g update. Deterministic given the seed.
pub fn run_chain(data: &RegressionData, prior: &GPrior, config: &SamplerConfig) -> Result<Trace> {
    config.validate()?;
    let p = data.p();
    let n = data.n();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let g0 = match prior {
        GPrior::Fixed { value } => *value,
        _ => n.max(2) as f64,
    };
    let mut state = SelectionState::new(build_factor(data, &vec![false; p])?, g0);
    let mut cache = FactorCache::new(4096);
    let mut tuner = DualAveraging::new(0.1, config.hmc_target_accept);
    let adapt_sweeps = config.adapt_sweeps();

    let mut trace = Trace {
        records: Vec::with_capacity(config.sweeps),
        burnin: config.burnin,
        rb_sum: vec![0.0; p],
        rb_sweeps: 0,
        hmc_accepts: Vec::with_capacity(config.sweeps),
        gradient_warnings: 0,
    };
    let mut rb_sweep = vec![0.0; p];

    for sweep in 0..config.sweeps {
        for (i, j) in pair_partition(p, &mut rng)? {
            let upd = gibbs_pair_update(data, &mut state, (i, j), &mut cache, &mut rng)?;
            rb_sweep[i] = upd.prob_i;
            rb_sweep[j] = upd.prob_j;
        }

        if !prior.is_fixed() {
            let eps = if sweep < adapt_sweeps {
                tuner.current_eps()
            } else {
                tuner.adapted_eps()
            };
            let (accept_prob, warned) =
                hmc_update_g(data, &mut state, prior, eps, config.hmc_leapfrog_steps, &mut rng);
            if warned {
                trace.gradient_warnings += 1;
            }
            if sweep < adapt_sweeps {
                tuner.update(accept_prob);
            }
            trace.hmc_accepts.push(accept_prob);
        }

        let log_kernel = state.factor.log_kernel(state.g, &data.z);
        trace.records.push(SweepRecord {
            gamma: state.factor.gamma.clone(),
            g: state.g,
            log_kernel,
        });
        if sweep >= config.burnin {
            for (acc, &v) in trace.rb_sum.iter_mut().zip(rb_sweep.iter()) {
                *acc += v;
            }
            trace.rb_sweeps += 1;
        }
    }
    Ok(trace)
}
