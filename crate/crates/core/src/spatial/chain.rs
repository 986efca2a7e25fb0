//! Per-voxel selection copulas with a shared trend basis, the single-site
//! sampler over the activation grid, Metropolis updates for g and theta, and
//! activation/amplitude map estimation with an in-sample log-score breakdown.
//!
//! The voxel correlation matrix R = S (I + d W W' + gamma g x x'/x'x) S is
//! handled through the low-rank factor G = [sqrt(d) W | gamma sqrt(g/x'x) x]:
//! log|I + GG'| = log|I + G'G| and (I + GG')^{-1} = I - G (I + G'G)^{-1} G',
//! so every kernel evaluation costs O(T m).

use super::dataset::FmriDataset;
use super::ising::{IsingGraph, PartitionTable};
use crate::error::{Error, Result};
use crate::margins::{fit_margin, MarginKind, MarginModel};
use crate::priors::GPrior;
use crate::stats::{self, norm_log_pdf};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Activation threshold implied by a chi-square(1) deviance cutoff at
/// p = 0.05: the probability solving -2 log((1-p)/p) = q_{0.95}.
pub fn default_activation_threshold() -> f64 {
    let q = ChiSquared::new(1.0).unwrap().inverse_cdf(0.95);
    1.0 / (1.0 + (-q / 2.0).exp())
}

#[derive(Debug, Clone)]
pub struct PartitionSettings {
    pub grid_points: usize,
    pub sweeps: usize,
    pub burnin: usize,
}

impl Default for PartitionSettings {
    fn default() -> Self {
        PartitionSettings {
            grid_points: 46,
            sweeps: 2_000,
            burnin: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpatialConfig {
    pub sweeps: usize,
    pub burnin: usize,
    pub seed: u64,
    pub g_prior: GPrior,
    pub margin: MarginKind,
    pub theta_max: f64,
    pub threshold: f64,
    pub partition: PartitionSettings,
    /// Post-burn-in draws kept for the log-score evaluation are thinned to
    /// roughly this many.
    pub mls_draws: usize,
}

impl SpatialConfig {
    pub fn new(sweeps: usize, burnin: usize, seed: u64, g_prior: GPrior) -> Self {
        SpatialConfig {
            sweeps,
            burnin,
            seed,
            g_prior,
            margin: MarginKind::Kde,
            theta_max: 0.45,
            threshold: default_activation_threshold(),
            partition: PartitionSettings::default(),
            mls_draws: 200,
        }
    }
}

/// Shared trend-core quantities: the basis, scaled column norms and the
/// Cholesky factors reused by every voxel.
struct TrendCore {
    w: DMatrix<f64>,
    d: f64,
    /// d * ||w_t||^2 per time point
    dwnorm2: Vec<f64>,
    /// Cholesky of A = I + d W'W
    chol_a: Cholesky<f64, Dyn>,
    logdet_a: f64,
    /// Cholesky of W'W + I/d, for coefficient posterior means
    chol_wtw: Cholesky<f64, Dyn>,
}

/// Per-voxel cached pieces.
struct VoxelData {
    x: DVector<f64>,
    z: DVector<f64>,
    xtx: f64,
    /// W'x
    wx: DVector<f64>,
}

fn build_core(w: &DMatrix<f64>, d: f64) -> TrendCore {
    let t_len = w.nrows();
    let m = w.ncols();
    let dwnorm2: Vec<f64> = (0..t_len).map(|t| d * w.row(t).norm_squared()).collect();
    let wtw = w.tr_mul(w);
    let a = DMatrix::identity(m, m) + &wtw * d;
    let chol_a = Cholesky::new(a).expect("I + d W'W is positive definite");
    let logdet_a = 2.0 * chol_a.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let ridge = DMatrix::identity(m, m) / d.max(1e-12);
    let chol_wtw = Cholesky::new(wtw + ridge).expect("W'W + I/d is positive definite");
    TrendCore {
        w: w.clone(),
        d,
        dwnorm2,
        chol_a,
        logdet_a,
        chol_wtw,
    }
}

/// 1 + d ||w_t||^2 + gamma g x_t^2 / x'x, the inverse squared scale at t.
#[inline]
fn s2inv(core: &TrendCore, vox: &VoxelData, active: bool, g: f64, t: usize) -> f64 {
    let mut v = 1.0 + core.dwnorm2[t];
    if active {
        v += g * vox.x[t] * vox.x[t] / vox.xtx;
    }
    v
}

/// log phi(z; 0, R(x, W, gamma, g)) + (T/2) log(2 pi).
fn voxel_log_kernel(core: &TrendCore, vox: &VoxelData, active: bool, g: f64) -> f64 {
    let t_len = vox.z.len();
    let d = core.d;
    let mut sum_log = 0.0;
    let mut vtv = 0.0;
    let mut v = DVector::zeros(t_len);
    for t in 0..t_len {
        let si2 = s2inv(core, vox, active, g, t);
        sum_log += si2.ln();
        v[t] = vox.z[t] * si2.sqrt();
        vtv += v[t] * v[t];
    }
    let u = core.w.tr_mul(&v) * d.sqrt();

    let (logdet_c, reduction) = if !active {
        let c = core.chol_a.solve(&u);
        (core.logdet_a, u.dot(&c))
    } else {
        let b = &vox.wx * (d * g / vox.xtx).sqrt();
        let e = (g / vox.xtx).sqrt() * vox.x.dot(&v);
        let cb = core.chol_a.solve(&b);
        let schur = (1.0 + g) - b.dot(&cb);
        let cu = core.chol_a.solve(&u);
        let y2 = (e - b.dot(&cu)) / schur;
        let y1 = cu - &cb * y2;
        (core.logdet_a + schur.ln(), u.dot(&y1) + e * y2)
    };
    let log_det_r = logdet_c - sum_log;
    let quad = vtv - reduction;
    -0.5 * (log_det_r + quad)
}

/// Posterior mean of the stimulus amplitude given activation:
/// g/(1+g) (x'x)^{-1} x' S_1^{-1} z.
fn amplitude_given_active(core: &TrendCore, vox: &VoxelData, g: f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..vox.z.len() {
        acc += vox.x[t] * vox.z[t] * s2inv(core, vox, true, g, t).sqrt();
    }
    g / (1.0 + g) / vox.xtx * acc
}

/// Fitted maps plus chain diagnostics.
#[derive(Debug, Clone)]
pub struct SpatialFit {
    pub rows: usize,
    pub cols: usize,
    pub mask: Vec<bool>,
    /// Rao-Blackwell activation probabilities on the full grid (0 outside
    /// the mask).
    pub probability: Vec<f64>,
    /// Mixture amplitude estimates on the full grid.
    pub amplitude: Vec<f64>,
    /// probability >= threshold
    pub binary: Vec<bool>,
    pub threshold: f64,
    /// per-sweep (g, theta, active-count)
    pub trace: Vec<(f64, f64, usize)>,
    pub g_accept_rate: f64,
    pub theta_accept_rate: f64,
    pub mls: MlsBreakdown,
}

/// Mean in-sample log scores split by classification, plus the posterior
/// size summary.
#[derive(Debug, Clone)]
pub struct MlsBreakdown {
    pub active: f64,
    pub inactive: f64,
    pub overall: f64,
    pub e_q: f64,
    pub sd_q: f64,
}

struct RetainedDraw {
    gamma: Vec<bool>,
    g: f64,
}

fn margin_kind_for(config_kind: MarginKind, t_len: usize) -> MarginKind {
    match config_kind {
        MarginKind::Kde if t_len < 30 => MarginKind::Empirical,
        k => k,
    }
}

/// Fit the spatial model. A precomputed partition table for the same graph
/// geometry may be supplied; otherwise one is tabulated from the config.
pub fn fit_spatial(
    dataset: &FmriDataset,
    config: &SpatialConfig,
    table: Option<&PartitionTable>,
) -> Result<SpatialFit> {
    if config.burnin >= config.sweeps {
        return Err(Error::InvalidInput("burnin must be below sweeps".into()));
    }
    let n_vox = dataset.voxel_count();
    let graph = IsingGraph::new(dataset.rows, dataset.cols, &dataset.mask, &dataset.delta)?;
    let owned_table;
    let table = match table {
        Some(t) => t,
        None => {
            owned_table = PartitionTable::tabulate(
                &graph,
                config.theta_max,
                config.partition.grid_points,
                config.partition.sweeps,
                config.partition.burnin,
                config.seed ^ 0x7ab1e,
            );
            &owned_table
        }
    };

    // margins and projections per voxel, in parallel
    let core = build_core(&dataset.w, dataset.d);
    let kind = margin_kind_for(config.margin, dataset.t_len);
    let margins: Vec<MarginModel> = (0..n_vox)
        .into_par_iter()
        .map(|v| fit_margin(&dataset.series[v], kind))
        .collect::<Result<Vec<_>>>()?;
    let voxels: Vec<VoxelData> = (0..n_vox)
        .into_par_iter()
        .map(|v| {
            let z = DVector::from_vec(margins[v].pit_transform(&dataset.series[v]));
            let x = DVector::from_vec(dataset.stimulus.for_voxel(v).to_vec());
            let xtx = x.norm_squared();
            VoxelData {
                wx: dataset.w.tr_mul(&x),
                x,
                z,
                xtx,
            }
        })
        .collect();
    let margin_logdens: Vec<f64> = (0..n_vox)
        .into_par_iter()
        .map(|v| {
            dataset.series[v]
                .iter()
                .map(|&y| margins[v].log_density(y))
                .sum()
        })
        .collect();

    run_spatial_chain(dataset, config, &graph, table, &core, &voxels, &margin_logdens)
}

#[allow(clippy::too_many_arguments)]
fn run_spatial_chain(
    dataset: &FmriDataset,
    config: &SpatialConfig,
    graph: &IsingGraph,
    table: &PartitionTable,
    core: &TrendCore,
    voxels: &[VoxelData],
    margin_logdens: &[f64],
) -> Result<SpatialFit> {
    let n_vox = voxels.len();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    // gamma = 0 kernels are g-independent
    let k0: Vec<f64> = voxels
        .par_iter()
        .map(|v| voxel_log_kernel(core, v, false, 0.0))
        .collect();

    let mut gamma = vec![false; n_vox];
    let mut g = match &config.g_prior {
        GPrior::Fixed { value } => *value,
        _ => dataset.t_len as f64,
    };
    let mut theta = 0.5 * config.theta_max;
    let mut theta_scale = 0.05f64;

    let mut rb = vec![0.0f64; n_vox];
    let mut amp = vec![0.0f64; n_vox];
    let mut rb_count = 0usize;
    let mut trace = Vec::with_capacity(config.sweeps);
    let mut retained: Vec<RetainedDraw> = Vec::new();
    let post_sweeps = config.sweeps - config.burnin;
    let thin = (post_sweeps / config.mls_draws.max(1)).max(1);
    let mut g_accepts = 0.0;
    let mut g_steps = 0usize;
    let mut theta_accepts = 0.0;
    let mut theta_steps = 0usize;

    for sweep in 0..config.sweeps {
        // per-sweep kernels and amplitudes at the current g
        let k1: Vec<f64> = voxels
            .par_iter()
            .map(|v| voxel_log_kernel(core, v, true, g))
            .collect();
        let amp1: Vec<f64> = voxels
            .par_iter()
            .map(|v| amplitude_given_active(core, v, g))
            .collect();

        // (i) single-site raster sweep
        let keep = sweep >= config.burnin;
        for i in 0..n_vox {
            let field: f64 = graph.neighbors[i]
                .iter()
                .map(|&(j, w)| w * if gamma[j] { 1.0 } else { -1.0 })
                .sum();
            let logit = graph.delta[i] + theta * field + k1[i] - k0[i];
            let pr1 = 1.0 / (1.0 + (-logit).exp());
            gamma[i] = rng.random::<f64>() < pr1;
            if keep {
                rb[i] += pr1;
                amp[i] += pr1 * amp1[i];
            }
        }
        if keep {
            rb_count += 1;
        }

        // (ii) g update by independence MH with a Laplace proposal
        if !config.g_prior.is_fixed() {
            let (accepted, new_g) = update_g(core, voxels, &gamma, &config.g_prior, g, &mut rng);
            g_accepts += accepted;
            g_steps += 1;
            g = new_g;
        }

        // (iii) theta update by reflected random walk
        {
            let energy = graph.interaction_energy(&gamma);
            let step: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * theta_scale;
            let mut proposal = theta + step;
            for _ in 0..8 {
                if proposal < 0.0 {
                    proposal = -proposal;
                } else if proposal > config.theta_max {
                    proposal = 2.0 * config.theta_max - proposal;
                } else {
                    break;
                }
            }
            proposal = proposal.clamp(0.0, config.theta_max);
            let log_alpha = (proposal - theta) * energy
                - (table.log_z_diff_at(proposal) - table.log_z_diff_at(theta));
            let alpha = log_alpha.exp().min(1.0);
            if rng.random::<f64>() < alpha {
                theta = proposal;
            }
            theta_accepts += alpha;
            theta_steps += 1;
            if sweep < config.burnin {
                let rate = 1.0 / (1.0 + sweep as f64).powf(0.7);
                theta_scale = (theta_scale.ln() + rate * (alpha - 0.44)).exp();
                theta_scale = theta_scale.clamp(1e-4, config.theta_max.max(1e-3));
            }
        }

        trace.push((g, theta, gamma.iter().filter(|&&b| b).count()));
        if keep && (sweep - config.burnin) % thin == 0 {
            retained.push(RetainedDraw {
                gamma: gamma.clone(),
                g,
            });
        }
    }

    // maps on the full grid
    let denom = rb_count.max(1) as f64;
    let flat = |v: usize| -> usize {
        let (r, c) = dataset.sites[v];
        r * dataset.cols + c
    };
    let mut probability = vec![0.0; dataset.rows * dataset.cols];
    let mut amplitude = vec![0.0; dataset.rows * dataset.cols];
    for v in 0..n_vox {
        probability[flat(v)] = rb[v] / denom;
        amplitude[flat(v)] = amp[v] / denom;
    }
    let binary: Vec<bool> = probability.iter().map(|&p| p >= config.threshold).collect();

    let voxel_mls = in_sample_voxel_mls(dataset, core, voxels, margin_logdens, &retained);
    let mut active_scores = Vec::new();
    let mut inactive_scores = Vec::new();
    for v in 0..n_vox {
        if binary[flat(v)] {
            active_scores.push(voxel_mls[v]);
        } else {
            inactive_scores.push(voxel_mls[v]);
        }
    }
    let qs: Vec<f64> = trace[config.burnin..]
        .iter()
        .map(|&(_, _, q)| q as f64)
        .collect();
    let mls = MlsBreakdown {
        active: if active_scores.is_empty() {
            f64::NAN
        } else {
            stats::mean(&active_scores)
        },
        inactive: if inactive_scores.is_empty() {
            f64::NAN
        } else {
            stats::mean(&inactive_scores)
        },
        overall: stats::mean(&voxel_mls),
        e_q: stats::mean(&qs),
        sd_q: if qs.len() > 1 { stats::variance(&qs).sqrt() } else { 0.0 },
    };

    Ok(SpatialFit {
        rows: dataset.rows,
        cols: dataset.cols,
        mask: dataset.mask.clone(),
        probability,
        amplitude,
        binary,
        threshold: config.threshold,
        trace,
        g_accept_rate: if g_steps > 0 { g_accepts / g_steps as f64 } else { 1.0 },
        theta_accept_rate: if theta_steps > 0 {
            theta_accepts / theta_steps as f64
        } else {
            0.0
        },
        mls,
    })
}

/// Summed active-voxel log target for the g update, on the log-g scale.
/// Inactive kernels are g-free constants and drop out of the ratios.
fn g_log_target(
    core: &TrendCore,
    voxels: &[VoxelData],
    gamma: &[bool],
    prior: &GPrior,
    log_g: f64,
) -> f64 {
    let g = log_g.exp();
    let lp = match prior.log_density(g) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    let parts: Vec<f64> = voxels
        .par_iter()
        .zip(gamma.par_iter())
        .filter(|(_, &a)| a)
        .map(|(v, _)| voxel_log_kernel(core, v, true, g))
        .collect();
    parts.iter().sum::<f64>() + lp + log_g
}

fn update_g<R: Rng + ?Sized>(
    core: &TrendCore,
    voxels: &[VoxelData],
    gamma: &[bool],
    prior: &GPrior,
    g: f64,
    rng: &mut R,
) -> (f64, f64) {
    let f = |lg: f64| g_log_target(core, voxels, gamma, prior, lg);
    let h = 1e-4;
    let mut mode = g.ln();
    let mut curvature = f64::NAN;
    let mut ok = false;
    for _ in 0..25 {
        let (fm, f0, fp) = (f(mode - h), f(mode), f(mode + h));
        if !(fm.is_finite() && f0.is_finite() && fp.is_finite()) {
            ok = false;
            break;
        }
        let grad = (fp - fm) / (2.0 * h);
        let curv = (fp - 2.0 * f0 + fm) / (h * h);
        // uphill unit steps carry the search through convex flanks until the
        // concave neighborhood of the mode is reached
        let step = if curv < -1e-12 {
            curvature = curv;
            ok = true;
            (-grad / curv).clamp(-2.0, 2.0)
        } else {
            ok = false;
            grad.signum()
        };
        mode += step;
        if !mode.is_finite() || mode.abs() > 60.0 {
            ok = false;
            break;
        }
        if ok && step.abs() < 1e-8 {
            break;
        }
    }

    let lg0 = g.ln();
    if ok && curvature.is_finite() && curvature < -1e-12 {
        // independence proposal: Student t(4) at the mode with Laplace scale;
        // the heavy tails keep the q-ratio benign when the chain starts far
        // from the mode, where a Gaussian proposal would pin it in place
        const NU: f64 = 4.0;
        let scale = (-1.0 / curvature).sqrt();
        let tdraw = {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let chi2: f64 = (0..NU as usize)
                .map(|_| {
                    let u: f64 = rng.sample(rand_distr::StandardNormal);
                    u * u
                })
                .sum();
            z / (chi2 / NU).sqrt()
        };
        let prop = mode + scale * tdraw;
        let logq = |x: f64| {
            let t = (x - mode) / scale;
            -(NU + 1.0) / 2.0 * (1.0 + t * t / NU).ln() - scale.ln()
        };
        let log_alpha = f(prop) - f(lg0) + logq(lg0) - logq(prop);
        let alpha = log_alpha.exp().min(1.0);
        if alpha.is_finite() && rng.random::<f64>() < alpha {
            return (alpha, prop.exp());
        }
        return (if alpha.is_finite() { alpha } else { 0.0 }, g);
    }

    // fallback: random walk on log g with scale 0.1
    let prop = lg0 + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let log_alpha = f(prop) - f(lg0);
    let alpha = log_alpha.exp().min(1.0);
    if alpha.is_finite() && rng.random::<f64>() < alpha {
        (alpha, prop.exp())
    } else {
        (if alpha.is_finite() { alpha } else { 0.0 }, g)
    }
}

/// Mean in-sample log predictive density per voxel: a mixture over retained
/// draws of plug-in Gaussian components in pseudo-data space with joint
/// posterior-mean trend/amplitude coefficients, mapped back through the
/// margin Jacobian.
fn in_sample_voxel_mls(
    dataset: &FmriDataset,
    core: &TrendCore,
    voxels: &[VoxelData],
    margin_logdens: &[f64],
    retained: &[RetainedDraw],
) -> Vec<f64> {
    let t_len = dataset.t_len;
    (0..voxels.len())
        .into_par_iter()
        .map(|vi| {
            let vox = &voxels[vi];
            let mut comp = vec![Vec::with_capacity(retained.len()); t_len];
            for draw in retained {
                let active = draw.gamma[vi];
                let g = draw.g;
                let s2: Vec<f64> = (0..t_len)
                    .map(|t| s2inv(core, vox, active, g, t))
                    .collect();
                let v = DVector::from_iterator(
                    t_len,
                    vox.z.iter().zip(s2.iter()).map(|(&z, &si2)| z * si2.sqrt()),
                );
                let wv = core.w.tr_mul(&v);
                let (alpha_hat, beta_hat) = if active {
                    // block solve of [[W'W + I/d, W'x], [x'W, x'x (1+g)/g]]
                    let cb = core.chol_wtw.solve(&vox.wx);
                    let schur = vox.xtx * (1.0 + g) / g - vox.wx.dot(&cb);
                    let cu = core.chol_wtw.solve(&wv);
                    let xv = vox.x.dot(&v);
                    let beta = (xv - vox.wx.dot(&cu)) / schur;
                    let alpha = cu - &cb * beta;
                    (alpha, beta)
                } else {
                    (core.chol_wtw.solve(&wv), 0.0)
                };
                let trend = &core.w * alpha_hat;
                for t in 0..t_len {
                    let mean_zt = trend[t] + if active { vox.x[t] * beta_hat } else { 0.0 };
                    let st = s2[t].powf(-0.5);
                    let mu = st * mean_zt;
                    comp[t].push(norm_log_pdf((vox.z[t] - mu) / st) - st.ln());
                }
            }
            let lnk = (retained.len() as f64).ln();
            let pseudo_score: f64 = (0..t_len)
                .map(|t| stats::logsumexp(&comp[t]) - lnk - norm_log_pdf(vox.z[t]))
                .sum();
            (pseudo_score + margin_logdens[vi]) / t_len as f64
        })
        .collect()
}
