//! Ising prior over the voxel activation grid: king-move neighborhoods with
//! weight 1 (edge-adjacent) or 1/sqrt(2) (diagonal), an external field, and
//! a tabulated log partition function obtained by thermodynamic integration
//! of prior Gibbs samples.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Masked-lattice geometry plus the external field. Voxels are indexed by
/// their position in the in-mask raster order.
#[derive(Debug, Clone)]
pub struct IsingGraph {
    pub rows: usize,
    pub cols: usize,
    /// neighbor list per in-mask voxel: (voxel index, weight)
    pub neighbors: Vec<Vec<(usize, f64)>>,
    /// external field per in-mask voxel
    pub delta: Vec<f64>,
    /// (row, col) of each in-mask voxel
    pub sites: Vec<(usize, usize)>,
}

impl IsingGraph {
    /// Build the 8-neighbor graph restricted to the mask.
    pub fn new(rows: usize, cols: usize, mask: &[bool], delta_grid: &[f64]) -> Result<Self> {
        if mask.len() != rows * cols || delta_grid.len() != rows * cols {
            return Err(Error::InvalidInput("mask/delta shape mismatch".into()));
        }
        let mut index = vec![usize::MAX; rows * cols];
        let mut sites = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if mask[r * cols + c] {
                    index[r * cols + c] = sites.len();
                    sites.push((r, c));
                }
            }
        }
        if sites.is_empty() {
            return Err(Error::NoInMaskVoxels);
        }
        let diag_w = 1.0 / std::f64::consts::SQRT_2;
        let mut neighbors = vec![Vec::new(); sites.len()];
        for (v, &(r, c)) in sites.iter().enumerate() {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    let flat = nr as usize * cols + nc as usize;
                    if index[flat] == usize::MAX {
                        continue;
                    }
                    let w = if dr == 0 || dc == 0 { 1.0 } else { diag_w };
                    neighbors[v].push((index[flat], w));
                }
            }
        }
        let delta = sites.iter().map(|&(r, c)| delta_grid[r * cols + c]).collect();
        Ok(IsingGraph {
            rows,
            cols,
            neighbors,
            delta,
            sites,
        })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Pr(gamma_i = 1 | rest) = sigma(delta_i + theta sum_j w_ij (2 gamma_j - 1)),
    /// from the identical-neighbor parameterization of the mass function.
    pub fn conditional(&self, theta: f64, gamma: &[bool], i: usize) -> f64 {
        let field: f64 = self.neighbors[i]
            .iter()
            .map(|&(j, w)| w * if gamma[j] { 1.0 } else { -1.0 })
            .sum();
        sigmoid(self.delta[i] + theta * field)
    }

    /// Interaction energy sum over unique neighbor pairs of w_ij I(g_i = g_j).
    pub fn interaction_energy(&self, gamma: &[bool]) -> f64 {
        let mut total = 0.0;
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            for &(j, w) in nbrs {
                if j > i && gamma[i] == gamma[j] {
                    total += w;
                }
            }
        }
        total
    }

    /// External-field energy sum of delta_i gamma_i.
    pub fn field_energy(&self, gamma: &[bool]) -> f64 {
        gamma
            .iter()
            .zip(self.delta.iter())
            .filter(|(&g, _)| g)
            .map(|(_, &d)| d)
            .sum()
    }

    /// One full single-site Gibbs sweep from the prior alone.
    pub fn prior_gibbs_sweep<R: Rng + ?Sized>(&self, theta: f64, gamma: &mut [bool], rng: &mut R) {
        for i in 0..self.len() {
            let pr = self.conditional(theta, gamma, i);
            gamma[i] = rng.random::<f64>() < pr;
        }
    }
}

/// Tabulated log Z(theta) - log Z(0) on a theta grid, with the derivative
/// estimates E_theta[sum w_ij I(gamma_i = gamma_j)] that produced it.
#[derive(Debug, Clone)]
pub struct PartitionTable {
    pub thetas: Vec<f64>,
    pub log_z_diff: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl PartitionTable {
    /// Thermodynamic integration: at each grid point the mean interaction
    /// energy under the prior is estimated by single-site Gibbs, then the
    /// derivative curve is integrated by the trapezoid rule. The anchor
    /// log Z(0) = sum_i log(1 + e^{delta_i}) is analytic and cancels in
    /// differences.
    pub fn tabulate(
        graph: &IsingGraph,
        theta_max: f64,
        grid_points: usize,
        sweeps: usize,
        burnin: usize,
        seed: u64,
    ) -> Self {
        assert!(grid_points >= 2 && burnin < sweeps);
        let thetas: Vec<f64> = (0..grid_points)
            .map(|k| theta_max * k as f64 / (grid_points - 1) as f64)
            .collect();
        let derivatives: Vec<f64> = thetas
            .iter()
            .enumerate()
            .map(|(k, &theta)| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let mut gamma: Vec<bool> = (0..graph.len())
                    .map(|i| rng.random::<f64>() < sigmoid(graph.delta[i]))
                    .collect();
                let mut acc = 0.0;
                for sweep in 0..sweeps {
                    graph.prior_gibbs_sweep(theta, &mut gamma, &mut rng);
                    if sweep >= burnin {
                        acc += graph.interaction_energy(&gamma);
                    }
                }
                acc / (sweeps - burnin) as f64
            })
            .collect();
        let mut log_z_diff = vec![0.0; grid_points];
        for k in 1..grid_points {
            log_z_diff[k] = log_z_diff[k - 1]
                + 0.5 * (derivatives[k - 1] + derivatives[k]) * (thetas[k] - thetas[k - 1]);
        }
        PartitionTable {
            thetas,
            log_z_diff,
            derivatives,
        }
    }

    /// Linear interpolation of log Z(theta) - log Z(0).
    pub fn log_z_diff_at(&self, theta: f64) -> f64 {
        let k = self
            .thetas
            .partition_point(|&t| t < theta)
            .clamp(1, self.thetas.len() - 1);
        let (t0, t1) = (self.thetas[k - 1], self.thetas[k]);
        let w = ((theta - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.log_z_diff[k - 1] * (1.0 - w) + self.log_z_diff[k] * w
    }
}

/// The spatial smoothing prior: geometry, current interaction strength and
/// the partition table backing the theta update.
#[derive(Debug, Clone)]
pub struct IsingPrior {
    pub graph: IsingGraph,
    pub theta: f64,
    pub theta_max: f64,
    pub table: PartitionTable,
}
