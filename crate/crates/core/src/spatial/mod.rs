//! Spatial variable selection over a voxel grid: per-voxel copulas with a
//! shared time-trend basis, an Ising smoothing prior with external field,
//! and activation/amplitude map estimation.

pub mod chain;
pub mod dataset;
pub mod ising;

pub use chain::{
    default_activation_threshold, fit_spatial, MlsBreakdown, PartitionSettings, SpatialConfig,
    SpatialFit,
};
pub use dataset::{fourier_trend_basis, FmriDataset, Stimulus};
pub use ising::{IsingGraph, IsingPrior, PartitionTable};
