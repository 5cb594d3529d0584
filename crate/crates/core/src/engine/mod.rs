//! Training steps for every inference space, the optimizer, the epoch loop and
//! the Gaussian sanity mode.

mod config;
mod gaussian;
mod optim;
mod steps;
mod trainer;

pub use config::{OptimizerKind, Space, TrainConfig};
pub use gaussian::{gaussian_wgd_run, gaussian_wgd_sample, sample_moments, GaussianTarget};
pub use optim::{apply_update, lr_at, nesterov_update};
pub use steps::{
    coordinates_bandwidth, deep_ensembles_step, feature_local, feature_particle_update, feature_wgd_step,
    function_wgd_step, kernel_coordinates, mean_direction, repulsion_basis, repulsion_for, step, weight_wgd_step,
    Batch, Ensemble, FeatureLocal, OptimizerState, StepStats,
};
pub use trainer::{batch_order, EpochRecord, Trainer};

pub(crate) use trainer::EpochAccumulator;
