//! Simulation design, accuracy metrics, the Monte Carlo harness, bandwidth
//! monitoring and one-dimensional population quantities.

mod fixtures;
mod influence;
mod metrics;
mod monitor;
mod monte_carlo;
mod scenario;
mod seeds;
mod unwrapped_scale;

pub use fixtures::{protein_like, rna_like, LabelledTable};
pub use influence::{influence_curve, influence_location, finite_difference_influence, LocationFunctional, LocationMixture, InfluenceSetup};
pub use metrics::{quartiles, scatter_divergence, scatter_error, sqrt_angular_separation, Quartiles};
pub use monitor::{circular_scale, default_monitor_grid, monitor_bandwidth, MonitorResult};
pub use monte_carlo::{
    calibrate_smoothing, default_calibration_grid, log_spaced, run_monte_carlo, EstimatorSummary, MonteCarloConfig,
    MonteCarloReport, SmoothingPolicy, TrialRecord,
};
pub use scenario::{
    generate_contaminated, minor_direction, random_correlation, sample_wrapped_normal, ContaminatedSample,
    ContaminationSpec, Scenario,
};
pub use seeds::{derive_seed, mix_seed, trial_rng};
pub use unwrapped_scale::{sigma_unwrapped, wrapped_normal_1d};
