//! Angles, lattice truncation and the wrapped normal density on the p-torus.

mod angle;
mod density;
mod lattice;
mod linalg;

pub use angle::{
    angular_separation, chord, circular_correlation, circular_mean, column, mean_resultant_length, to_signed,
    wrap, wrap_unchecked, AngleVector, MEAN_RESULTANT_TOL,
};
pub use density::{
    log_likelihood, log_normal_density, log_wrapped_density, log_wrapped_density_with, unwrapped_distance_bound,
    unwrapped_distance_sq, wrapped_density, EllipticalGenerator, NormalGenerator, WrappedModelParams,
};
pub(crate) use density::{center, log_wrapped_density_unchecked};
pub use lattice::{LatticeBox, LatticeVector, LATTICE_CAP};
pub use linalg::{scatter_divergence, Spd};

/// Largest torus dimension supported; fixed-size buffers in the hot loops rely on it.
pub const MAX_DIM: usize = 16;
