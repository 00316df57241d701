//! Mergeable ensemble statistics, densities, distances to N(0,1) and rate fits.

mod accumulator;
mod density;
mod rates;
mod variance;

pub use accumulator::{self_normalize, EnsembleAccumulator, Moments, ReplicaSample, DEFAULT_SAMPLE_CAP};
pub use density::{
    analytic_density, default_bandwidth, eval_grid, kde_density, kde_eval, ks_statistic, std_normal_pdf,
    sup_distance, tv_distance, Bandwidth, DensityEstimate, MIN_SAMPLES,
};
pub use rates::{rate_fit, RateFit};
pub use variance::{solve_volterra, variance_check, VarianceOracle, VarianceReport, VolterraSolution};
