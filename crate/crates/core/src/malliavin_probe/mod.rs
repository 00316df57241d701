//! Malliavin derivative fields, the double projection D_v(D_vF) and Stein-bound ingredients.

mod fields;
mod lattice;
mod stein;
mod sweeps;

pub use fields::{first_derivative_field, second_derivative_field, Anchor, DerivativeField};
pub use lattice::{dv_dvf, AnchorLattice, DvDvF};
pub use stein::{stein_report, stein_samples, SteinIngredients, SteinSample, MAX_NONPOSITIVE_FRACTION, WINSOR_FRACTION};
pub use sweeps::{first_order_ratios, max_ratio, second_order_ratios, BoundRatio, BoundSweep};
