//! Independent oracles: ADK rates, rate-curve averaging, field-free levels,
//! polarizability and lifetimes from time propagation.

pub mod adk;
pub mod average;
pub mod bound;
pub mod lifetime;

pub use adk::{adk_ln_rate, adk_rate, adk_rate_shifted, AdkError, AdkParams};
pub use average::{angular_average, AngularAverage, CurveError, RateCurve};
pub use bound::{
    dense_grid_levels, dense_grid_states, polarizability, polarizability_on, shoot_bound_states,
    shoot_bound_states_with, square_well_levels, BoundError, DenseGrid, GridStates, Polarizability, ShootControls,
};
pub use lifetime::{
    lifetime_by_propagation, write_survival_csv, Lifetime, LifetimeControls, LifetimeError, LifetimeRate, Monitor,
    Progress,
};
