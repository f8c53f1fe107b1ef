// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod potential;
pub mod propagate;
pub mod reference;
pub mod resonance;
pub mod spectral;

mod ode;

pub use ode::StepStats;
