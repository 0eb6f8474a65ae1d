//! Berger-sphere reduction of the spinor flow.
//!
//! The spinor flow starting from a Berger metric with a suitable spinor stays
//! within the two-parameter family of metrics that scale the Hopf fiber by
//! `α` and the horizontal distribution by `β`. This crate evaluates the
//! resulting planar systems (unnormalized and volume-normalized), integrates
//! them with event detection, certifies trapping regions, and checks the
//! results against the explicit solutions.

mod dopri;

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod model;
pub mod phase;
pub mod verify;

pub use dynamics::{
    closed_form, curve_point, curve_speed, curve_tangent, equilibria, initial_state,
    tangency_residual, vector_field, Equilibrium, EquilibriumLocation, Stability,
};
pub use error::{Error, Result};
pub use integrate::{
    integrate, integrate_from, integrate_reduced, IntegratorConfig, ReducedTrajectory, Sample,
    TerminationEvent, TerminationTag, Trajectory,
};
pub use model::{
    energy, energy_density_sixth, geometry_scalars, normalizing_constant, q1_collapse_components,
    q1_normalized_components, spinor_coefficients, volume, FlowKind, FlowParams, GeometryScalars,
    State,
};
pub use phase::{
    containment_report, inward_flux_check, region_contains, region_for_initial, sample_portrait,
    Region,
};
