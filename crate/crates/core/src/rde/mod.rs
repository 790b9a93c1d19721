//! Rough differential equations on embedded manifolds.

pub mod davie;
pub mod integrator;
pub mod logode;
pub mod path;

pub use davie::{
    coordinate_and_quadratic_tests, davie_residual, dyadic_windows,
    dyadic_windows_until, window_residual, DavieReport,
    TestFunctions,
};
pub use integrator::{
    concatenate, integrate_one_form, lift_through_connection, pushforward, solve_on_grid, solve_rde,
    BundleConnectionForm, Diffeomorphism, Piece, RoughIntegrator, SolverOptions,
};
pub use logode::{log_ode_step, log_ode_step_bounded, LogOdeField, Step};
pub use path::{BlowUp, RDEPath};
