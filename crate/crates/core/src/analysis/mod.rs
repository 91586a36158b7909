//! Stability regions, strong error estimates and convergence fits.

pub mod quadrature;
pub mod stability;
pub mod strong;

pub use stability::{
    continuous_stability_boundary, is_stable_moment, scan_stability_region, stability_point,
    state_p_stable, transfer_moment, Lattice, StabilityPoint, StabilityRegion, StateStability,
    TransferPolynomial,
};
pub use strong::{
    compare_schemes, convergence_study, fit_strong_order, monte_carlo_error, sup_squared_error,
    ConvergenceFit, ConvergenceStudy, ErrorStats,
};
