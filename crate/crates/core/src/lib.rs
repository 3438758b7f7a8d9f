//! Pseudo-spectral tools for the planar Beltrami equation on periodic grids.
//!
//! The crate samples compactly supported data on a square torus and applies
//! the Beurling and Cauchy transforms as Fourier multipliers. On top of that
//! it solves the Beltrami resolvent by Neumann iteration, builds principal
//! solutions, and measures Muckenhoupt characteristics of Jacobian weights
//! together with Sobolev, Dini and boundary Besov norms.

pub mod beltrami;
pub mod domains;
pub mod error;
pub mod grid;
pub mod interp;
pub mod norms;
pub mod operators;
pub mod weights;

pub use beltrami::{
    evaluate_derivatives, evaluate_map, inverse_jacobian_weight, invert_map, iteration_cap,
    map_curve, principal_solution, resolvent, resolvent_domain, resolvent_domain_run,
    resolvent_run, sigma_field, sobolev_size, BeltramiSolution, Dilatation, InvariantReport,
    ResolventRun, DEFAULT_TOL,
};
pub use domains::{
    boundary_normal, bp_norm, bp_norm_of_curve, domain_mask, BoundaryCurve, DomainSpec,
};
pub use error::{Error, Result};
pub use grid::{
    d_z, d_zbar, fourier_forward, fourier_inverse, load_field, save_field, ComplexField,
    PeriodicGrid, RealField, Spectrum,
};
pub use norms::{
    besov_boundary_norm, dini_norm, mixed_derivative, sobolev_norm, DiniNorm, NormSpec, Region,
};
pub use operators::{beurling, cauchy, compress_beurling, DomainMask};
pub use weights::{
    ap_characteristic, area_distortion_check, change_of_variables, moser_certificate,
    preimage_bounding_square, rh_characteristic, ApReport, AreaDistortion, Cube, CubeFamily,
    DistortionRegime, LevelStat, MoserCertificate, Square,
};

pub use num_complex::Complex64;
