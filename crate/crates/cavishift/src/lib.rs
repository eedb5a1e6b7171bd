//! Scattering resonances of two-dimensional open dielectric cavities and the
//! resonance shifts induced by small magnetic particles.

pub mod cavity_spectrum;
pub mod geometry;
pub mod linalg;
pub mod oracle_suite;
pub mod particle_ops;
pub mod shift_predictor;
pub mod special_functions;
pub mod validation;
