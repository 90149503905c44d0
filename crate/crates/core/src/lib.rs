//! Dynamics of rational maps on the Riemann sphere, built around one task:
//! given a map whose free critical orbits land on repelling cycles
//! (a Misiurewicz map) inside an explicit coefficient family, find a nearby
//! parameter at which every free critical point sits on a superattracting
//! cycle, and certify it.
//!
//! The crate is organised bottom-up:
//!
//! * [`sphere`] — homogeneous-coordinate points, the chordal metric
//!   (normalised to diameter 2), and degree-exact rational maps.
//! * [`critical`] — Wronskian root finding, stable critical-point labels,
//!   and the simple-critical-point regime.
//! * [`orbit`] — cycle detection, Misiurewicz classification, the
//!   postcritical skeleton with its expansion constants.
//! * [`family`] / [`motion`] — coefficient-perturbation families, Newton
//!   continuation of the skeleton, and the parameter functions built on it.
//! * [`transversality`] — immersion and contact-order measurements.
//! * [`closing`] — the constructive solver: grow critical orbits to large
//!   scale, find covering times, solve the closing equations, certify.
//! * [`distortion`] — standalone numeric checks of the distortion estimates
//!   the solver relies on.
//! * [`dd`] — double-double arithmetic for certificate verification.
//!
//! Everything is deterministic: sampling uses fixed low-discrepancy
//! sequences, and all operations are pure functions of their inputs.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod closing;
pub mod critical;
pub mod dd;
pub mod distortion;
pub mod error;
pub mod family;
pub mod linalg;
pub mod motion;
pub mod orbit;
pub mod poly;
pub mod sampling;
pub mod sphere;
pub mod transversality;

pub use error::DynamicsError;
pub use sphere::{Chart, ChordalDistance, RationalMap, SpherePoint};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;
