//! Incompressible MHD on a periodic box coupled to a kinetic particle
//! species, plus the linear-theory checks that validate the solver.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`], [`spectral`], [`fields`]: periodic grids, FFT workspace,
//!   Leray projection, Sobolev norms, vector identities.
//! - [`particles`]: particle ensembles, the characteristic pusher,
//!   moment deposition, Maxwellian sampling, phase-space histograms.
//! - [`mhd`]: the fluid state and its integrating-factor Heun stepper.
//! - [`sim`]: coupled Strang-split runs, diagnostics, conservation and
//!   energy-balance checks, decay fitting.
//! - [`linear`]: heat-semigroup decay laws, radial quadrature for
//!   whole-space Gaussian data, Duhamel reconstruction.
//! - [`picard`]: frozen-coefficient iteration of the coupled system.
//! - [`config`], [`output`]: flat key = value configs, CSV/manifest/
//!   checkpoint writers.

pub mod config;
pub mod error;
pub mod fields;
pub mod grid;
pub mod linear;
pub mod mhd;
pub mod output;
pub mod particles;
pub mod picard;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod vec3;

pub use error::{Error, Result};
