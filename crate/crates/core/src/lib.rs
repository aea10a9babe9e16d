//! Simulation and estimation engine for measurement-device-independent
//! quantum key distribution (MDI-QKD).
//!
//! The crate is organised bottom-up:
//!
//! * [`optics`] builds the relay's linear-optical network and evaluates
//!   Bell-state-measurement outcome probabilities for phase-randomized
//!   coherent inputs and, exactly, for Fock inputs.
//! * [`protocol`] turns outcome probabilities into yields, error rates,
//!   observed gains/QBERs and the sifting rules.
//! * [`decoy`] recovers per-photon-number yields and error rates from a
//!   grid of decoy observations by a two-stage Poisson inversion.
//! * [`keyrate`] evaluates the asymptotic secret key rate, optimizes the
//!   signal intensity and scans it over distance.
//! * [`hom`] models Hong-Ou-Mandel interference between two independent
//!   phase-randomized weak coherent pulses.
//!
//! Data-parallel loops (distance scans, decoy grids, delay sweeps) run on
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise; see [`Exec`].

pub mod decoy;
mod error;
mod exec;
pub mod hom;
pub mod keyrate;
pub mod optics;
pub mod poisson;
pub mod protocol;
pub mod quadrature;

pub use error::{Error, Result};
pub use exec::Exec;
