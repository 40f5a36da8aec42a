//! Transverse-field Ising spin bus: two end qubits coupled through a chain of
//! tunable rf-SQUID couplers.
//!
//! Energies are in GHz (h = 1), fluxes in units of the flux quantum, currents
//! in nA and inductances in pH.

pub mod circuit_map;
pub mod cli_io;
pub mod eigensolver;
pub mod error;
pub mod experiments;
pub mod hierarchy;
pub mod noise_mc;
pub mod perturbation;
pub mod spin_model;

pub use error::{Error, Result};
