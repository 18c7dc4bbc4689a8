//! Simulation and analysis toolkit for a flux-driven SQUID-resonator
//! coherent microwave pulse generator.
//!
//! A digital flux drive quenches the resonator across a half-integer flux
//! boundary; the resonator field, displaced from its new equilibrium, leaks
//! out as a coherent exponentially decaying pulse. The modules cover the
//! circuit model ([`circuit`]), drive construction ([`fluxdrive`]), the
//! emission dynamics ([`emission`]), multi-pulse superposition
//! ([`interference`]), frequency combs ([`comb`]), linewidth analysis
//! ([`spectral`]), dispersive qubit readout ([`readout`]) and qubit drive
//! estimates ([`drive`]).

pub mod circuit;
pub mod comb;
pub mod drive;
pub mod emission;
pub mod error;
pub mod fit;
pub mod fluxdrive;
pub mod interference;
pub mod io;
pub mod readout;
pub mod reference;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
