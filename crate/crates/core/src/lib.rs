//! Exact nonequilibrium dynamics of one-dimensional interacting bosons in a
//! time-dependent harmonic trap, built on pair-product (Jastrow) states whose
//! parameters follow a scaling flow.
//!
//! The crate covers:
//!
//! - the scaling-factor equation and frequency protocols ([`ermakov`]),
//! - pair-function families and their admissible phase schedules ([`model`]),
//! - hermiticity / flow-consistency diagnostics ([`consistency`]),
//! - the driving Hamiltonians that make the flow exact, their
//!   adiabatic-reference counterparts, and the shortcut-to-adiabaticity
//!   control terms ([`hamiltonian`]),
//! - wavefunction evaluation and an independent Schrödinger-residual check
//!   ([`wavefunction`]),
//! - survival probabilities after quenches, by closed form, deterministic
//!   quadrature, and batched (quasi) Monte Carlo ([`survival`]),
//! - ready-made quench scenarios ([`quench`]) and a JSON-configured CLI
//!   ([`config`], [`cli`]).

pub mod cli;
pub mod config;
pub mod consistency;
pub mod ermakov;
pub mod error;
pub mod hamiltonian;
pub mod model;
pub mod quadrature;
pub mod quench;
pub mod sobol;
pub mod survival;
pub mod wavefunction;

pub use error::{ErmakovError, ModelError, ScenarioError, SurvivalError};
