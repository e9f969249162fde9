//! Model reduction for coupled enzymatic (Michaelis–Menten type) reaction
//! networks under the total quasi-steady-state approximation.
//!
//! The crate assembles the full mass-action ODE system of a protein
//! interaction network with explicit intermediate complexes, derives the
//! reduced model living on the slow manifold (one equation per protein),
//! and quantifies when the reduction is trustworthy.

pub mod cli;
pub mod full;
pub mod matrix;
pub mod network;
pub mod ode;
pub mod reduction;
pub mod validity;
