//! Focal instants, Maslov index and spectral index of Morse–Sturm systems
//! `J'' = R(t) J` with initial conditions `J(a) ∈ P`, `J'(a) + S[J(a)] ∈ P^⊥`.

pub mod cli;
pub mod dd;
pub mod error;
pub mod focal;
pub mod integrate;
pub mod lab;
pub mod linalg;
pub mod maslov;
pub mod operator;
pub mod perturb;
pub mod qpoly;
pub mod quadruple;
pub mod real;
pub mod realization;
pub mod spectral;
pub mod symplectic;

pub use error::{Error, Result};
