//! Compiler core for problem-space neural network specifications.
//!
//! The pipeline is: [`frontend`] (lex, parse, resolve) → [`typecheck`] →
//! [`nbe`] (normalisation by evaluation) and from there into one of three
//! backends: [`loss`] (differentiable-logic loss programs), [`verify`]
//! (embedding-space query trees plus a built-in exact solver) and [`itp`]
//! (proof-assistant interface text). [`qelim`] provides the exact linear
//! arithmetic used by the query backend, [`network`] the dense feedforward
//! networks both backends run, and [`sim`] an executable model of the
//! wind-controller system used for end-to-end checks.
//!
//! The crate is `no_std` and only needs `alloc`. File IO, JSON formats,
//! caching and the command-line driver live in the `specbridge` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod frontend;
pub mod itp;
pub mod loss;
pub mod nbe;
pub mod network;
pub mod qelim;
pub mod rational;
pub mod scalar;
pub mod sim;
pub mod typecheck;
pub mod verify;

pub use frontend::{parse_program, Program};
pub use rational::Q;
pub use typecheck::{check_program, TypedProgram};
