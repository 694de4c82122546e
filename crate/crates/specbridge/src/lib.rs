//! File formats, the verification cache and the command-line driver for
//! the `specbridge_core` compiler.

pub mod bind;
pub mod cache;
pub mod cli;
pub mod formats;
pub mod pipeline;
