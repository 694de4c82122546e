//! Independent oracles and generators shared by the integration tests and
//! the acceptance suite.
#![allow(dead_code)]

pub mod systems;
pub mod networks;
pub mod formulas;
