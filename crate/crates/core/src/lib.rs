//! Greedy approximation in finite-dimensional quasi-Banach spaces.

pub mod basis;
pub mod errors;
pub mod io;
pub mod optimize;
pub mod budget;
pub mod catalog;
pub mod cli;
pub mod constants;
mod error;
pub mod scalar;
pub mod sets;
pub mod spaces;
pub mod tga;
pub mod verify;

pub use error::{Error, Result};
