//! Finite models of measure-preserving `Z^d` actions: averaging operators,
//! Rokhlin towers, heavy-orbit coverings and distribution sculpting.

pub mod averaging;
pub mod cli;
pub mod covering;
pub mod distributions;
pub mod error;
pub mod sculptor;
pub mod space;
pub mod towers;

pub use error::{Error, Result};
