pub mod chain;
pub mod config;
pub mod direct;
pub mod eigen;
pub mod error;
pub mod fixtures;
pub mod green;
pub mod inverse;
pub mod io;
pub mod par;
pub mod sweep;
pub mod util;

#[cfg(test)]
mod testutil;
