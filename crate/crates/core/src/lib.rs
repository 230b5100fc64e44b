//! Schmidt games on rational quadratic varieties.
//!
//! The crate enumerates integer points on quadrics `Q = m`, estimates the geometric
//! constants the winning strategy depends on, plays the game against pluggable
//! opponents and checks badness of the resulting points empirically.

pub mod badness;
pub mod constants;
pub mod error;
pub mod forms;
pub mod game;
pub mod geometry;
pub mod lattice;
pub mod manifest;
pub mod rational;
pub mod separation;

pub use error::{Error, Result};
pub use forms::QuadraticForm;
pub use rational::Rational;

/// Which family of lattice points is being approximated: `m != 0` or `m = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Level,
    Lightcone,
}

impl Variant {
    pub fn for_m(m: &Rational) -> Self {
        use num_traits::Zero;
        if m.is_zero() {
            Variant::Lightcone
        } else {
            Variant::Level
        }
    }
}
