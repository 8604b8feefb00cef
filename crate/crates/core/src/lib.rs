//! Bloch oscillations of a condensate in a driven optical cavity.
//!
//! The atoms sit in the standing-wave lattice of a single cavity mode and
//! are pushed along it by a constant force. Their motion shifts the cavity
//! resonance, which modulates the lattice depth, which acts back on the
//! atoms. The crate integrates the full mean-field equations, builds the
//! Wannier–Stark basis of the tilted lattice, integrates the reduced ladder
//! model and evaluates the closed-form transport and sideband results.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod ladder;
pub mod config;
pub mod meanfield;
pub mod output;
pub mod scenario;
pub mod special;
pub mod units;
pub mod wannier_stark;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/units.md")]
    mod units {}
    #[doc = include_str!("../../../book/src/wannier-stark.md")]
    mod wannier_stark {}
    #[doc = include_str!("../../../book/src/mean-field.md")]
    mod mean_field {}
    #[doc = include_str!("../../../book/src/ladder.md")]
    mod ladder {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/metrology.md")]
    mod metrology {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
