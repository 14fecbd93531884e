//! Two-photon interference from a Stark-gated quantum-dot single-photon source.
//!
//! [`dip`] computes the central coincidence area analytically, [`montecarlo`]
//! simulates the same experiment photon by photon, and [`analysis`] turns
//! correlation histograms into normalized peak areas. The guide in `book/`
//! walks through each piece; its snippets run as doc-tests of this crate.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
mod cheb;
pub mod config;
pub mod constants;
pub mod dip;
pub mod emitter;
pub mod error;
pub mod fit;
pub mod interference;
pub mod montecarlo;
pub mod packet;
pub mod plot;
pub mod quadrature;
pub mod relations;
pub mod waveform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/relations.md")]
    mod relations {}
    #[doc = include_str!("../../../book/src/dip.md")]
    mod dip {}
    #[doc = include_str!("../../../book/src/montecarlo.md")]
    mod montecarlo {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/fit.md")]
    mod fit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
