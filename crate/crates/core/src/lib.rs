//! Sequence labelling with a bidirectional encoder and two decoders: one
//! labels the sentence right to left, the other left to right while reading
//! the first one's states.
//!
//! The guide in `book/` walks through each part; its code blocks run as
//! doc-tests of this crate.

pub mod autodiff;
pub mod data;
pub mod decoders;
pub mod encoder;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod synthetic;
pub mod training;

#[cfg(test)]
mod oracle;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
