//! Steganographic inheritance for digital images.
//!
//! At generation time a binary trait projected from a parent image is
//! invisibly embedded into its offspring in the DCT domain of the
//! luminance channel. At enquiry time the trait is blindly extracted from
//! a query and Hamming-matched against candidates in a pool to nominate
//! the parent, or abstain when nothing is credible. The crate also ships
//! the closed-form accuracy model for this retrieval process, a
//! 14-operation processing channel for robustness studies, and the
//! benchmark harness tying them together.
//!
//! The crate is deterministic end to end: every random choice flows from
//! an explicit 64-bit seed through SplitMix64, and parallel execution
//! (rayon, behind the default `parallel` feature) never changes output
//! bytes.

pub mod bench;
pub mod channel;
pub mod error;
mod exec;
pub mod imaging;
pub mod phylogeny;
pub mod prng;
pub mod projector;
pub mod stego;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};
pub use exec::with_jobs;
pub use imaging::ImageBuffer;
pub use projector::Trait;
