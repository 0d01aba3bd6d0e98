//! File formats, experiment harness and plots around [`envshape_core`].
//!
//! The binary `envshape` exposes all of it on the command line.

pub use envshape_core as core;

pub mod formats;
pub mod harness;
pub mod plot;
