//! Degrees of freedom of fields radiated by scalar free-space sources, from
//! two directions: the singular system of the radiation operator and the
//! Karhunen–Loève eigensystem of the cross-spectral density produced by a
//! spatially incoherent source.

// `!(x > 0.0)` style guards reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod source;
pub mod spectral;
pub mod coherence;
pub mod wigner;
pub mod ndf;
pub mod stochastic;
pub mod config;
pub mod output;
pub mod run;

pub use error::{EitError, Result};
pub use geometry::{LineSource, ObservationSet, Point, WaveContext};
pub use source::{build_quadrature, Intensity, QuadratureRule, SourceModel};
