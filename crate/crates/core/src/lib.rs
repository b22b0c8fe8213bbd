//! Particle-based optimal-transport surrogates for positive scalar fields on
//! variable 2D geometries.
//!
//! Fields and domain level-sets are both represented as clouds of identical
//! Gaussian particles ([`splat`]). Clouds are put into correspondence by
//! optimal assignment ([`matching`]), compressed and regressed over the
//! parameter space ([`regression`]), and interpolated across geometries as
//! Wasserstein barycenters ([`geometry`], [`surrogate`]). The [`heat`] module
//! provides the parametric transient heat problem used to generate data.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod heat;
pub mod matching;
pub mod regression;
pub mod splat;
pub mod surrogate;

pub use error::{Error, Result};
pub use grid::{FieldSample, Grid, Point};
pub use splat::{
    decompose, evaluate_cloud, normalize_field, split_signed, DecomposeOptions, Decomposition, ParticleCloud,
};
