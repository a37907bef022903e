//! Numerical laboratory for the `L^{p,q}`-Calabi and `L^p`-Mabuchi Finsler
//! geometries on discretized spaces of Kähler potentials.
//!
//! * [`lpq_sphere`]: flat `L^p` geometry of the positive `L^{p/q}`-sphere octant.
//! * [`backend`]: torus and zonal `ℙ¹` Kähler backends in complex dimension one.
//! * [`finsler`]: the two Finsler structures, the isometric embedding `F`,
//!   path lengths, Cauchy statistics and entropy.
//! * [`flows`]: Kähler–Ricci and Calabi flow integration and length criteria.
//! * [`experiments`]: sequence constructions and verdict tables.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backend;
pub mod error;
pub mod experiments;
pub mod finsler;
pub mod flows;
pub mod lpq_sphere;
pub mod numeric;
pub mod par;

pub use error::{Error, Result};
