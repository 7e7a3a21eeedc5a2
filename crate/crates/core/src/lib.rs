//! Scene manifolds as Bézier surfaces.
//!
//! This crate represents the drivable surface around an ego vehicle as a
//! tensor-product Bézier patch and builds the numerical machinery needed to
//! query it:
//!
//! * [`surface`] — Bernstein bases, patch evaluation and derivatives, and
//!   least-squares fitting of a control net to sampled surface data.
//! * [`inversion`] — recovering `(u, v)` for a 3-D point by box-constrained
//!   Gauss-Newton, with implicit-function-theorem Jacobians of the solution.
//! * [`arclength`] — the isometric arc-length chart `(s_u, s_v)` computed by
//!   Gauss-Legendre quadrature of the surface metric, and its inverse.
//! * [`sampler`] — edge-aware sampling of semantic occupancy grids via a
//!   Chebyshev edge distance transform, plus a coverage diagnostic.
//! * [`attention`] — the iterative attention forward pipeline over stub
//!   latent features, decoder head contracts, and the composite loss.
//! * [`coplanarity`] — analytic localization error induced by assuming a
//!   flat ground plane on inclined roads.
//!
//! Core geometry is generic over the scalar type through [`scalar::Real`]
//! (`f32` or `f64`); concrete `f64` aliases live at the crate root.

pub mod arclength;
pub mod attention;
pub mod config;
pub mod coplanarity;
pub mod error;
pub mod io;
pub mod inversion;
pub mod linalg;
pub mod sampler;
pub mod scalar;
pub mod surface;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` control net, the default working precision.
pub type ControlNet = surface::ControlNet<f64>;
/// `f32` control net.
pub type ControlNet32 = surface::ControlNet<f32>;
/// `f64` parameter-square point.
pub type ParamPoint = surface::ParamPoint<f64>;
/// `f64` point in the ego frame.
pub type SurfacePoint = surface::SurfacePoint<f64>;
/// `f64` arc-length chart point.
pub type ArcPoint = arclength::ArcPoint<f64>;
/// `f64` inversion result.
pub type InversionResult = inversion::InversionResult<f64>;
/// `f64` scene geometry for the coplanarity analysis.
pub type SceneGeometry = coplanarity::SceneGeometry<f64>;
