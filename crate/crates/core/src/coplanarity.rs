//! Localization error induced by the flat-ground assumption on inclined
//! roads.
//!
//! Geometry convention, 2-D side view: the camera pinhole sits at `(0, h)`
//! above its ground contact at the origin; the true ground is the line
//! through the origin inclined at `theta` (positive rising away from ego);
//! the true object contact point lies at **horizontal** distance `d`, i.e.
//! at `(d, d·tanθ)`. Flat-ground backprojection intersects the camera→object
//! ray with the assumed plane `z = 0`, landing at `(h·d/(h − d·tanθ), 0)`.
//! Errors are reported in the ego frame with Z up.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Camera/object geometry for the error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneGeometry<R> {
    /// camera height above its local ground contact, meters
    pub h: R,
    /// horizontal distance to the object contact point, meters
    pub d: R,
    /// ground inclination, radians
    pub theta: R,
}

impl<R: Real> SceneGeometry<R> {
    /// Validity requires `h, d > 0` and the backprojection ray to strike the
    /// assumed plane ahead of the camera: `h − d·tanθ > 0`.
    pub fn new(h: R, d: R, theta: R) -> Result<Self> {
        if !(h > R::zero()) || !(d > R::zero()) {
            return Err(Error::InvalidArgument("h and d must be positive".into()));
        }
        let g = Self { h, d, theta };
        g.check_valid()?;
        Ok(g)
    }

    fn check_valid(&self) -> Result<()> {
        let half_pi = R::from_f64_lossy(std::f64::consts::FRAC_PI_2);
        if !(self.theta.abs() < half_pi) {
            return Err(Error::DivergentGeometry(format!(
                "inclination {} outside (−π/2, π/2)",
                self.theta
            )));
        }
        if !(self.h - self.d * self.theta.tan() > R::zero()) {
            return Err(Error::DivergentGeometry(format!(
                "ray never hits the assumed plane: h − d·tanθ = {} ≤ 0",
                self.h - self.d * self.theta.tan()
            )));
        }
        Ok(())
    }

    /// Where the flat-ground assumption places the object on `z = 0`.
    pub fn flat_backprojection_x(&self) -> R {
        self.h * self.d / (self.h - self.d * self.theta.tan())
    }
}

/// Euclidean distance between the flat-ground backprojection and the true
/// object contact point. Zero iff `theta = 0`.
pub fn backprojection_error<R: Real>(g: &SceneGeometry<R>) -> Result<R> {
    let (long, vert) = coordinate_errors(g)?;
    Ok((long * long + vert * vert).sqrt())
}

/// `(err_longitudinal, err_vertical)` of the flat-ground estimate in the ego
/// frame; `backprojection_error² = err_long² + err_vert²` (in-plane objects
/// have zero lateral error).
pub fn coordinate_errors<R: Real>(g: &SceneGeometry<R>) -> Result<(R, R)> {
    g.check_valid()?;
    // h·d/(h − d·tanθ) − d rearranged so θ = 0 gives exactly zero
    let tan = g.theta.tan();
    let long = g.d * g.d * tan / (g.h - g.d * tan);
    let vert = -(g.d * tan);
    Ok((long, vert))
}

/// One row of an inclination sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<R> {
    pub theta: R,
    pub error: R,
    pub err_longitudinal: R,
    pub err_vertical: R,
}

/// Result of [`sweep`]; `truncated` flags rows dropped at the validity
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable<R> {
    pub rows: Vec<SweepRow<R>>,
    pub truncated: bool,
}

/// Samples the error model over `steps` inclinations in
/// `[theta_min, theta_max]`. Angles past the validity boundary are dropped
/// and flagged rather than failing the whole sweep.
pub fn sweep<R: Real>(
    h: R,
    d: R,
    theta_min: R,
    theta_max: R,
    steps: usize,
) -> Result<SweepTable<R>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be ≥ 1".into()));
    }
    if theta_max < theta_min {
        return Err(Error::InvalidArgument("theta_max < theta_min".into()));
    }
    let mut rows = Vec::with_capacity(steps);
    let mut truncated = false;
    for i in 0..steps {
        let frac = if steps == 1 {
            R::zero()
        } else {
            R::from_usize(i).unwrap() / R::from_usize(steps - 1).unwrap()
        };
        let theta = theta_min + (theta_max - theta_min) * frac;
        match SceneGeometry::new(h, d, theta) {
            Ok(g) => {
                let (long, vert) = coordinate_errors(&g)?;
                rows.push(SweepRow {
                    theta,
                    error: (long * long + vert * vert).sqrt(),
                    err_longitudinal: long,
                    err_vertical: vert,
                });
            }
            Err(Error::DivergentGeometry(_)) => truncated = true,
            Err(e) => return Err(e),
        }
    }
    Ok(SweepTable { rows, truncated })
}
