//! The isometric arc-length chart `(s_u, s_v)` and its inverse.
//!
//! Convention (the source material leaves it open, so it is fixed here):
//! `s_u` integrates `‖∂P/∂u‖` along the **iso-v line through the query
//! point** from `u = 0` to the query's `u`, and `s_v` integrates `‖∂P/∂v‖`
//! along the iso-u line through it. On non-developable surfaces the chart is
//! path-dependent; this convention is what every caller in the crate uses.
//!
//! Integrals use composite Gauss-Legendre quadrature: the interval is split
//! into 8 equal subintervals, each integrated at the requested order
//! (default 32 nodes).

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::surface::{ControlNet, ParamPoint};

/// Default Gauss-Legendre order per subinterval.
pub const DEFAULT_QUAD_ORDER: usize = 32;
const SUBINTERVALS: usize = 8;
/// Tangent norms below this are treated as a degenerate metric.
const TANGENT_EPS: f64 = 1e-12;

/// A point in the arc-length chart, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPoint<R> {
    pub s_u: R,
    pub s_v: R,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        // recompute derivative at the converged node for the weight
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Which parameter the integral runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    U,
    V,
}

/// `∫_a^b ‖tangent‖ dt` along an iso-line.
fn integrate_speed<R: Real>(
    net: &ControlNet<R>,
    axis: Axis,
    fixed: R,
    a: R,
    b: R,
    quad_order: usize,
) -> Result<R> {
    if quad_order == 0 {
        return Err(Error::InvalidArgument("quad_order must be ≥ 1".into()));
    }
    if b < a {
        return Err(Error::InvalidArgument("integration bounds reversed".into()));
    }
    let (nodes, weights) = gauss_legendre(quad_order);
    let sub = R::from_usize(SUBINTERVALS).unwrap();
    let half = R::from_f64_lossy(0.5);
    let span = (b - a) / sub;
    let eps = R::from_f64_lossy(TANGENT_EPS);

    let mut total = R::zero();
    for s in 0..SUBINTERVALS {
        let lo = a + span * R::from_usize(s).unwrap();
        let mid = lo + span * half;
        let scale = span * half;
        for (node, weight) in nodes.iter().zip(&weights) {
            let t = mid + scale * R::from_f64_lossy(*node);
            let p = match axis {
                Axis::U => ParamPoint::new(t, fixed)?,
                Axis::V => ParamPoint::new(fixed, t)?,
            };
            let (pu, pv) = net.partials(p)?;
            let speed = match axis {
                Axis::U => pu.norm(),
                Axis::V => pv.norm(),
            };
            if speed < eps && span > R::zero() {
                return Err(Error::DegenerateMetric(format!(
                    "vanishing tangent along the integration path at t={t}"
                )));
            }
            total = total + scale * R::from_f64_lossy(*weight) * speed;
        }
    }
    Ok(total)
}

/// Maps `(u, v)` to the arc-length chart.
pub fn to_arclength<R: Real>(
    net: &ControlNet<R>,
    p: ParamPoint<R>,
    quad_order: usize,
) -> Result<ArcPoint<R>> {
    Ok(ArcPoint {
        s_u: integrate_speed(net, Axis::U, p.v, R::zero(), p.u, quad_order)?,
        s_v: integrate_speed(net, Axis::V, p.u, R::zero(), p.v, quad_order)?,
    })
}

/// Total length of the iso-v line `v = const` across the patch.
pub fn total_u_length<R: Real>(net: &ControlNet<R>, v: R, quad_order: usize) -> Result<R> {
    integrate_speed(net, Axis::U, v, R::zero(), R::one(), quad_order)
}

/// Total length of the iso-u line `u = const` across the patch.
pub fn total_v_length<R: Real>(net: &ControlNet<R>, u: R, quad_order: usize) -> Result<R> {
    integrate_speed(net, Axis::V, u, R::zero(), R::one(), quad_order)
}

/// Solves `∫_0^x speed = target` on the monotone arc-length function by
/// bracketed Newton with bisection fallback.
fn invert_1d<R: Real>(
    net: &ControlNet<R>,
    axis: Axis,
    fixed: R,
    target: R,
    quad_order: usize,
    tol: R,
) -> Result<R> {
    let total = integrate_speed(net, axis, fixed, R::zero(), R::one(), quad_order)?;
    let slack = tol.max(R::from_f64_lossy(1e-12)) * (R::one() + total);
    if target < -slack || target > total + slack {
        return Err(Error::ArcLengthOutOfRange {
            requested: target.to_f64().unwrap_or(f64::NAN),
            total: total.to_f64().unwrap_or(f64::NAN),
        });
    }
    let target = target.max(R::zero()).min(total);
    if target == R::zero() {
        return Ok(R::zero());
    }
    if target == total {
        return Ok(R::one());
    }

    let mut lo = R::zero();
    let mut hi = R::one();
    let mut x = target / total; // flat-speed initial guess
    let half = R::from_f64_lossy(0.5);
    for _ in 0..200 {
        let fx = integrate_speed(net, axis, fixed, R::zero(), x, quad_order)? - target;
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx > R::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let p = match axis {
            Axis::U => ParamPoint::new(x, fixed)?,
            Axis::V => ParamPoint::new(fixed, x)?,
        };
        let (pu, pv) = net.partials(p)?;
        let speed = match axis {
            Axis::U => pu.norm(),
            Axis::V => pv.norm(),
        };
        let newton = x - fx / speed;
        x = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * half
        };
    }
    Ok(x)
}

/// Inverse of [`to_arclength`]: finds `(u, v)` whose arc-length coordinates
/// equal `a`, solving the coupled system by alternating 1-D inversions
/// starting from `anchor`.
pub fn from_arclength<R: Real>(
    net: &ControlNet<R>,
    a: ArcPoint<R>,
    anchor: ParamPoint<R>,
    tol: R,
) -> Result<ParamPoint<R>> {
    from_arclength_with_order(net, a, anchor, tol, DEFAULT_QUAD_ORDER)
}

pub fn from_arclength_with_order<R: Real>(
    net: &ControlNet<R>,
    a: ArcPoint<R>,
    anchor: ParamPoint<R>,
    tol: R,
    quad_order: usize,
) -> Result<ParamPoint<R>> {
    if tol <= R::zero() {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let mut u = anchor.u;
    let mut v = anchor.v;
    for _ in 0..50 {
        let new_u = invert_1d(net, Axis::U, v, a.s_u, quad_order, tol)?;
        let new_v = invert_1d(net, Axis::V, new_u, a.s_v, quad_order, tol)?;
        let delta = (new_u - u).abs().max((new_v - v).abs());
        u = new_u;
        v = new_v;
        if delta <= tol {
            break;
        }
    }
    ParamPoint::new(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::SurfacePoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pp(u: f64, v: f64) -> ParamPoint<f64> {
        ParamPoint::new(u, v).unwrap()
    }

    /// Quarter cylinder of radius 2: rows sweep the arc, columns the axis.
    fn quarter_cylinder_net(e: usize, f: usize) -> ControlNet<f64> {
        let mut pts = Vec::new();
        for i in 0..e {
            let phi = std::f64::consts::FRAC_PI_2 * i as f64 / (e - 1) as f64;
            for j in 0..f {
                let y = 4.0 * j as f64 / (f - 1) as f64;
                pts.push(SurfacePoint::new(2.0 * phi.sin(), y, 2.0 * (1.0 - phi.cos())));
            }
        }
        ControlNet::new(e, f, pts).unwrap()
    }

    fn random_regular_net(seed: u64) -> ControlNet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = ControlNet::flat(5, 4, 9.0, 5.0).unwrap();
        let pts = base
            .points()
            .iter()
            .map(|p| SurfacePoint::new(p.x + rng.gen_range(-0.3..0.3), p.y, rng.gen_range(-0.4..0.4)))
            .collect();
        ControlNet::new(5, 4, pts).unwrap()
    }

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // order n integrates degree 2n-1 exactly
        let (nodes, weights) = gauss_legendre(5);
        let integral: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * x.powi(8))
            .sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-14);
        let sum: f64 = weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn flat_net_is_linear_chart() {
        let net = ControlNet::flat(4, 3, 8.0, 3.0).unwrap();
        for &v0 in &[0.0, 0.3, 0.9] {
            let a = to_arclength(&net, pp(0.25, v0), DEFAULT_QUAD_ORDER).unwrap();
            assert!((a.s_u - 2.0).abs() < 1e-9);
        }
        let a = to_arclength(&net, pp(0.0, 0.8), DEFAULT_QUAD_ORDER).unwrap();
        assert!(a.s_u.abs() < 1e-12);
        assert!((a.s_v - 2.4).abs() < 1e-9);
    }

    #[test]
    fn cylinder_matches_brute_force_trapezoid() {
        let net = quarter_cylinder_net(8, 3);
        let a = to_arclength(&net, pp(1.0, 0.5), DEFAULT_QUAD_ORDER).unwrap();
        // dense trapezoid over the same Bézier tangent field
        let n = 1_000_000usize;
        let mut acc = 0.0;
        let speed = |u: f64| {
            let (pu, _) = net.partials(pp(u, 0.5)).unwrap();
            pu.norm()
        };
        let h = 1.0 / n as f64;
        let mut prev = speed(0.0);
        for i in 1..=n {
            let cur = speed(i as f64 * h);
            acc += 0.5 * (prev + cur) * h;
            prev = cur;
        }
        assert!((a.s_u - acc).abs() < 1e-8, "{} vs {}", a.s_u, acc);
    }

    #[test]
    fn monotone_in_u() {
        let net = random_regular_net(3);
        for vi in 0..8 {
            let v = vi as f64 / 7.0;
            let mut last = -1.0;
            for ui in 0..64 {
                let u = ui as f64 / 63.0;
                let a = to_arclength(&net, pp(u, v), 16).unwrap();
                assert!(a.s_u > last || (u == 0.0 && a.s_u == 0.0));
                last = a.s_u;
            }
        }
    }

    #[test]
    fn additivity_along_u() {
        let net = random_regular_net(4);
        let (u1, u2, v) = (0.3, 0.8, 0.4);
        let full = to_arclength(&net, pp(u2, v), DEFAULT_QUAD_ORDER).unwrap().s_u;
        let first = to_arclength(&net, pp(u1, v), DEFAULT_QUAD_ORDER).unwrap().s_u;
        let second =
            super::integrate_speed(&net, Axis::U, v, u1, u2, DEFAULT_QUAD_ORDER).unwrap();
        assert!((first + second - full).abs() < 1e-9);
    }

    #[test]
    fn quadrature_converged_at_default_order() {
        let net = quarter_cylinder_net(7, 4);
        let a = to_arclength(&net, pp(0.83, 0.31), DEFAULT_QUAD_ORDER).unwrap();
        let b = to_arclength(&net, pp(0.83, 0.31), 2 * DEFAULT_QUAD_ORDER).unwrap();
        assert!((a.s_u - b.s_u).abs() < 1e-9);
        assert!((a.s_v - b.s_v).abs() < 1e-9);
    }

    #[test]
    fn flat_inverse_is_linear() {
        let net = ControlNet::flat(3, 3, 7.0, 2.0).unwrap();
        let p = from_arclength(
            &net,
            ArcPoint { s_u: 0.6 * 7.0, s_v: 0.0 },
            pp(0.5, 0.0),
            1e-12,
        )
        .unwrap();
        assert!((p.u - 0.6).abs() < 1e-10);
        assert!(p.v.abs() < 1e-10);
        let origin = from_arclength(&net, ArcPoint { s_u: 0.0, s_v: 0.0 }, pp(0.5, 0.5), 1e-12)
            .unwrap();
        assert!(origin.u.abs() < 1e-12 && origin.v.abs() < 1e-12);
    }

    #[test]
    fn round_trip_random_net() {
        let net = random_regular_net(8);
        for &(u, v) in &[(0.2, 0.7), (0.55, 0.15), (0.9, 0.9)] {
            let a = to_arclength(&net, pp(u, v), DEFAULT_QUAD_ORDER).unwrap();
            let p = from_arclength(&net, a, pp(0.5, 0.5), 1e-10).unwrap();
            let b = to_arclength(&net, p, DEFAULT_QUAD_ORDER).unwrap();
            assert!((b.s_u - a.s_u).abs() < 1e-8);
            assert!((b.s_v - a.s_v).abs() < 1e-8);
        }
    }

    #[test]
    fn out_of_range_carries_total_length() {
        let net = ControlNet::flat(3, 3, 5.0, 2.0).unwrap();
        let err = from_arclength(
            &net,
            ArcPoint { s_u: 6.0, s_v: 0.5 },
            pp(0.5, 0.5),
            1e-10,
        )
        .unwrap_err();
        match err {
            Error::ArcLengthOutOfRange { requested, total } => {
                assert_eq!(requested, 6.0);
                assert!((total - 5.0).abs() < 1e-9);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn degenerate_tangent_rejected() {
        // collapse all rows: ∂P/∂u = 0 everywhere
        let mut pts = Vec::new();
        for _ in 0..3 {
            for j in 0..3 {
                pts.push(SurfacePoint::new(0.0, j as f64, 0.0));
            }
        }
        let net = ControlNet::new(3, 3, pts).unwrap();
        assert!(matches!(
            to_arclength(&net, pp(0.7, 0.5), 8),
            Err(Error::DegenerateMetric(_))
        ));
    }

    #[test]
    fn isometry_on_planar_net() {
        // planar but sheared: in-surface distance along iso-lines equals chart distance
        let base = ControlNet::flat(4, 4, 6.0, 4.0).unwrap();
        let pts = base
            .points()
            .iter()
            .map(|p| SurfacePoint::new(p.x, p.y + 0.5 * p.x, 0.0))
            .collect();
        let net = ControlNet::new(4, 4, pts).unwrap();
        let a1 = to_arclength(&net, pp(0.2, 0.5), DEFAULT_QUAD_ORDER).unwrap();
        let a2 = to_arclength(&net, pp(0.8, 0.5), DEFAULT_QUAD_ORDER).unwrap();
        // chord along the iso-v line is straight for this affine patch
        let q1 = net.evaluate(pp(0.2, 0.5)).unwrap();
        let q2 = net.evaluate(pp(0.8, 0.5)).unwrap();
        assert!(((a2.s_u - a1.s_u) - q2.sub(q1).norm()).abs() < 1e-9);
    }
}
