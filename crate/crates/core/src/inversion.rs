//! Point inversion: recover `(u, v)` for a 3-D query by minimizing the
//! squared distance to the surface under the unit-box constraint, plus
//! implicit-function-theorem Jacobians of the solution.
//!
//! The solver is a projected Gauss-Newton with Armijo backtracking, run from
//! a 3×3 seed lattice (cell centers) plus an optional caller seed; the
//! candidate with the lowest objective wins, ties broken by smallest `(u,v)`
//! lexicographically. Everything here is deterministic.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::surface::{ControlNet, ParamPoint, SurfacePoint};

/// Which box constraints are active at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActiveBounds {
    pub u_low: bool,
    pub u_high: bool,
    pub v_low: bool,
    pub v_high: bool,
}

impl ActiveBounds {
    pub fn u_clamped(&self) -> bool {
        self.u_low || self.u_high
    }

    pub fn v_clamped(&self) -> bool {
        self.v_low || self.v_high
    }

    pub fn any(&self) -> bool {
        self.u_clamped() || self.v_clamped()
    }
}

/// Outcome of a point inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionResult<R> {
    /// The minimizer in the unit square.
    pub p: ParamPoint<R>,
    /// Distance from the query to the surface at `p`, meters.
    pub residual: R,
    /// Gauss-Newton iterations spent on the winning start.
    pub iterations: usize,
    /// Whether the projected-gradient norm fell below the tolerance.
    pub converged: bool,
    /// Clamped coordinates at the solution.
    pub active_bounds: ActiveBounds,
}

/// Jacobians of the inversion solution.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionJacobian<R> {
    /// `d(u,v)/d(query)`, 2×3 row-major.
    pub wrt_query: [[R; 3]; 2],
    /// `d(u,v)/d(control points)`, 2 rows × `E·F·3` columns; column
    /// `3·(e·F + f) + c` is the sensitivity to coordinate `c` of control
    /// point `(e, f)`.
    pub wrt_net: [Vec<R>; 2],
}

fn clamp01<R: Real>(x: R) -> R {
    x.max(R::zero()).min(R::one())
}

/// Squared distance from `query` to the surface at `(u,v)`.
fn objective<R: Real>(net: &ControlNet<R>, query: SurfacePoint<R>, p: ParamPoint<R>) -> R {
    let r = net.evaluate(p).unwrap().sub(query);
    r.dot(r)
}

/// Gradient of the squared-distance objective: `2·Jᵀr`.
fn gradient<R: Real>(
    net: &ControlNet<R>,
    query: SurfacePoint<R>,
    p: ParamPoint<R>,
) -> Result<[R; 2]> {
    let r = net.evaluate(p)?.sub(query);
    let (pu, pv) = net.partials(p)?;
    let two = R::from_f64_lossy(2.0);
    Ok([two * pu.dot(r), two * pv.dot(r)])
}

/// Projected gradient: components pointing out of the box at its boundary
/// are zeroed.
fn projected_gradient<R: Real>(g: [R; 2], p: ParamPoint<R>) -> [R; 2] {
    let proj = |gi: R, x: R| {
        if x <= R::zero() && gi > R::zero() {
            R::zero()
        } else if x >= R::one() && gi < R::zero() {
            R::zero()
        } else {
            gi
        }
    };
    [proj(g[0], p.u), proj(g[1], p.v)]
}

fn check_regular<R: Real>(net: &ControlNet<R>) -> Result<()> {
    // zero-area patch: tangent cross product vanishes everywhere we probe
    let mut max_area = R::zero();
    for i in 0..3 {
        for j in 0..3 {
            let p = ParamPoint::new(
                R::from_usize(i).unwrap() / R::from_f64_lossy(2.0),
                R::from_usize(j).unwrap() / R::from_f64_lossy(2.0),
            )?;
            let (pu, pv) = net.partials(p)?;
            max_area = max_area.max(pu.cross(pv).norm());
        }
    }
    if max_area < R::from_f64_lossy(1e-14) {
        return Err(Error::DegenerateSurface(
            "zero-area patch: tangents are parallel everywhere".into(),
        ));
    }
    Ok(())
}

fn gauss_newton<R: Real>(
    net: &ControlNet<R>,
    query: SurfacePoint<R>,
    start: ParamPoint<R>,
    tol: R,
    max_iter: usize,
) -> Result<(ParamPoint<R>, R, usize, bool)> {
    let mut p = ParamPoint::new(clamp01(start.u), clamp01(start.v))?;
    let mut obj = objective(net, query, p);
    let mut converged = false;
    let mut iters = 0;
    let armijo = R::from_f64_lossy(1e-4);
    let half = R::from_f64_lossy(0.5);

    for it in 0..max_iter {
        iters = it + 1;
        let g = gradient(net, query, p)?;
        let pg = projected_gradient(g, p);
        let pg_norm = (pg[0] * pg[0] + pg[1] * pg[1]).sqrt();
        if pg_norm <= tol {
            converged = true;
            iters = it;
            break;
        }

        let (pu, pv) = net.partials(p)?;
        let jtj = [
            [pu.dot(pu), pu.dot(pv)],
            [pv.dot(pu), pv.dot(pv)],
        ];
        let two = R::from_f64_lossy(2.0);
        let rhs = [-g[0] / two, -g[1] / two];
        // Full Newton when the curvature-corrected Hessian is positive
        // definite (quadratic convergence on lifted queries where the
        // Gauss-Newton model is only linearly convergent), otherwise
        // Gauss-Newton, otherwise steepest descent.
        let r = net.evaluate(p)?.sub(query);
        let (puu, pvv, puv) = net.second_partials(p)?;
        let hess = [
            [jtj[0][0] + r.dot(puu), jtj[0][1] + r.dot(puv)],
            [jtj[1][0] + r.dot(puv), jtj[1][1] + r.dot(pvv)],
        ];
        let hess_pd = hess[0][0] > R::zero()
            && hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0] > R::zero();
        let newton = if hess_pd {
            linalg::solve_sym2(hess, rhs)
        } else {
            None
        };
        let step = match newton.or_else(|| linalg::solve_sym2(jtj, rhs)) {
            Some((s, _)) => s,
            None => {
                let gn = pg_norm.max(R::min_positive_value());
                [-pg[0] / gn, -pg[1] / gn]
            }
        };

        // Armijo backtracking on the projected step
        let mut alpha = R::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand = ParamPoint::new(
                clamp01(p.u + alpha * step[0]),
                clamp01(p.v + alpha * step[1]),
            )?;
            let cand_obj = objective(net, query, cand);
            let du = cand.u - p.u;
            let dv = cand.v - p.v;
            let decrease = g[0] * du + g[1] * dv;
            if cand_obj <= obj + armijo * decrease || cand_obj < obj {
                if du == R::zero() && dv == R::zero() {
                    break; // projection absorbed the whole step
                }
                p = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            alpha = alpha * half;
        }
        if !accepted {
            // Near the minimizer the objective is flat to machine precision
            // and Armijo cannot certify a decrease. Take the full step anyway
            // if it at least halves the gradient norm, otherwise stop.
            let cand = ParamPoint::new(clamp01(p.u + step[0]), clamp01(p.v + step[1]))?;
            let cg = gradient(net, query, cand)?;
            let cpg = projected_gradient(cg, cand);
            let cpg_norm = (cpg[0] * cpg[0] + cpg[1] * cpg[1]).sqrt();
            if cpg_norm < pg_norm * half && (cand.u != p.u || cand.v != p.v) {
                p = cand;
                obj = objective(net, query, p);
                continue;
            }
            converged = pg_norm <= tol || cpg_norm.min(pg_norm) <= tol;
            if cpg_norm < pg_norm {
                p = cand;
                obj = objective(net, query, p);
            }
            break;
        }
    }
    if !converged {
        let g = gradient(net, query, p)?;
        let pg = projected_gradient(g, p);
        converged = (pg[0] * pg[0] + pg[1] * pg[1]).sqrt() <= tol;
    }
    Ok((p, obj, iters, converged))
}

/// Recovers the surface parameters of `query` by box-constrained
/// minimization of the squared distance to the patch.
///
/// Multi-start: the 3×3 lattice `{1/6, 1/2, 5/6}²` plus `init` when given.
/// A run that exhausts `max_iter` is reported with `converged = false`
/// rather than as an error.
pub fn invert_point<R: Real>(
    net: &ControlNet<R>,
    query: SurfacePoint<R>,
    init: Option<ParamPoint<R>>,
    tol: R,
    max_iter: usize,
) -> Result<InversionResult<R>> {
    if tol <= R::zero() {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if !query.is_finite() {
        return Err(Error::InvalidArgument("query must be finite".into()));
    }
    check_regular(net)?;

    let mut starts = Vec::with_capacity(10);
    if let Some(p) = init {
        starts.push(p);
    }
    for i in 0..3 {
        for j in 0..3 {
            let sixth = R::one() / R::from_f64_lossy(6.0);
            let u = sixth * R::from_usize(2 * i + 1).unwrap();
            let v = sixth * R::from_usize(2 * j + 1).unwrap();
            starts.push(ParamPoint::new(u, v)?);
        }
    }

    let tie = R::from_f64_lossy(1e-12);
    let mut best: Option<(ParamPoint<R>, R, usize, bool)> = None;
    for start in starts {
        let cand = gauss_newton(net, query, start, tol, max_iter)?;
        best = Some(match best {
            None => cand,
            Some(cur) => {
                let (cp, cobj, ..) = cand;
                let (bp, bobj, ..) = cur;
                if cobj < bobj - tie {
                    cand
                } else if (cobj - bobj).abs() <= tie
                    && (cp.u < bp.u || (cp.u == bp.u && cp.v < bp.v))
                {
                    cand
                } else {
                    cur
                }
            }
        });
    }
    let (p, obj, iterations, converged) = best.unwrap();

    let eps = R::from_f64_lossy(1e-12);
    let active_bounds = ActiveBounds {
        u_low: p.u <= eps,
        u_high: p.u >= R::one() - eps,
        v_low: p.v <= eps,
        v_high: p.v >= R::one() - eps,
    };
    Ok(InversionResult {
        p,
        residual: obj.max(R::zero()).sqrt(),
        iterations,
        converged,
        active_bounds,
    })
}

/// Sensitivities of the inversion solution via the implicit function theorem
/// applied to the projected stationarity conditions.
///
/// Rows of both Jacobians corresponding to a clamped coordinate are zero.
/// Requires a converged solution; a flat objective direction yields
/// [`Error::IllConditionedJacobian`].
pub fn inversion_jacobian<R: Real>(
    net: &ControlNet<R>,
    query: SurfacePoint<R>,
    solution: &InversionResult<R>,
) -> Result<InversionJacobian<R>> {
    if !solution.converged {
        return Err(Error::InvalidArgument(
            "jacobian requires a converged solution".into(),
        ));
    }
    let p = solution.p;
    let two = R::from_f64_lossy(2.0);
    let r = net.evaluate(p)?.sub(query);
    let (pu, pv) = net.partials(p)?;
    let (puu, pvv, puv) = net.second_partials(p)?;

    // Hessian of the squared-distance objective in (u, v)
    let h = [
        [two * (pu.dot(pu) + r.dot(puu)), two * (pu.dot(pv) + r.dot(puv))],
        [two * (pv.dot(pu) + r.dot(puv)), two * (pv.dot(pv) + r.dot(pvv))],
    ];

    let u_free = !solution.active_bounds.u_clamped();
    let v_free = !solution.active_bounds.v_clamped();

    let ef3 = net.e() * net.f() * 3;
    let mut jac = InversionJacobian {
        wrt_query: [[R::zero(); 3]; 2],
        wrt_net: [vec![R::zero(); ef3], vec![R::zero(); ef3]],
    };
    if !u_free && !v_free {
        return Ok(jac); // fully pinned corner: zero sensitivity
    }

    // ∂g/∂q = −2 Jᵀ ;  ∂g/∂P_{k,c} = 2 (b'_k r_c + J_c b_k) per row
    let bu = crate::surface::bernstein_basis(net.e(), p.u)?;
    let bv = crate::surface::bernstein_basis(net.f(), p.v)?;
    let dbu = crate::surface::bernstein_basis_derivative(net.e(), p.u)?;
    let dbv = crate::surface::bernstein_basis_derivative(net.f(), p.v)?;

    let tangents = [pu, pv];
    let r_arr = [r.x, r.y, r.z];

    // dg rows for the free subsystem
    let solve_rows = |dg: &dyn Fn(usize) -> [R; 2],
                      ncols: usize|
     -> Result<[Vec<R>; 2]> {
        let mut out = [vec![R::zero(); ncols], vec![R::zero(); ncols]];
        match (u_free, v_free) {
            (true, true) => {
                for col in 0..ncols {
                    let rhs = dg(col);
                    let (sol, cond) = linalg::solve_sym2(h, [-rhs[0], -rhs[1]]).ok_or(
                        Error::IllConditionedJacobian { cond: f64::INFINITY },
                    )?;
                    if cond > R::from_f64_lossy(1e12) {
                        return Err(Error::IllConditionedJacobian {
                            cond: cond.to_f64().unwrap_or(f64::INFINITY),
                        });
                    }
                    out[0][col] = sol[0];
                    out[1][col] = sol[1];
                }
            }
            (free_u, _) => {
                let idx = if free_u { 0 } else { 1 };
                let hii = h[idx][idx];
                if hii.abs() <= R::min_positive_value() * R::from_f64_lossy(4.0) {
                    return Err(Error::IllConditionedJacobian { cond: f64::INFINITY });
                }
                for col in 0..ncols {
                    out[idx][col] = -dg(col)[idx] / hii;
                }
            }
        }
        Ok(out)
    };

    // w.r.t. the query point
    let dq = solve_rows(
        &|c: usize| {
            let t = [tangents[0], tangents[1]];
            let comp = |v: SurfacePoint<R>, c: usize| match c {
                0 => v.x,
                1 => v.y,
                _ => v.z,
            };
            [-two * comp(t[0], c), -two * comp(t[1], c)]
        },
        3,
    )?;
    for row in 0..2 {
        for col in 0..3 {
            jac.wrt_query[row][col] = dq[row][col];
        }
    }

    // w.r.t. the control points
    let f = net.f();
    let dn = solve_rows(
        &|flat: usize| {
            let k = flat / 3;
            let c = flat % 3;
            let (e, fcol) = (k / f, k % f);
            let b = bu[e] * bv[fcol];
            let b_du = dbu[e] * bv[fcol];
            let b_dv = bu[e] * dbv[fcol];
            let tang = |t: SurfacePoint<R>, c: usize| match c {
                0 => t.x,
                1 => t.y,
                _ => t.z,
            };
            [
                two * (b_du * r_arr[c] + tang(tangents[0], c) * b),
                two * (b_dv * r_arr[c] + tang(tangents[1], c) * b),
            ]
        },
        ef3,
    )?;
    jac.wrt_net = dn;
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pp(u: f64, v: f64) -> ParamPoint<f64> {
        ParamPoint::new(u, v).unwrap()
    }

    fn random_regular_net(seed: u64, e: usize, f: usize) -> ControlNet<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = ControlNet::flat(e, f, 10.0, 6.0).unwrap();
        let du = 10.0 / (e - 1) as f64;
        let dv = 6.0 / (f - 1) as f64;
        let pts = base
            .points()
            .iter()
            .map(|p| {
                SurfacePoint::new(
                    p.x + rng.gen_range(-0.2..0.2) * du,
                    p.y + rng.gen_range(-0.2..0.2) * dv,
                    p.z + rng.gen_range(-0.2..0.2) * du.min(dv),
                )
            })
            .collect();
        ControlNet::new(e, f, pts).unwrap()
    }

    #[test]
    fn round_trip_interior_point() {
        let net = random_regular_net(1, 7, 5);
        let p = pp(0.37, 0.62);
        let q = net.evaluate(p).unwrap();
        let res = invert_point(&net, q, None, 1e-10, 100).unwrap();
        assert!(res.converged);
        assert!((res.p.u - 0.37).abs() < 1e-6);
        assert!((res.p.v - 0.62).abs() < 1e-6);
        assert!(res.residual < 1e-8);
        assert!(!res.active_bounds.any());
    }

    #[test]
    fn corner_control_point_maps_to_origin() {
        let net = random_regular_net(2, 4, 4);
        let res = invert_point(&net, net.point(0, 0), None, 1e-10, 100).unwrap();
        assert!(res.p.u.abs() < 1e-8 && res.p.v.abs() < 1e-8);
        assert!(res.residual < 1e-9);
        assert!(res.active_bounds.u_low && res.active_bounds.v_low);
    }

    #[test]
    fn lifted_query_projects_onto_plane() {
        let net = ControlNet::<f64>::flat(4, 4, 10.0, 10.0).unwrap();
        // surface normal of z=0 plane is +z
        let q = SurfacePoint::new(5.0, 5.0, 1.0);
        let res = invert_point(&net, q, None, 1e-12, 100).unwrap();
        assert!((res.p.u - 0.5).abs() < 1e-9);
        assert!((res.p.v - 0.5).abs() < 1e-9);
        assert!((res.residual - 1.0).abs() < 1e-10);

        // dense grid search confirms the global minimum
        let mut best = f64::INFINITY;
        let mut arg = (0.0, 0.0);
        let n = 1000;
        for i in 0..=n {
            for j in 0..=n {
                let p = pp(i as f64 / n as f64, j as f64 / n as f64);
                let d = net.evaluate(p).unwrap().sub(q);
                let d2 = d.dot(d);
                if d2 < best {
                    best = d2;
                    arg = (p.u, p.v);
                }
            }
        }
        assert!((arg.0 - res.p.u).abs() <= 1.0 / n as f64 + 1e-9);
        assert!((arg.1 - res.p.v).abs() <= 1.0 / n as f64 + 1e-9);
    }

    #[test]
    fn probe_grid_global_minimum_sanity() {
        let net = random_regular_net(5, 5, 4);
        let q = SurfacePoint::new(4.2, 2.8, 0.9);
        let res = invert_point(&net, q, None, 1e-10, 100).unwrap();
        let obj_at = |p: ParamPoint<f64>| {
            let d = net.evaluate(p).unwrap().sub(q);
            d.dot(d)
        };
        let solved = obj_at(res.p);
        for i in 0..50 {
            for j in 0..50 {
                let p = pp(i as f64 / 49.0, j as f64 / 49.0);
                assert!(solved <= obj_at(p) + 1e-9);
            }
        }
    }

    #[test]
    fn max_iter_exhaustion_is_not_an_error() {
        let net = random_regular_net(6, 7, 5);
        let q = net.evaluate(pp(0.4, 0.4)).unwrap();
        let res = invert_point(&net, q, None, 1e-16, 1).unwrap();
        // with one iteration from coarse seeds this cannot hit 1e-16
        assert!(!res.converged || res.residual < 1e-12);
    }

    #[test]
    fn degenerate_net_rejected() {
        // all control points identical: zero-area patch
        let pts = vec![SurfacePoint::new(1.0, 2.0, 3.0); 9];
        let net = ControlNet::new(3, 3, pts).unwrap();
        assert!(matches!(
            invert_point(&net, SurfacePoint::new(0.0, 0.0, 0.0), None, 1e-10, 50),
            Err(Error::DegenerateSurface(_))
        ));
    }

    #[test]
    fn determinism_bit_identical() {
        let net = random_regular_net(7, 7, 5);
        let q = SurfacePoint::new(3.0, 2.0, 0.4);
        let a = invert_point(&net, q, None, 1e-10, 100).unwrap();
        let b = invert_point(&net, q, None, 1e-10, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jacobian_flat_net_is_scaled_identity() {
        let (l, w): (f64, f64) = (10.0, 4.0);
        let net = ControlNet::flat(3, 3, l, w).unwrap();
        let q = SurfacePoint::new(3.0, 1.0, 0.0);
        let sol = invert_point(&net, q, None, 1e-12, 100).unwrap();
        assert!(sol.converged && !sol.active_bounds.any());
        let jac = inversion_jacobian(&net, q, &sol).unwrap();
        let want = [[1.0 / l, 0.0, 0.0], [0.0, 1.0 / w, 0.0]];
        for r in 0..2 {
            for c in 0..3 {
                assert!((jac.wrt_query[r][c] - want[r][c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let net = random_regular_net(9, 5, 4);
        let q = net
            .evaluate(pp(0.41, 0.57))
            .unwrap()
            .add(SurfacePoint::new(0.0, 0.0, 0.3));
        let sol = invert_point(&net, q, None, 1e-12, 200).unwrap();
        assert!(sol.converged && !sol.active_bounds.any());
        let jac = inversion_jacobian(&net, q, &sol).unwrap();

        let h = 1e-4;
        let reinvert = |q: SurfacePoint<f64>, net: &ControlNet<f64>| {
            invert_point(net, q, Some(sol.p), 1e-13, 200).unwrap().p
        };
        // w.r.t. query coordinates
        for c in 0..3 {
            let mut qh = q;
            let mut ql = q;
            match c {
                0 => {
                    qh.x += h;
                    ql.x -= h;
                }
                1 => {
                    qh.y += h;
                    ql.y -= h;
                }
                _ => {
                    qh.z += h;
                    ql.z -= h;
                }
            }
            let ph = reinvert(qh, &net);
            let pl = reinvert(ql, &net);
            let fd = [(ph.u - pl.u) / (2.0 * h), (ph.v - pl.v) / (2.0 * h)];
            for r in 0..2 {
                let a = jac.wrt_query[r][c];
                let denom = a.abs().max(1e-3);
                assert!(
                    (a - fd[r]).abs() / denom < 1e-4,
                    "query jac r={r} c={c}: {a} vs {}",
                    fd[r]
                );
            }
        }
        // w.r.t. a few control-point coordinates
        for &(k, c) in &[(0usize, 0usize), (7, 2), (13, 1)] {
            let perturb = |sign: f64| {
                let mut pts = net.points().to_vec();
                match c {
                    0 => pts[k].x += sign * h,
                    1 => pts[k].y += sign * h,
                    _ => pts[k].z += sign * h,
                }
                ControlNet::new(net.e(), net.f(), pts).unwrap()
            };
            let ph = reinvert(q, &perturb(1.0));
            let pl = reinvert(q, &perturb(-1.0));
            let fd = [(ph.u - pl.u) / (2.0 * h), (ph.v - pl.v) / (2.0 * h)];
            for r in 0..2 {
                let a = jac.wrt_net[r][3 * k + c];
                let denom = a.abs().max(1e-3);
                assert!(
                    (a - fd[r]).abs() / denom < 1e-4,
                    "net jac r={r} k={k} c={c}: {a} vs {}",
                    fd[r]
                );
            }
        }
    }

    #[test]
    fn clamped_coordinate_rows_are_zero() {
        let net = ControlNet::<f64>::flat(3, 3, 10.0, 4.0).unwrap();
        // query beyond the u=1 edge clamps u
        let q = SurfacePoint::new(14.0, 2.0, 0.0);
        let sol = invert_point(&net, q, None, 1e-12, 100).unwrap();
        assert!(sol.converged);
        assert!(sol.active_bounds.u_high);
        let jac = inversion_jacobian(&net, q, &sol).unwrap();
        for c in 0..3 {
            assert_eq!(jac.wrt_query[0][c], 0.0);
        }
        assert!(jac.wrt_net[0].iter().all(|&x| x == 0.0));
        // v stays sensitive
        assert!((jac.wrt_query[1][1] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn unconverged_solution_rejected_for_jacobian() {
        let net = random_regular_net(10, 4, 4);
        let q = SurfacePoint::new(3.0, 2.0, 5.0);
        let mut sol = invert_point(&net, q, None, 1e-10, 100).unwrap();
        sol.converged = false;
        assert!(matches!(
            inversion_jacobian(&net, q, &sol),
            Err(Error::InvalidArgument(_))
        ));
    }
}

