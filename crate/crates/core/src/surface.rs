//! Tensor-product Bézier surfaces: Bernstein bases, evaluation, derivatives,
//! and least-squares control-net fitting.
//!
//! A surface is defined by an `E×F` net of 3-D control points. Index `e`
//! runs `1…E` over Bernstein terms of degree `E−1` (term `e` carries
//! `C(E−1, e−1)·u^(e−1)·(1−u)^(E−e)`), and symmetrically for `f`/`v`. The
//! `u` direction points along vehicle-forward (ego X), `v` laterally; the
//! ego frame has X forward and Z up.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// A 3-D point (or vector) in the ego frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint<R> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> SurfacePoint<R> {
    pub fn new(x: R, y: R, z: R) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: R) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Self) -> R {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> R {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A point in the unit parameter square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint<R> {
    pub u: R,
    pub v: R,
}

impl<R: Real> ParamPoint<R> {
    /// Builds a parameter point, rejecting coordinates outside `[0,1]`.
    pub fn new(u: R, v: R) -> Result<Self> {
        if !(u >= R::zero() && u <= R::one() && v >= R::zero() && v <= R::one()) {
            return Err(Error::Domain(format!("(u,v)=({u},{v}) outside unit square")));
        }
        Ok(Self { u, v })
    }
}

/// The `E×F` net of 3-D control points defining a Bézier surface.
///
/// Stored row-major: entry `(e, f)` is `points[e * F + f]`, `e` indexing the
/// `u` direction and `f` the `v` direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlNet<R> {
    rows: usize,
    cols: usize,
    points: Vec<SurfacePoint<R>>,
}

impl<R: Real> ControlNet<R> {
    /// Builds a net from `E·F` row-major points. Requires `E ≥ 2`, `F ≥ 2`
    /// and finite coordinates.
    pub fn new(rows: usize, cols: usize, points: Vec<SurfacePoint<R>>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidArgument(format!(
                "control net needs E ≥ 2 and F ≥ 2, got {rows}×{cols}"
            )));
        }
        if points.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "expected {}×{} = {} points, got {}",
                rows,
                cols,
                rows * cols,
                points.len()
            )));
        }
        if !points.iter().all(|p| p.is_finite()) {
            return Err(Error::InvalidArgument(
                "control net contains non-finite coordinates".into(),
            ));
        }
        Ok(Self { rows, cols, points })
    }

    /// A planar net spanning `[0,length]×[0,width]` at `z = 0` with uniform
    /// control spacing. Handy baseline: `evaluate` is the identity chart
    /// scaled by `(length, width)`.
    pub fn flat(rows: usize, cols: usize, length: R, width: R) -> Result<Self> {
        let mut points = Vec::with_capacity(rows * cols);
        for e in 0..rows {
            for f in 0..cols {
                let fu = R::from_usize(e).unwrap() / R::from_usize(rows - 1).unwrap();
                let fv = R::from_usize(f).unwrap() / R::from_usize(cols - 1).unwrap();
                points.push(SurfacePoint::new(length * fu, width * fv, R::zero()));
            }
        }
        Self::new(rows, cols, points)
    }

    /// Control rows (`E`, the `u` direction).
    pub fn e(&self) -> usize {
        self.rows
    }

    /// Control columns (`F`, the `v` direction).
    pub fn f(&self) -> usize {
        self.cols
    }

    pub fn point(&self, e: usize, f: usize) -> SurfacePoint<R> {
        self.points[e * self.cols + f]
    }

    pub fn points(&self) -> &[SurfacePoint<R>] {
        &self.points
    }

    /// Evaluates the surface at `p`: the double sum of control points
    /// weighted by the Bernstein product basis.
    pub fn evaluate(&self, p: ParamPoint<R>) -> Result<SurfacePoint<R>> {
        let bu = bernstein_basis(self.rows, p.u)?;
        let bv = bernstein_basis(self.cols, p.v)?;
        Ok(self.blend(&bu, &bv))
    }

    /// First partial derivatives `(∂P/∂u, ∂P/∂v)` at `p`.
    pub fn partials(&self, p: ParamPoint<R>) -> Result<(SurfacePoint<R>, SurfacePoint<R>)> {
        let bu = bernstein_basis(self.rows, p.u)?;
        let bv = bernstein_basis(self.cols, p.v)?;
        let dbu = bernstein_basis_derivative(self.rows, p.u)?;
        let dbv = bernstein_basis_derivative(self.cols, p.v)?;
        Ok((self.blend(&dbu, &bv), self.blend(&bu, &dbv)))
    }

    /// Second partials `(∂²P/∂u², ∂²P/∂v², ∂²P/∂u∂v)` at `p`.
    pub fn second_partials(
        &self,
        p: ParamPoint<R>,
    ) -> Result<(SurfacePoint<R>, SurfacePoint<R>, SurfacePoint<R>)> {
        let bu = bernstein_basis(self.rows, p.u)?;
        let bv = bernstein_basis(self.cols, p.v)?;
        let dbu = bernstein_basis_derivative(self.rows, p.u)?;
        let dbv = bernstein_basis_derivative(self.cols, p.v)?;
        let d2bu = bernstein_basis_second_derivative(self.rows, p.u)?;
        let d2bv = bernstein_basis_second_derivative(self.cols, p.v)?;
        Ok((
            self.blend(&d2bu, &bv),
            self.blend(&bu, &d2bv),
            self.blend(&dbu, &dbv),
        ))
    }

    fn blend(&self, wu: &[R], wv: &[R]) -> SurfacePoint<R> {
        let mut acc = SurfacePoint::zero();
        for (e, &bu) in wu.iter().enumerate() {
            let mut row = SurfacePoint::zero();
            for (f, &bv) in wv.iter().enumerate() {
                row = row.add(self.points[e * self.cols + f].scale(bv));
            }
            acc = acc.add(row.scale(bu));
        }
        acc
    }
}

/// Bernstein basis of `count` terms (degree `count − 1`) at `u ∈ [0,1]`.
///
/// Binomial coefficients come from the multiplicative recurrence
/// `C(d, e+1) = C(d, e)·(d−e)/(e+1)`, exact in floating point for the
/// degrees used here.
pub fn bernstein_basis<R: Real>(count: usize, u: R) -> Result<Vec<R>> {
    if count == 0 {
        return Err(Error::InvalidArgument("basis needs at least one term".into()));
    }
    if !(u >= R::zero() && u <= R::one()) {
        return Err(Error::Domain(format!("u={u} outside [0,1]")));
    }
    let degree = count - 1;
    let w = R::one() - u;

    // powers of (1-u) from degree down to 0, built front-to-back
    let mut pow_w = vec![R::one(); count];
    for i in (0..degree).rev() {
        pow_w[i] = pow_w[i + 1] * w;
    }

    let mut out = Vec::with_capacity(count);
    let mut binom = R::one();
    let mut pow_u = R::one();
    for e in 0..count {
        out.push(binom * pow_u * pow_w[e]);
        binom = binom * R::from_usize(degree - e).unwrap() / R::from_usize(e + 1).unwrap();
        pow_u = pow_u * u;
    }
    Ok(out)
}

/// Derivative of the Bernstein basis: `B'_{e,d} = d·(B_{e−1,d−1} − B_{e,d−1})`.
pub fn bernstein_basis_derivative<R: Real>(count: usize, u: R) -> Result<Vec<R>> {
    if count == 0 {
        return Err(Error::InvalidArgument("basis needs at least one term".into()));
    }
    if count == 1 {
        // constant basis
        bernstein_basis(count, u)?;
        return Ok(vec![R::zero()]);
    }
    let lower = bernstein_basis(count - 1, u)?;
    let d = R::from_usize(count - 1).unwrap();
    let mut out = Vec::with_capacity(count);
    for e in 0..count {
        let left = if e > 0 { lower[e - 1] } else { R::zero() };
        let right = if e < count - 1 { lower[e] } else { R::zero() };
        out.push(d * (left - right));
    }
    Ok(out)
}

/// Second derivative of the Bernstein basis, by applying the first-derivative
/// recurrence twice.
pub fn bernstein_basis_second_derivative<R: Real>(count: usize, u: R) -> Result<Vec<R>> {
    if count == 0 {
        return Err(Error::InvalidArgument("basis needs at least one term".into()));
    }
    if count <= 2 {
        bernstein_basis(count, u)?;
        return Ok(vec![R::zero(); count]);
    }
    let lower = bernstein_basis_derivative(count - 1, u)?;
    let d = R::from_usize(count - 1).unwrap();
    let mut out = Vec::with_capacity(count);
    for e in 0..count {
        let left = if e > 0 { lower[e - 1] } else { R::zero() };
        let right = if e < count - 1 { lower[e] } else { R::zero() };
        out.push(d * (left - right));
    }
    Ok(out)
}

/// Least-squares fit of an `E×F` control net to `(parameter, point)` samples.
///
/// Minimizes `Σ‖evaluate(net, p_i) − x_i‖² + ridge·‖net‖²` by normal
/// equations. Returns the net and the RMS point residual. With `ridge = 0`
/// a rank-deficient sample set yields [`Error::SingularSystem`].
pub fn fit_control_net<R: Real>(
    samples: &[(ParamPoint<R>, SurfacePoint<R>)],
    e: usize,
    f: usize,
    ridge: R,
) -> Result<(ControlNet<R>, R)> {
    if e < 2 || f < 2 {
        return Err(Error::InvalidArgument(format!(
            "fit needs E ≥ 2 and F ≥ 2, got {e}×{f}"
        )));
    }
    let n = e * f;
    if samples.len() < n {
        return Err(Error::SingularSystem(format!(
            "{} samples cannot determine {} control points",
            samples.len(),
            n
        )));
    }
    if ridge < R::zero() {
        return Err(Error::InvalidArgument("ridge must be nonnegative".into()));
    }

    // normal equations: (AᵀA + ridge·I) x = Aᵀ b, one rhs per coordinate
    let mut ata = vec![R::zero(); n * n];
    let mut atb = vec![vec![R::zero(); n]; 3];
    let mut row = vec![R::zero(); n];
    for (p, target) in samples {
        let bu = bernstein_basis(e, p.u)?;
        let bv = bernstein_basis(f, p.v)?;
        for (i, &wu) in bu.iter().enumerate() {
            for (j, &wv) in bv.iter().enumerate() {
                row[i * f + j] = wu * wv;
            }
        }
        for i in 0..n {
            if row[i] == R::zero() {
                continue;
            }
            for j in 0..n {
                ata[i * n + j] = ata[i * n + j] + row[i] * row[j];
            }
            atb[0][i] = atb[0][i] + row[i] * target.x;
            atb[1][i] = atb[1][i] + row[i] * target.y;
            atb[2][i] = atb[2][i] + row[i] * target.z;
        }
    }
    for i in 0..n {
        ata[i * n + i] = ata[i * n + i] + ridge;
    }

    let sol = linalg::solve(&ata, n, &atb, R::from_f64_lossy(1e-10))?;
    let points: Vec<SurfacePoint<R>> = (0..n)
        .map(|i| SurfacePoint::new(sol[0][i], sol[1][i], sol[2][i]))
        .collect();
    let net = ControlNet::new(e, f, points)?;

    let mut sum_sq = R::zero();
    for (p, target) in samples {
        let diff = net.evaluate(*p)?.sub(*target);
        sum_sq = sum_sq + diff.dot(diff);
    }
    let rms = (sum_sq / R::from_usize(samples.len()).unwrap()).sqrt();
    Ok((net, rms))
}
