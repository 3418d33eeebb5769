//! Source and observation geometry in the y–z plane.
//!
//! The line source lies on the y-axis between the foci `(-a, 0)` and `(a, 0)`.
//! Every point is written `(y, z)`; the third Cartesian coordinate is zero.
//! The path-difference coordinate used throughout the crate is
//!
//! ```text
//! xi(p) = |p - (-a, 0)| - |p - (a, 0)|
//! ```
//!
//! so that `xi = 2 y0` where a curve of constant `xi` meets the source segment,
//! and `xi -> 2a` as `p` approaches the axis beyond the `+a` endpoint.
//! Curves of constant `xi` are the confocal hyperbolas
//! `y = a cosh(mu) cos(nu)`, `z = a sinh(mu) sin(nu)` with `cos(nu) = xi / 2a`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{EitError, Result};

/// A position in the y–z plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const fn new(y: f64, z: f64) -> Self {
        Point { y, z }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.y - other.y).hypot(self.z - other.z)
    }
}

/// Fixed-frequency wave parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveContext {
    wavelength: f64,
    wavenumber: f64,
    omega_bar: f64,
}

impl WaveContext {
    pub fn new(wavelength: f64) -> Result<Self> {
        Self::with_frequency(wavelength, 0.0)
    }

    /// `omega_bar` is carried for reporting only; nothing depends on it.
    pub fn with_frequency(wavelength: f64, omega_bar: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(EitError::domain(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(WaveContext {
            wavelength,
            wavenumber: 2.0 * PI / wavelength,
            omega_bar,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// β = 2π/λ.
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn omega_bar(&self) -> f64 {
        self.omega_bar
    }
}

/// A straight source segment on the y-axis, centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSource {
    half_length: f64,
}

impl LineSource {
    pub fn new(half_length: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(EitError::domain(format!("half length must be positive, got {half_length}")));
        }
        Ok(LineSource { half_length })
    }

    pub fn from_length(length: f64) -> Result<Self> {
        Self::new(0.5 * length)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    /// `(lower, upper)` endpoints `(-a, 0)` and `(a, 0)`.
    pub fn foci(&self) -> (Point, Point) {
        (Point::new(-self.half_length, 0.0), Point::new(self.half_length, 0.0))
    }

    /// Distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let yc = p.y.clamp(-self.half_length, self.half_length);
        (p.y - yc).hypot(p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationKind {
    Grid,
    Curve,
    ClosedCurve,
}

/// Ordered observation points, optionally carrying quadrature weights
/// (arclength or area) for the continuous-operator discretization.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    points: Vec<Point>,
    kind: ObservationKind,
    weights: Option<Vec<f64>>,
    arclength: Option<Vec<f64>>,
    grid_shape: Option<(usize, usize)>,
}

impl ObservationSet {
    /// Scattered points with no quadrature weights.
    pub fn points(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(EitError::domain("observation set is empty"));
        }
        Ok(ObservationSet {
            points,
            kind: ObservationKind::Curve,
            weights: None,
            arclength: None,
            grid_shape: None,
        })
    }

    /// An open curve with arclength abscissae; these must be strictly increasing.
    pub fn curve(points: Vec<Point>, arclength: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(EitError::domain("observation set is empty"));
        }
        if arclength.len() != points.len() {
            return Err(EitError::contract("arclength and points differ in length"));
        }
        if arclength.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EitError::contract("curve arclength must be strictly increasing"));
        }
        Ok(ObservationSet {
            points,
            kind: ObservationKind::Curve,
            weights: None,
            arclength: Some(arclength),
            grid_shape: None,
        })
    }

    /// Rectangular grid, row-major in z (outer) then y (inner).
    pub fn grid(ys: &[f64], zs: &[f64]) -> Result<Self> {
        if ys.is_empty() || zs.is_empty() {
            return Err(EitError::domain("grid axes must be non-empty"));
        }
        let points = zs
            .iter()
            .flat_map(|&z| ys.iter().map(move |&y| Point::new(y, z)))
            .collect();
        Ok(ObservationSet {
            points,
            kind: ObservationKind::Grid,
            weights: None,
            arclength: None,
            grid_shape: Some((ys.len(), zs.len())),
        })
    }

    /// `n` midpoint-sampled points on a circular arc of `radius` centered at the
    /// origin, polar angle measured from +y, spanning `[theta_start, theta_end]`.
    /// Arclength weights are attached. A full turn yields a closed curve.
    pub fn arc(radius: f64, n: usize, theta_start: f64, theta_end: f64) -> Result<Self> {
        if !(radius > 0.0) || n == 0 || !(theta_end > theta_start) {
            return Err(EitError::domain("arc needs radius > 0, n > 0 and a positive angular span"));
        }
        let span = theta_end - theta_start;
        let dtheta = span / n as f64;
        let points: Vec<Point> = (0..n)
            .map(|i| {
                let t = theta_start + (i as f64 + 0.5) * dtheta;
                Point::new(radius * t.cos(), radius * t.sin())
            })
            .collect();
        let arclength = (0..n).map(|i| radius * (i as f64 + 0.5) * dtheta).collect();
        let closed = (span - 2.0 * PI).abs() < 1e-12;
        Ok(ObservationSet {
            points,
            kind: if closed { ObservationKind::ClosedCurve } else { ObservationKind::Curve },
            weights: Some(vec![radius * dtheta; n]),
            arclength: Some(arclength),
            grid_shape: None,
        })
    }

    /// Semicircle in the `z > 0` half-plane.
    pub fn semicircle(radius: f64, n: usize) -> Result<Self> {
        Self::arc(radius, n, 0.0, PI)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.points.len() {
            return Err(EitError::contract("weights and points differ in length"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(EitError::domain("observation weights must be positive"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    /// Drop the weights: point-set mode.
    pub fn unweighted(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn as_slice(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn arclength(&self) -> Option<&[f64]> {
        self.arclength.as_deref()
    }

    /// `(ny, nz)` for grids.
    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        self.grid_shape
    }

    /// Reorder the points (and weights/arclength) by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(EitError::contract("permutation length mismatch"));
        }
        let pick = |v: &Vec<f64>| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(ObservationSet {
            points: order.iter().map(|&i| self.points[i]).collect(),
            kind: ObservationKind::Curve,
            weights: self.weights.as_ref().map(pick),
            arclength: None,
            grid_shape: None,
        })
    }
}

/// Path-difference coordinate of `p` relative to the source endpoints.
pub fn xi_of_point(p: &Point, src: &LineSource) -> Result<f64> {
    let (lower, upper) = src.foci();
    let r_lower = p.distance(&lower);
    let r_upper = p.distance(&upper);
    let tiny = 1e-14 * src.half_length();
    if r_lower <= tiny || r_upper <= tiny {
        return Err(EitError::domain("point coincides with a source endpoint"));
    }
    let limit = src.length();
    Ok((r_lower - r_upper).clamp(-limit, limit))
}

/// Gradient of [`xi_of_point`] with respect to `(y, z)`.
pub fn xi_gradient(p: &Point, src: &LineSource) -> (f64, f64) {
    let (lower, upper) = src.foci();
    let rl = p.distance(&lower);
    let ru = p.distance(&upper);
    (
        (p.y - lower.y) / rl - (p.y - upper.y) / ru,
        p.z / rl - p.z / ru,
    )
}

/// The discrete family of constant-`xi` curves meeting the source every λ/2:
/// `xi = n λ` for all integers `n` with `|n λ| <= 2a`, ascending.
pub fn q_xi_set(src: &LineSource, wc: &WaveContext) -> Vec<f64> {
    let lambda = wc.wavelength();
    // tolerate round-off when ℓ is an exact multiple of λ
    let n_max = (src.length() / lambda * (1.0 + 1e-12)).floor() as i64;
    (-n_max..=n_max).map(|n| n as f64 * lambda).collect()
}

/// Constant-`xi` hyperbola branch with foci at the source endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Hyperbola {
    xi: f64,
    source: LineSource,
    nu: f64,
}

impl Hyperbola {
    pub fn new(xi: f64, source: LineSource) -> Result<Self> {
        let limit = source.length();
        if !(xi.abs() < limit) {
            return Err(EitError::DegenerateBranch { xi, limit });
        }
        Ok(Hyperbola {
            xi,
            source,
            nu: (xi / limit).acos(),
        })
    }

    /// Hyperbola through `p`.
    pub fn through(p: &Point, source: LineSource) -> Result<Self> {
        Self::new(xi_of_point(p, &source)?, source)
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn foci(&self) -> (Point, Point) {
        self.source.foci()
    }

    /// Angle between the branch asymptote and the +y axis.
    pub fn asymptote_angle(&self) -> f64 {
        self.nu
    }

    /// Point at eccentric parameter `mu >= 0`; `mu = 0` is the vertex on the source.
    pub fn point_at(&self, mu: f64) -> Point {
        let a = self.source.half_length();
        Point::new(a * mu.cosh() * self.nu.cos(), a * mu.sinh() * self.nu.sin())
    }

    fn speed(&self, mu: f64) -> f64 {
        let a = self.source.half_length();
        a * (mu.sinh().powi(2) + self.nu.sin().powi(2)).sqrt()
    }

    /// Arclength of the branch between parameters `m0` and `m1` (4-point Gauss–Legendre).
    fn arc(&self, m0: f64, m1: f64) -> f64 {
        const X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let c = 0.5 * (m0 + m1);
        let h = 0.5 * (m1 - m0);
        let mut sum = 0.0;
        for (x, w) in X.iter().zip(W) {
            sum += w * (self.speed(c - h * x) + self.speed(c + h * x));
        }
        sum * h
    }

    /// Polyline from the vertex out to arclength `s_max`, sampled every `ds`.
    ///
    /// Points are generated on the exact branch (marching in `mu`) and then
    /// resampled to uniform arclength from a fine cumulative-length table.
    pub fn trace(&self, s_max: f64, ds: f64) -> Result<ObservationSet> {
        if !(ds > 0.0) || !(s_max > 0.0) {
            return Err(EitError::domain("trace needs ds > 0 and s_max > 0"));
        }
        let n_out = (s_max / ds * (1.0 + 1e-12)).floor() as usize + 1;
        let sub = ds / 16.0;

        // cumulative (mu, s) table
        let mut mus = vec![0.0_f64];
        let mut ss = vec![0.0_f64];
        let target = (n_out - 1) as f64 * ds;
        while *ss.last().unwrap() < target {
            let mu = *mus.last().unwrap();
            let dmu = sub / self.speed(mu);
            let next = mu + dmu;
            let s = ss.last().unwrap() + self.arc(mu, next);
            mus.push(next);
            ss.push(s);
        }

        let mut points = Vec::with_capacity(n_out);
        let mut arclength = Vec::with_capacity(n_out);
        let mut seg = 0usize;
        for i in 0..n_out {
            let s = i as f64 * ds;
            while seg + 2 < ss.len() && ss[seg + 1] < s {
                seg += 1;
            }
            // invert the arclength on the segment with a few Newton steps
            let mut mu = mus[seg] + (s - ss[seg]) / (ss[seg + 1] - ss[seg]) * (mus[seg + 1] - mus[seg]);
            for _ in 0..3 {
                let err = ss[seg] + self.arc(mus[seg], mu) - s;
                mu -= err / self.speed(mu);
            }
            let mu = mu.max(0.0);
            points.push(self.point_at(mu));
            arclength.push(s);
        }
        ObservationSet::curve(points, arclength)
    }
}

/// Trace the constant-`xi` branch in `z > 0` from the source axis out to `s_max`.
pub fn trace_hyperbola(xi: f64, src: &LineSource, s_max: f64, ds: f64) -> Result<ObservationSet> {
    Hyperbola::new(xi, *src)?.trace(s_max, ds)
}

/// Conformal map straightening the confocal family: `w = arccosh((y + i z) / a)`
/// on the principal branch. Hyperbolas map to `Im w = arccos(xi / 2a)`,
/// confocal ellipses to `Re w = const`.
pub fn warp(p: &Point, src: &LineSource) -> Result<Complex64> {
    if !(p.z > 0.0) {
        return Err(EitError::domain("warp is defined on z > 0 only"));
    }
    let zeta = Complex64::new(p.y, p.z) / src.half_length();
    Ok(zeta.acosh())
}
