//! Point-pair cross-spectral density, spectral degree of coherence and the
//! pairwise mutual information of a circular Gaussian field, plus the
//! Fraunhofer sinc law and a finite-difference Helmholtz check.
//!
//! All CSD values carry the `1/(16π²)` prefactor that follows from
//! `G G*` with `G = exp(-jβR)/(4πR)`; `μ` and the mutual information do not
//! depend on it.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{EitError, Result};
use crate::geometry::{xi_of_point, LineSource, ObservationSet, Point, WaveContext};
use crate::kernels::green;
use crate::source::SourceModel;

/// `|μ|` at or above this is treated as full coherence (mutual information diverges).
pub const MI_SATURATION: f64 = 1.0 - 1e-12;
/// Tolerated overshoot of `|μ|` above one before it counts as an error.
pub const MU_OVERSHOOT: f64 = 1e-9;
/// Default exclusion radius around the reference point and the source, in wavelengths.
pub const DEFAULT_EXCLUSION_WAVELENGTHS: f64 = 0.25;

/// Green's function from every source node to `p`, pre-multiplied by nothing.
fn node_greens(p: &Point, src: &SourceModel, wc: &WaveContext) -> Result<Vec<Complex64>> {
    src.check_off_support(p)?;
    src.node_points()
        .enumerate()
        .map(|(q, node)| green(p, &node, wc).map_err(|e| match e {
            EitError::Singularity { distance, .. } => EitError::Singularity {
                distance,
                obs_index: None,
                node_index: Some(q),
            },
            other => other,
        }))
        .collect()
}

fn csd_from_greens(g1: &[Complex64], g2: &[Complex64], src: &SourceModel) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for q in 0..g1.len() {
        let c = src.column_weight(q);
        if c != 0.0 {
            acc += g1[q] * g2[q].conj() * c;
        }
    }
    acc
}

fn intensity_from_greens(g: &[Complex64], src: &SourceModel) -> f64 {
    g.iter().enumerate().map(|(q, v)| v.norm_sqr() * src.column_weight(q)).sum()
}

/// `W(r1, r2) = Σ_q I_q w_q G(r1, r'_q) G*(r2, r'_q)`.
pub fn csd_pair(r1: &Point, r2: &Point, src: &SourceModel, wc: &WaveContext) -> Result<Complex64> {
    let g1 = node_greens(r1, src, wc)?;
    if r1 == r2 {
        return Ok(Complex64::new(intensity_from_greens(&g1, src), 0.0));
    }
    let g2 = node_greens(r2, src, wc)?;
    Ok(csd_from_greens(&g1, &g2, src))
}

/// `μ = W12 / sqrt(W11 W22)`, with small overshoots of `|μ|` clipped back to 1.
pub fn normalized_coherence(w12: Complex64, i1: f64, i2: f64) -> Result<Complex64> {
    if !(i1 > 0.0 && i2 > 0.0) {
        return Err(EitError::UndefinedCoherence);
    }
    let mu = w12 / (i1 * i2).sqrt();
    let mag = mu.norm();
    if mag > 1.0 + MU_OVERSHOOT {
        return Err(EitError::Numerical(format!("|mu| = {mag} exceeds 1")));
    }
    Ok(if mag > 1.0 { mu / mag } else { mu })
}

pub fn degree_of_coherence(r1: &Point, r2: &Point, src: &SourceModel, wc: &WaveContext) -> Result<Complex64> {
    Ok(coherence_sample(r1, r2, src, wc)?.mu)
}

/// Mutual information `-ln(1 - |μ|²)` in nats.
pub fn mutual_information(mu: Complex64) -> Result<f64> {
    let m = mu.norm();
    if m >= MI_SATURATION {
        return Err(EitError::Saturation { abs_mu: m });
    }
    Ok(-(-m * m).ln_1p())
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceSample {
    pub w12: Complex64,
    pub i1: f64,
    pub i2: f64,
    pub mu: Complex64,
    /// `None` when `|μ|` saturates.
    pub mi_nats: Option<f64>,
}

pub fn coherence_sample(r1: &Point, r2: &Point, src: &SourceModel, wc: &WaveContext) -> Result<CoherenceSample> {
    let g1 = node_greens(r1, src, wc)?;
    sample_from_reference(&g1, intensity_from_greens(&g1, src), r2, src, wc)
}

fn sample_from_reference(
    g1: &[Complex64],
    i1: f64,
    r2: &Point,
    src: &SourceModel,
    wc: &WaveContext,
) -> Result<CoherenceSample> {
    let g2 = node_greens(r2, src, wc)?;
    let w12 = csd_from_greens(g1, &g2, src);
    let i2 = intensity_from_greens(&g2, src);
    let mu = normalized_coherence(w12, i1, i2)?;
    Ok(CoherenceSample {
        w12,
        i1,
        i2,
        mu,
        mi_nats: mutual_information(mu).ok(),
    })
}

/// Distances to the source endpoints for a pair of observation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FraunhoferGeometry {
    pub r1_plus: f64,
    pub r1_minus: f64,
    pub r2_plus: f64,
    pub r2_minus: f64,
    /// Difference of the mean endpoint distances, `(R2⁺+R2⁻)/2 − (R1⁺+R1⁻)/2`.
    pub phi12: f64,
}

impl FraunhoferGeometry {
    /// `plus` refers to the `(-a, 0)` endpoint so that `ξ = R⁺ − R⁻`.
    pub fn new(r1: &Point, r2: &Point, src: &LineSource) -> Result<Self> {
        let (lower, upper) = src.foci();
        let g = FraunhoferGeometry {
            r1_plus: r1.distance(&lower),
            r1_minus: r1.distance(&upper),
            r2_plus: r2.distance(&lower),
            r2_minus: r2.distance(&upper),
            phi12: 0.5 * (r2.distance(&lower) + r2.distance(&upper)) - 0.5 * (r1.distance(&lower) + r1.distance(&upper)),
        };
        if [g.r1_plus, g.r1_minus, g.r2_plus, g.r2_minus].iter().any(|d| !(*d > 0.0)) {
            return Err(EitError::domain("observation point coincides with a source endpoint"));
        }
        Ok(g)
    }

    pub fn xi1(&self) -> f64 {
        self.r1_plus - self.r1_minus
    }

    pub fn xi2(&self) -> f64 {
        self.r2_plus - self.r2_minus
    }
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Far-zone coherence magnitude `|sinc(β (ξ2 − ξ1) / 2)|`.
pub fn fraunhofer_mu(r1: &Point, r2: &Point, src: &LineSource, wc: &WaveContext) -> Result<f64> {
    let dxi = xi_of_point(r2, src)? - xi_of_point(r1, src)?;
    Ok(sinc(0.5 * wc.wavenumber() * dxi).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Mask {
    Valid = 0,
    NearReference = 1,
    NearSource = 2,
    Saturated = 3,
    Undefined = 4,
}

#[derive(Debug, Clone)]
pub struct MapCell {
    pub point: Point,
    pub sample: Option<CoherenceSample>,
    pub mask: Mask,
}

impl MapCell {
    pub fn abs_mu(&self) -> Option<f64> {
        match (self.mask, self.sample) {
            (Mask::Valid | Mask::Saturated, Some(s)) => Some(s.mu.norm()),
            _ => None,
        }
    }

    pub fn mi_nats(&self) -> Option<f64> {
        match self.mask {
            Mask::Valid => self.sample.and_then(|s| s.mi_nats),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoherenceMap {
    pub reference: Point,
    pub exclusion_radius: f64,
    pub cells: Vec<MapCell>,
}

impl CoherenceMap {
    pub fn masked_count(&self) -> usize {
        self.cells.iter().filter(|c| c.mask != Mask::Valid).count()
    }

    /// Index of the unmasked cell with the largest `|μ|`.
    pub fn argmax_abs_mu(&self) -> Option<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.mask == Mask::Valid)
            .filter_map(|(i, c)| c.abs_mu().map(|m| (i, m)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}

/// `|μ(r1, p)|` and mutual information for every grid point `p`.
///
/// Points within `exclusion_radius` of the reference or of the source are
/// masked rather than evaluated; per-point failures become mask values.
pub fn coherence_map(
    r1: &Point,
    grid: &ObservationSet,
    src: &SourceModel,
    wc: &WaveContext,
    exclusion_radius: f64,
) -> Result<CoherenceMap> {
    if !(exclusion_radius > 0.0) {
        return Err(EitError::domain("exclusion radius must be positive"));
    }
    let g1 = node_greens(r1, src, wc)?;
    let i1 = intensity_from_greens(&g1, src);
    let line = src.geometry();
    let cells = grid
        .as_slice()
        .par_iter()
        .map(|p| {
            let mask = if p.distance(r1) < exclusion_radius {
                Some(Mask::NearReference)
            } else if line.distance_to(p) < exclusion_radius {
                Some(Mask::NearSource)
            } else {
                None
            };
            if let Some(mask) = mask {
                return MapCell { point: *p, sample: None, mask };
            }
            match sample_from_reference(&g1, i1, p, src, wc) {
                Ok(s) => MapCell {
                    point: *p,
                    sample: Some(s),
                    mask: if s.mi_nats.is_some() { Mask::Valid } else { Mask::Saturated },
                },
                Err(_) => MapCell { point: *p, sample: None, mask: Mask::Undefined },
            }
        })
        .collect();
    Ok(CoherenceMap {
        reference: *r1,
        exclusion_radius,
        cells,
    })
}

/// Complex samples on a uniform grid with equal spacing `h` in y and z,
/// stored row-major (z outer, y inner).
#[derive(Debug, Clone)]
pub struct FieldGrid {
    y0: f64,
    z0: f64,
    h: f64,
    ny: usize,
    nz: usize,
    values: Vec<Complex64>,
}

impl FieldGrid {
    pub fn new(ys: &[f64], zs: &[f64], values: Vec<Complex64>) -> Result<Self> {
        if ys.len() < 3 || zs.len() < 3 {
            return Err(EitError::contract("grid needs at least 3 samples per axis"));
        }
        if values.len() != ys.len() * zs.len() {
            return Err(EitError::contract("value count does not match grid shape"));
        }
        let h = ys[1] - ys[0];
        let uniform = |axis: &[f64]| axis.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
        if !(h > 0.0) || !uniform(ys) || !uniform(zs) {
            return Err(EitError::contract("grid must be uniform with equal spacing in y and z"));
        }
        Ok(FieldGrid {
            y0: ys[0],
            z0: zs[0],
            h,
            ny: ys.len(),
            nz: zs.len(),
            values,
        })
    }

    /// Sample `f` on an `n×n` grid of spacing `h` centered at `center`.
    pub fn sample<F>(center: &Point, h: f64, n: usize, f: F) -> Result<Self>
    where
        F: Fn(&Point) -> Result<Complex64> + Sync,
    {
        let offset = 0.5 * (n as f64 - 1.0) * h;
        let ys: Vec<f64> = (0..n).map(|i| center.y - offset + i as f64 * h).collect();
        let zs: Vec<f64> = (0..n).map(|i| center.z - offset + i as f64 * h).collect();
        let points: Vec<Point> = zs.iter().flat_map(|&z| ys.iter().map(move |&y| Point::new(y, z))).collect();
        let values = points.par_iter().map(&f).collect::<Result<Vec<_>>>()?;
        Self::new(&ys, &zs, values)
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Lower-left corner `(y0, z0)`.
    pub fn origin(&self) -> Point {
        Point::new(self.y0, self.z0)
    }

    fn at(&self, iy: usize, iz: usize) -> Complex64 {
        self.values[iz * self.ny + iy]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Laplacian {
    /// Five-point `∂²_y + ∂²_z`, for fields independent of the out-of-plane coordinate.
    Planar,
    /// Adds `(1/z) ∂_z`: the 3-D Laplacian in the y–z plane of a field that is
    /// rotationally symmetric about the y-axis (any line source on that axis).
    Axisymmetric,
}

/// `max |∇²W + β²W| / (β² max|W|)` over interior grid points, with second-order
/// central differences.
pub fn helmholtz_residual(field: &FieldGrid, wc: &WaveContext, laplacian: Laplacian) -> Result<f64> {
    let beta2 = wc.wavenumber().powi(2);
    let h = field.h;
    let max_w = field.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max_w == 0.0 {
        return Ok(0.0);
    }
    if laplacian == Laplacian::Axisymmetric && !(field.z0 > 0.0) {
        return Err(EitError::domain("axisymmetric Laplacian needs z > 0 on the whole grid"));
    }
    let mut worst = 0.0f64;
    for iz in 1..field.nz - 1 {
        let z = field.z0 + iz as f64 * h;
        for iy in 1..field.ny - 1 {
            let c = field.at(iy, iz);
            let mut lap = (field.at(iy + 1, iz) + field.at(iy - 1, iz) + field.at(iy, iz + 1) + field.at(iy, iz - 1)
                - c * 4.0)
                / (h * h);
            if laplacian == Laplacian::Axisymmetric {
                lap += (field.at(iy, iz + 1) - field.at(iy, iz - 1)) / (2.0 * h * z);
            }
            worst = worst.max((lap + c * beta2).norm());
        }
    }
    Ok(worst / (beta2 * max_w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::trace_hyperbola;
    use crate::source::{build_quadrature, Intensity, QuadratureRule};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn wc() -> WaveContext {
        WaveContext::new(1.0).unwrap()
    }

    fn src() -> SourceModel {
        build_quadrature(LineSource::new(4.0).unwrap(), Intensity::Uniform(1.0), 10.0, QuadratureRule::Gauss, &wc()).unwrap()
    }

    #[test]
    fn on_axis_intensity_closed_form() {
        for z in [3.0, 16.0, 250.0] {
            let r = Point::new(0.0, z);
            let w = csd_pair(&r, &r, &src(), &wc()).unwrap();
            let exact = (4.0f64 / z).atan() / (8.0 * PI * PI * z);
            assert_relative_eq!(w.re, exact, max_relative = 1e-6);
            assert_eq!(w.im, 0.0);
        }
    }

    #[test]
    fn csd_conjugate_symmetry_and_dark_source() {
        let (a, b) = (Point::new(3.0, 7.0), Point::new(-11.0, 2.5));
        let s = src();
        assert_eq!(csd_pair(&a, &b, &s, &wc()).unwrap(), csd_pair(&b, &a, &s, &wc()).unwrap().conj());
        let dark = s.with_intensity(Intensity::Uniform(0.0)).unwrap();
        assert_eq!(csd_pair(&a, &b, &dark, &wc()).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(degree_of_coherence(&a, &b, &dark, &wc()), Err(EitError::UndefinedCoherence)));
    }

    #[test]
    fn on_support_point_is_singular() {
        assert!(matches!(
            csd_pair(&Point::new(0.3, 0.0), &Point::new(0.0, 4.0), &src(), &wc()),
            Err(EitError::Singularity { .. })
        ));
    }

    #[test]
    fn self_coherence_is_one() {
        let r = Point::new(5.0, 9.0);
        let mu = degree_of_coherence(&r, &r, &src(), &wc()).unwrap();
        assert!((mu - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn overshoot_is_clipped_or_rejected() {
        let mu = normalized_coherence(Complex64::new(1.0 + 1e-10, 0.0), 1.0, 1.0).unwrap();
        assert_eq!(mu.norm(), 1.0);
        assert!(matches!(
            normalized_coherence(Complex64::new(1.0 + 1e-6, 0.0), 1.0, 1.0),
            Err(EitError::Numerical(_))
        ));
    }

    #[test]
    fn mutual_information_values() {
        assert_eq!(mutual_information(Complex64::new(0.0, 0.0)).unwrap(), 0.0);
        let half = Complex64::from_polar(0.5f64.sqrt(), 0.7);
        assert_relative_eq!(mutual_information(half).unwrap(), 2f64.ln(), max_relative = 1e-12);
        assert!(matches!(
            mutual_information(Complex64::new(1.0, 0.0)),
            Err(EitError::Saturation { .. })
        ));
        assert!(mutual_information(Complex64::new(1.0 - 1e-13, 0.0)).is_err());
        assert_relative_eq!(nats_to_bits(2f64.ln()), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn fraunhofer_reference_values() {
        let line = LineSource::new(4.0).unwrap();
        let r = Point::new(30.0, 300.0);
        assert_eq!(fraunhofer_mu(&r, &r, &line, &wc()).unwrap(), 1.0);
        // two points on the Q_xi curves xi = 2 and xi = 3
        let c2 = trace_hyperbola(2.0, &line, 320.0, 1.0).unwrap();
        let c3 = trace_hyperbola(3.0, &line, 320.0, 1.0).unwrap();
        let p2 = *c2.as_slice().last().unwrap();
        let p3 = *c3.as_slice().last().unwrap();
        assert!(fraunhofer_mu(&p2, &p3, &line, &wc()).unwrap() < 1e-9);
        let g = FraunhoferGeometry::new(&p2, &p3, &line).unwrap();
        assert_relative_eq!(g.xi2() - g.xi1(), 1.0, max_relative = 1e-8);
        assert_relative_eq!(
            g.phi12,
            0.5 * (g.r2_plus + g.r2_minus) - 0.5 * (g.r1_plus + g.r1_minus),
            max_relative = 1e-15
        );
    }

    #[test]
    fn far_zone_pairs_follow_sinc() {
        let line = LineSource::new(4.0).unwrap();
        let s = src();
        let mut worst = 0.0f64;
        for i in 0..20 {
            let t = i as f64;
            let p1 = Point::new(-60.0 + 6.1 * t, 210.0 + 7.3 * t);
            let p2 = Point::new(-50.0 + 5.3 * (t * 1.7 % 20.0), 205.0 + 9.1 * (t * 2.3 % 20.0));
            let exact = degree_of_coherence(&p1, &p2, &s, &wc()).unwrap().norm();
            let approx = fraunhofer_mu(&p1, &p2, &line, &wc()).unwrap();
            worst = worst.max((exact - approx).abs());
        }
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn same_and_adjacent_hyperbola_coherence() {
        let line = LineSource::new(4.0).unwrap();
        let s = src();
        let far_z = 2.0 * 64.0; // 2ℓ²/λ
        let c0 = trace_hyperbola(2.0, &line, 600.0, 1.0).unwrap();
        let c1 = trace_hyperbola(3.0, &line, 600.0, 1.0).unwrap();
        let far0: Vec<Point> = c0.as_slice().iter().copied().filter(|p| p.z > far_z).collect();
        let far1: Vec<Point> = c1.as_slice().iter().copied().filter(|p| p.z > far_z).collect();
        let reference = far0[0];
        for p in far0.iter().step_by(40) {
            assert!(degree_of_coherence(&reference, p, &s, &wc()).unwrap().norm() > 0.95);
        }
        for p in far1.iter().step_by(40) {
            assert!(degree_of_coherence(&reference, p, &s, &wc()).unwrap().norm() < 0.1);
        }
    }

    #[test]
    fn map_bookkeeping_and_symmetry() {
        let s = src();
        let line = *s.geometry();
        let ys: Vec<f64> = (0..21).map(|i| -5.0 + 0.5 * i as f64).collect();
        let zs: Vec<f64> = (0..11).map(|i| 0.1 * i as f64).collect();
        let grid = ObservationSet::grid(&ys, &zs).unwrap();
        let r1 = Point::new(2.0, 0.6);
        let radius = 0.25;
        let map = coherence_map(&r1, &grid, &s, &wc(), radius).unwrap();
        let expected = grid
            .as_slice()
            .iter()
            .filter(|p| p.distance(&r1) < radius || line.distance_to(p) < radius)
            .count();
        assert_eq!(map.masked_count(), expected);
        assert!(expected > 0);

        // swapping the roles of the reference and a grid point leaves |mu| unchanged
        let probe = Point::new(-3.0, 0.9);
        let forward = coherence_map(&r1, &ObservationSet::points(vec![probe]).unwrap(), &s, &wc(), radius).unwrap();
        let backward = coherence_map(&probe, &ObservationSet::points(vec![r1]).unwrap(), &s, &wc(), radius).unwrap();
        assert_relative_eq!(
            forward.cells[0].abs_mu().unwrap(),
            backward.cells[0].abs_mu().unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn plane_wave_residual_and_convergence() {
        let wc = wc();
        let beta = wc.wavenumber();
        let plane = |p: &Point| Ok(Complex64::from_polar(1.0, -beta * p.y));
        let center = Point::new(0.0, 10.0);
        let r1 = helmholtz_residual(&FieldGrid::sample(&center, 1.0 / 20.0, 41, plane).unwrap(), &wc, Laplacian::Planar).unwrap();
        let r2 = helmholtz_residual(&FieldGrid::sample(&center, 1.0 / 40.0, 81, plane).unwrap(), &wc, Laplacian::Planar).unwrap();
        assert!(r1 < 0.01, "{r1}");
        let ratio = r1 / r2;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let ys = [0.0, 0.1, 0.25];
        let zs = [1.0, 1.1, 1.2];
        assert!(matches!(
            FieldGrid::new(&ys, &zs, vec![Complex64::new(0.0, 0.0); 9]),
            Err(EitError::Contract(_))
        ));
    }

    #[test]
    fn far_zone_csd_propagates() {
        let wc = wc();
        let s = src();
        let r2 = Point::new(1.0, 200.0);
        let center = Point::new(0.0, 200.0);
        let f = |p: &Point| csd_pair(p, &r2, &s, &wc);
        let coarse = helmholtz_residual(&FieldGrid::sample(&center, 1.0 / 20.0, 21, f).unwrap(), &wc, Laplacian::Axisymmetric).unwrap();
        let fine = helmholtz_residual(&FieldGrid::sample(&center, 1.0 / 40.0, 41, f).unwrap(), &wc, Laplacian::Axisymmetric).unwrap();
        assert!(coarse < 0.02, "{coarse}");
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn mi_strictly_increasing(a in 0.0f64..0.999, b in 0.0f64..0.999) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mlo = mutual_information(Complex64::new(lo, 0.0)).unwrap();
            let mhi = mutual_information(Complex64::new(0.0, hi)).unwrap();
            prop_assert!(mhi > mlo);
        }

        #[test]
        fn mu_invariant_under_intensity_scaling(y in -40.0f64..40.0, z in 1.0f64..60.0, k in 1e-3f64..1e3) {
            let s = src();
            let scaled = s.with_intensity(Intensity::Uniform(k)).unwrap();
            let r1 = Point::new(20.0, 16.0);
            let r2 = Point::new(y, z);
            let a = degree_of_coherence(&r1, &r2, &s, &wc()).unwrap();
            let b = degree_of_coherence(&r1, &r2, &scaled, &wc()).unwrap();
            prop_assert!((a - b).norm() < 1e-12);
            prop_assert!(a.norm() <= 1.0);
        }

        #[test]
        fn fraunhofer_depends_only_on_xi(y in -40.0f64..40.0, z in 1.0f64..60.0, s in 1.0f64..80.0) {
            let line = LineSource::new(4.0).unwrap();
            let r1 = Point::new(y, z);
            let xi = xi_of_point(&r1, &line).unwrap();
            prop_assume!(xi.abs() < 7.9);
            // another point with the same xi
            let moved = crate::geometry::Hyperbola::new(xi, line).unwrap().trace(s, s / 4.0).unwrap();
            let r1b = *moved.as_slice().last().unwrap();
            let r2 = Point::new(-3.0, 50.0);
            let a = fraunhofer_mu(&r1, &r2, &line, &wc()).unwrap();
            let b = fraunhofer_mu(&r1b, &r2, &line, &wc()).unwrap();
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
