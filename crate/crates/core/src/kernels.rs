//! Scalar free-space Green's function, `exp(-j β R) / (4π R)`, for the
//! `exp(+j ω t)` time convention.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{EitError, Result};
use crate::geometry::{Point, WaveContext};
use crate::source::SourceModel;

/// Distances below this fraction of a wavelength raise the near-singularity flag.
pub const NEAR_SINGULAR_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenSample {
    pub value: Complex64,
    pub distance: f64,
    pub near_singular: bool,
}

pub fn green_sample(r: &Point, r_src: &Point, wc: &WaveContext) -> Result<GreenSample> {
    let distance = r.distance(r_src);
    if distance == 0.0 {
        return Err(EitError::Singularity {
            distance,
            obs_index: None,
            node_index: None,
        });
    }
    let phase = -wc.wavenumber() * distance;
    Ok(GreenSample {
        value: Complex64::from_polar(1.0 / (4.0 * PI * distance), phase),
        distance,
        near_singular: distance < NEAR_SINGULAR_FRACTION * wc.wavelength(),
    })
}

pub fn green(r: &Point, r_src: &Point, wc: &WaveContext) -> Result<Complex64> {
    green_sample(r, r_src, wc).map(|g| g.value)
}

/// `G(r, r') sqrt(I(r'))`, the kernel whose Gram operator is the incoherent-source CSD.
pub fn weighted_green(r: &Point, r_src: &Point, intensity: f64, wc: &WaveContext) -> Result<Complex64> {
    if !(intensity >= 0.0) {
        return Err(EitError::domain(format!("intensity must be non-negative, got {intensity}")));
    }
    Ok(green(r, r_src, wc)? * intensity.sqrt())
}

/// Quadrature form of `∫ I(r') G(r1, r') G*(r2, r') dr'` over the source.
pub fn kernel_ku(r1: &Point, r2: &Point, src: &SourceModel, wc: &WaveContext) -> Result<Complex64> {
    src.check_off_support(r1)?;
    src.check_off_support(r2)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (q, node) in src.node_points().enumerate() {
        let c = src.column_weight(q);
        if c == 0.0 {
            continue;
        }
        let g1 = green(r1, &node, wc)?;
        let g2 = green(r2, &node, wc)?;
        acc += g1 * g2.conj() * c;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LineSource;
    use crate::source::{build_quadrature, Intensity, QuadratureRule};
    use approx::assert_relative_eq;

    fn wc() -> WaveContext {
        WaveContext::new(1.0).unwrap()
    }

    #[test]
    fn full_and_half_cycle_phases() {
        let o = Point::new(0.0, 0.0);
        let g = green(&Point::new(0.0, 1.0), &o, &wc()).unwrap();
        assert_relative_eq!(g.re, 1.0 / (4.0 * PI), max_relative = 1e-14);
        assert!(g.im.abs() < 1e-15);
        let g = green(&Point::new(0.5, 0.0), &o, &wc()).unwrap();
        assert_relative_eq!(g.re, -1.0 / (2.0 * PI), max_relative = 1e-14);
        assert!(g.im.abs() < 1e-15);
    }

    #[test]
    fn phase_decreases_with_distance() {
        let o = Point::new(0.0, 0.0);
        let g = green(&Point::new(0.0, 0.1), &o, &wc()).unwrap();
        assert!(g.im < 0.0);
    }

    #[test]
    fn singular_and_near_singular() {
        let o = Point::new(0.3, 0.2);
        assert!(matches!(green(&o, &o, &wc()), Err(EitError::Singularity { .. })));
        let s = green_sample(&Point::new(0.3, 0.2 + 1e-11), &o, &wc()).unwrap();
        assert!(s.near_singular);
        let s = green_sample(&Point::new(0.3, 1.2), &o, &wc()).unwrap();
        assert!(!s.near_singular);
    }

    #[test]
    fn weighted_green_scaling() {
        let (r, s) = (Point::new(1.0, 2.0), Point::new(0.1, 0.0));
        let g = green(&r, &s, &wc()).unwrap();
        assert_eq!(weighted_green(&r, &s, 0.0, &wc()).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(weighted_green(&r, &s, 1.0, &wc()).unwrap(), g);
        assert_eq!(weighted_green(&r, &s, 4.0, &wc()).unwrap(), g * 2.0);
        assert!(weighted_green(&r, &s, -1.0, &wc()).is_err());
    }

    #[test]
    fn on_axis_diagonal_matches_closed_form() {
        let wc = wc();
        let line = LineSource::new(4.0).unwrap();
        let src = build_quadrature(line, Intensity::Uniform(1.0), 20.0, QuadratureRule::Gauss, &wc).unwrap();
        for z in [2.0, 16.0, 200.0] {
            let r = Point::new(0.0, z);
            let k = kernel_ku(&r, &r, &src, &wc).unwrap();
            let exact = (4.0f64 / z).atan() / (8.0 * PI * PI * z);
            assert_relative_eq!(k.re, exact, max_relative = 1e-6);
            assert_eq!(k.im, 0.0);
        }
    }

    #[test]
    fn kernel_on_support_is_error() {
        let wc = wc();
        let line = LineSource::new(4.0).unwrap();
        let src = build_quadrature(line, Intensity::Uniform(1.0), 10.0, QuadratureRule::Midpoint, &wc).unwrap();
        assert!(kernel_ku(&Point::new(1.0, 0.0), &Point::new(0.0, 3.0), &src, &wc).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn magnitude_identity(y in -30.0f64..30.0, z in 0.001f64..30.0) {
            let r = Point::new(y, z);
            let g = green_sample(&r, &Point::new(0.0, 0.0), &wc()).unwrap();
            prop_assert!((g.value.norm() * 4.0 * PI * g.distance - 1.0).abs() < 1e-15);
        }

        #[test]
        fn reciprocity(y1 in -9.0f64..9.0, z1 in 0.1f64..9.0, y2 in -9.0f64..9.0, z2 in -9.0f64..9.0) {
            let (a, b) = (Point::new(y1, z1), Point::new(y2, z2));
            prop_assert_eq!(green(&a, &b, &wc()).unwrap(), green(&b, &a, &wc()).unwrap());
        }

        #[test]
        fn ku_hermitian(y1 in -20.0f64..20.0, z1 in 0.5f64..20.0, y2 in -20.0f64..20.0, z2 in 0.5f64..20.0) {
            let wc = wc();
            let line = LineSource::new(4.0).unwrap();
            let src = build_quadrature(line, Intensity::Uniform(1.0), 10.0, QuadratureRule::Midpoint, &wc).unwrap();
            let (a, b) = (Point::new(y1, z1), Point::new(y2, z2));
            let k12 = kernel_ku(&a, &b, &src, &wc).unwrap();
            let k21 = kernel_ku(&b, &a, &src, &wc).unwrap();
            prop_assert!((k12 - k21.conj()).norm() <= 1e-15 * k12.norm().max(1e-300));
            let kaa = kernel_ku(&a, &a, &src, &wc).unwrap();
            prop_assert!(kaa.re > 0.0 && kaa.im == 0.0);
        }
    }
}
