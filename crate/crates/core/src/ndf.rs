//! Closed-form estimates of the number of degrees of freedom.
//!
//! Estimators return reals; rounding is left to the caller. The scalar counts
//! double when both polarizations are considered.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{EitError, Result};
use crate::geometry::{LineSource, WaveContext};
use crate::source::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSpaceDescriptor {
    pub n_dims: u32,
    /// length^n · (rad/length)^n
    pub volume: f64,
}

impl PhaseSpaceDescriptor {
    pub fn new(n_dims: u32, volume: f64) -> Result<Self> {
        if !(n_dims == 1 || n_dims == 2) {
            return Err(EitError::domain(format!("phase-space dimension must be 1 or 2, got {n_dims}")));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(EitError::domain(format!("phase-space volume must be positive, got {volume}")));
        }
        Ok(PhaseSpaceDescriptor { n_dims, volume })
    }

    /// Line source seen from one half-plane: `ℓ × 2β`.
    pub fn line_half_plane(line: &LineSource, wc: &WaveContext) -> Self {
        PhaseSpaceDescriptor {
            n_dims: 1,
            volume: 2.0 * wc.wavenumber() * line.length(),
        }
    }

    /// Line source seen from the full plane (both half-planes counted).
    pub fn line_full_plane(line: &LineSource, wc: &WaveContext) -> Self {
        PhaseSpaceDescriptor {
            n_dims: 1,
            volume: 4.0 * wc.wavenumber() * line.length(),
        }
    }
}

pub fn ndf_phase_space(d: &PhaseSpaceDescriptor) -> f64 {
    d.volume / (2.0 * PI).powi(d.n_dims as i32)
}

pub fn ndf_sphere(source_area: f64, wc: &WaveContext) -> Result<f64> {
    check_area(source_area)?;
    let lambda = wc.wavelength();
    Ok(PI * source_area / (lambda * lambda))
}

fn check_area(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(EitError::domain(format!("source area must be positive, got {a}")));
    }
    Ok(())
}

/// `π sin²θ` for a cone of half-angle `θ` about the surface normal.
pub fn projected_solid_angle(theta_max: f64) -> Result<f64> {
    if !(0.0..=PI / 2.0).contains(&theta_max) {
        return Err(EitError::domain(format!("cone half-angle {theta_max} outside [0, π/2]")));
    }
    let s = theta_max.sin();
    Ok(PI * s * s)
}

/// Projected solid angle of a star-shaped region of the visible disk.
///
/// `cosθ dΩ = dk_x dk_y / β²`, so the projected solid angle is the area of the
/// region in the unit-radius `k/β` disk. `boundary(φ)` gives the region's
/// radius in that disk and must lie in `[0, 1]`.
pub fn projected_solid_angle_quadrature<F>(boundary: F, n_phi: usize, n_rho: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if n_phi == 0 || n_rho == 0 {
        return Err(EitError::domain("quadrature needs at least one sample per axis"));
    }
    let (x, w) = gauss_legendre(n_rho);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut total = 0.0;
    for i in 0..n_phi {
        let phi = (i as f64 + 0.5) * dphi;
        let rho = boundary(phi);
        if !(0.0..=1.0 + 1e-12).contains(&rho) {
            return Err(EitError::domain(format!("mask radius {rho} at φ = {phi} leaves the visible disk")));
        }
        // ∫_0^ρ r dr on Gauss–Legendre nodes mapped from [-1, 1]
        let half = 0.5 * rho;
        let radial: f64 = x.iter().zip(&w).map(|(&t, &wt)| wt * half * (half * (t + 1.0))).sum();
        total += radial * dphi;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiometricEstimate {
    pub source_area: f64,
    pub projected_solid_angle: f64,
    pub etendue: f64,
    /// Phase-space cell mapped to area: `(2π)²/β² = λ²`.
    pub cell: f64,
    pub n_cells: f64,
    /// Set when the étendue of a non-convex or self-occluding source may be overestimated.
    pub occlusion_caveat: bool,
}

pub fn ndf_radiometric(source_area: f64, omega_prime: f64, wc: &WaveContext) -> Result<RadiometricEstimate> {
    check_area(source_area)?;
    if !(0.0..=PI).contains(&omega_prime) {
        return Err(EitError::domain(format!("projected solid angle {omega_prime} outside [0, π]")));
    }
    let lambda = wc.wavelength();
    let cell = lambda * lambda;
    let etendue = source_area * omega_prime;
    Ok(RadiometricEstimate {
        source_area,
        projected_solid_angle: omega_prime,
        etendue,
        cell,
        n_cells: etendue / cell,
        occlusion_caveat: false,
    })
}

impl RadiometricEstimate {
    pub fn with_occlusion_caveat(mut self) -> Self {
        self.occlusion_caveat = true;
        self
    }
}
