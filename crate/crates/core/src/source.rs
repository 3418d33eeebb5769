//! Discretized source: line geometry, spectral intensity profile and the
//! quadrature rule used to integrate over the source.

use std::f64::consts::PI;

use crate::error::{EitError, Result};
use crate::geometry::{LineSource, Point, WaveContext};

/// Spectral intensity `I(y')` across the source.
#[derive(Debug, Clone, PartialEq)]
pub enum Intensity {
    Uniform(f64),
    /// Samples at uniformly spaced positions from `-a` to `a` inclusive,
    /// linearly interpolated. A single sample is a uniform profile.
    Tabulated(Vec<f64>),
}

impl Intensity {
    pub fn eval(&self, y: f64, half_length: f64) -> f64 {
        match self {
            Intensity::Uniform(v) => *v,
            Intensity::Tabulated(values) => {
                if values.len() == 1 {
                    return values[0];
                }
                let t = ((y + half_length) / (2.0 * half_length)).clamp(0.0, 1.0);
                let x = t * (values.len() - 1) as f64;
                let i = (x.floor() as usize).min(values.len() - 2);
                let f = x - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    /// Multiply every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Intensity {
        match self {
            Intensity::Uniform(v) => Intensity::Uniform(v * factor),
            Intensity::Tabulated(values) => Intensity::Tabulated(values.iter().map(|v| v * factor).collect()),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Intensity::Uniform(v) => *v >= 0.0 && v.is_finite(),
            Intensity::Tabulated(values) => !values.is_empty() && values.iter().all(|v| *v >= 0.0 && v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(EitError::domain("intensity must be finite and non-negative"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    /// Uniform nodes at cell midpoints, equal weights.
    Midpoint,
    /// Gauss–Legendre on panels no longer than one wavelength.
    Gauss,
}

/// Line source with quadrature nodes, weights and the intensity sampled at the nodes.
#[derive(Debug, Clone)]
pub struct SourceModel {
    geometry: LineSource,
    intensity: Intensity,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    node_intensity: Vec<f64>,
    rule: QuadratureRule,
}

impl SourceModel {
    pub fn geometry(&self) -> &LineSource {
        &self.geometry
    }

    pub fn intensity(&self) -> &Intensity {
        &self.intensity
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    /// Node abscissae `y'` along the source.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_points(&self) -> impl ExactSizeIterator<Item = Point> + '_ {
        self.nodes.iter().map(|&y| Point::new(y, 0.0))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_intensity(&self) -> &[f64] {
        &self.node_intensity
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `I_q w_q`, the weight of node `q` in the CSD double sum.
    pub fn column_weight(&self, q: usize) -> f64 {
        self.node_intensity[q] * self.weights[q]
    }

    /// Same nodes and weights, intensity replaced.
    pub fn with_intensity(&self, intensity: Intensity) -> Result<SourceModel> {
        intensity.validate()?;
        let a = self.geometry.half_length();
        Ok(SourceModel {
            node_intensity: self.nodes.iter().map(|&y| intensity.eval(y, a)).collect(),
            intensity,
            ..self.clone()
        })
    }

    /// Same nodes, every weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> SourceModel {
        SourceModel {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }

    /// Single node at `y` with weight `weight`; useful for degenerate checks.
    pub fn single_node(geometry: LineSource, y: f64, weight: f64, intensity: f64) -> Result<SourceModel> {
        if !(weight > 0.0) {
            return Err(EitError::domain("quadrature weight must be positive"));
        }
        let intensity = Intensity::Uniform(intensity);
        intensity.validate()?;
        let value = intensity.eval(y, geometry.half_length());
        Ok(SourceModel {
            geometry,
            intensity,
            nodes: vec![y],
            weights: vec![weight],
            node_intensity: vec![value],
            rule: QuadratureRule::Midpoint,
        })
    }

    pub(crate) fn check_off_support(&self, p: &Point) -> Result<()> {
        let d = self.geometry.distance_to(p);
        if d <= 1e-12 * self.geometry.half_length() {
            return Err(EitError::Singularity {
                distance: d,
                obs_index: None,
                node_index: None,
            });
        }
        Ok(())
    }
}

/// Place quadrature nodes on the source.
///
/// `Midpoint` uses `ceil(ℓ/λ · nodes_per_wavelength)` equal cells. `Gauss`
/// splits the source into `ceil(ℓ/λ)` equal panels and uses
/// `ceil(nodes_per_wavelength)` Gauss–Legendre points on each.
pub fn build_quadrature(
    geometry: LineSource,
    intensity: Intensity,
    nodes_per_wavelength: f64,
    rule: QuadratureRule,
    wc: &WaveContext,
) -> Result<SourceModel> {
    if !(nodes_per_wavelength >= 4.0) {
        return Err(EitError::Resolution { nodes_per_wavelength });
    }
    intensity.validate()?;
    let a = geometry.half_length();
    let len = geometry.length();
    let wavelengths = len / wc.wavelength();

    let (nodes, weights) = match rule {
        QuadratureRule::Midpoint => {
            let q = (wavelengths * nodes_per_wavelength * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = len / q as f64;
            let nodes = (0..q).map(|i| -a + (i as f64 + 0.5) * h).collect();
            (nodes, vec![h; q])
        }
        QuadratureRule::Gauss => {
            let panels = (wavelengths * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let order = nodes_per_wavelength.ceil() as usize;
            let (x, w) = gauss_legendre(order);
            let h = len / panels as f64;
            let mut nodes = Vec::with_capacity(panels * order);
            let mut weights = Vec::with_capacity(panels * order);
            for p in 0..panels {
                let c = -a + (p as f64 + 0.5) * h;
                for (xi, wi) in x.iter().zip(&w) {
                    nodes.push(c + 0.5 * h * xi);
                    weights.push(0.5 * h * wi);
                }
            }
            (nodes, weights)
        }
    };
    let node_intensity = nodes.iter().map(|&y| intensity.eval(y, a)).collect();
    Ok(SourceModel {
        geometry,
        intensity,
        nodes,
        weights,
        node_intensity,
        rule,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending, by Newton
/// iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_ku;
    use approx::assert_relative_eq;

    fn wc() -> WaveContext {
        WaveContext::new(1.0).unwrap()
    }

    #[test]
    fn midpoint_rule_arithmetic() {
        let src = build_quadrature(
            LineSource::from_length(8.0).unwrap(),
            Intensity::Uniform(1.0),
            10.0,
            QuadratureRule::Midpoint,
            &wc(),
        )
        .unwrap();
        assert_eq!(src.len(), 80);
        for w in src.weights() {
            assert_relative_eq!(*w, 0.1, max_relative = 1e-14);
        }
        let total: f64 = src.weights().iter().sum();
        assert_relative_eq!(total, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn gauss_weights_partition_source() {
        for npw in [4.0, 8.0, 13.0] {
            let src = build_quadrature(
                LineSource::from_length(8.0).unwrap(),
                Intensity::Uniform(1.0),
                npw,
                QuadratureRule::Gauss,
                &wc(),
            )
            .unwrap();
            let total: f64 = src.weights().iter().sum();
            assert_relative_eq!(total, 8.0, max_relative = 1e-12);
            assert!(src.weights().iter().all(|w| *w > 0.0));
            assert!(src.nodes().windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // exact up to degree 15
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(integral, 2.0 / 15.0, max_relative = 1e-13);
        let (x, w) = gauss_legendre(5);
        assert_eq!(x[2], 0.0);
        assert_relative_eq!(w[2], 128.0 / 225.0, max_relative = 1e-14);
    }

    #[test]
    fn coarse_resolution_rejected() {
        let r = build_quadrature(
            LineSource::from_length(8.0).unwrap(),
            Intensity::Uniform(1.0),
            3.9,
            QuadratureRule::Midpoint,
            &wc(),
        );
        assert!(matches!(r, Err(EitError::Resolution { .. })));
    }

    #[test]
    fn negative_intensity_rejected() {
        let r = build_quadrature(
            LineSource::from_length(8.0).unwrap(),
            Intensity::Tabulated(vec![1.0, -0.5]),
            10.0,
            QuadratureRule::Midpoint,
            &wc(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn tabulated_interpolation() {
        let i = Intensity::Tabulated(vec![0.0, 2.0, 4.0]);
        assert_eq!(i.eval(-1.0, 1.0), 0.0);
        assert_eq!(i.eval(0.0, 1.0), 2.0);
        assert_eq!(i.eval(0.5, 1.0), 3.0);
        assert_eq!(i.eval(1.0, 1.0), 4.0);
    }

    #[test]
    fn midpoint_error_decreases_with_refinement() {
        let wc = wc();
        let z = 20.0;
        let r = Point::new(0.0, z);
        let exact = (4.0f64 / z).atan() / (8.0 * PI * PI * z);
        let errors: Vec<f64> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&npw| {
                let src = build_quadrature(
                    LineSource::new(4.0).unwrap(),
                    Intensity::Uniform(1.0),
                    npw,
                    QuadratureRule::Midpoint,
                    &wc,
                )
                .unwrap();
                (kernel_ku(&r, &r, &src, &wc).unwrap().re - exact).abs() / exact
            })
            .collect();
        assert!(errors.windows(2).all(|e| e[1] < e[0]), "{errors:?}");
    }
}
