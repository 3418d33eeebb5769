//! Wigner distribution of the CSD along an observation curve.
//!
//! For a midpoint `s` on the curve the lag correlation
//! `C(s, Δs) = W(p(s + Δs/2), p(s − Δs/2))` is tapered with a Hann window of
//! half-width `L` and transformed onto a grid of tangential wavenumbers:
//!
//! ```text
//! WDF(s, k) = Σ_j C(s, Δs_j) hann(Δs_j) exp(+j k Δs_j) δ
//! ```
//!
//! With the `exp(+jωt)` convention a wave travelling towards increasing `s`
//! behaves as `exp(-jβs)`, so `C = exp(-jβΔs)`; the `exp(+jkΔs)` kernel puts
//! it at `k = +β`, i.e. `k` is the physical wavevector component along the
//! curve. Because `C(s, −Δs) = C(s, Δs)*` the transform is real.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{EitError, Result};
use crate::geometry::{ObservationSet, WaveContext};
use crate::kernels::green;
use crate::source::SourceModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerParams {
    /// Half-width `L` of the lag window, meters.
    pub window_half_width: f64,
    /// Number of wavenumber samples over `[-k_max, k_max]` (inclusive).
    pub n_k: usize,
    /// Extent of the k grid; must be at least β.
    pub k_max: f64,
    /// Evaluate every `stride`-th curve point as a midpoint.
    pub stride: usize,
}

impl WignerParams {
    /// Window 8λ, 256 samples over ±1.5β, every curve point.
    pub fn defaults(wc: &WaveContext) -> Self {
        WignerParams {
            window_half_width: 8.0 * wc.wavelength(),
            n_k: 256,
            k_max: 1.5 * wc.wavenumber(),
            stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WignerMap {
    pub s_values: Vec<f64>,
    pub k_values: Vec<f64>,
    /// Row-major `[s][k]`, real part of the transform.
    pub values: Vec<f64>,
    pub window_half_width: f64,
    /// Columns whose lag window was cut by the curve ends or the source.
    pub truncated: Vec<bool>,
    /// Largest `|Im WDF|` in each column.
    pub imag_max: Vec<f64>,
}

impl WignerMap {
    pub fn n_s(&self) -> usize {
        self.s_values.len()
    }

    pub fn n_k(&self) -> usize {
        self.k_values.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let n = self.n_k();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn delta_k(&self) -> f64 {
        if self.k_values.len() < 2 {
            0.0
        } else {
            self.k_values[1] - self.k_values[0]
        }
    }

    pub fn delta_s(&self) -> f64 {
        if self.s_values.len() < 2 {
            0.0
        } else {
            self.s_values[1] - self.s_values[0]
        }
    }

    /// Index of the column nearest to `s`.
    pub fn column_index(&self, s: f64) -> Result<usize> {
        let (first, last) = match (self.s_values.first(), self.s_values.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(EitError::domain("empty Wigner map")),
        };
        let half = 0.5 * self.delta_s();
        if s < first - half || s > last + half {
            return Err(EitError::domain(format!("s = {s} outside map range [{first}, {last}]")));
        }
        Ok(self
            .s_values
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - s).abs().total_cmp(&(b.1 - s).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0))
    }
}

/// Uniform k grid over `[-k_max, k_max]`.
pub fn k_grid(k_max: f64, n_k: usize) -> Vec<f64> {
    if n_k == 1 {
        return vec![0.0];
    }
    let dk = 2.0 * k_max / (n_k - 1) as f64;
    (0..n_k).map(|i| -k_max + i as f64 * dk).collect()
}

fn hann(lag: f64, half_width: f64) -> f64 {
    0.5 * (1.0 + (PI * lag / half_width).cos())
}

/// Transform lag correlations sampled at `Δs_j = j·lag_step`, `|j| <= n_lags`.
///
/// `corr(col, j)` returns `None` for lags that cannot be evaluated; those
/// samples are dropped and the column is flagged as truncated.
pub fn wdf_from_correlation<F>(
    s_values: Vec<f64>,
    lag_step: f64,
    n_lags: usize,
    window_half_width: f64,
    k_values: Vec<f64>,
    corr: F,
) -> WignerMap
where
    F: Fn(usize, i64) -> Option<Complex64> + Sync,
{
    let n_k = k_values.len();
    let columns: Vec<(Vec<f64>, bool, f64)> = (0..s_values.len())
        .into_par_iter()
        .map(|col| {
            let mut lags = Vec::with_capacity(2 * n_lags + 1);
            let mut truncated = false;
            for j in -(n_lags as i64)..=(n_lags as i64) {
                let lag = j as f64 * lag_step;
                match corr(col, j) {
                    Some(c) => lags.push((lag, c * (hann(lag, window_half_width) * lag_step))),
                    None => truncated = true,
                }
            }
            let mut re = Vec::with_capacity(n_k);
            let mut im_max = 0.0f64;
            for &k in &k_values {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(lag, c) in &lags {
                    acc += c * Complex64::from_polar(1.0, k * lag);
                }
                re.push(acc.re);
                im_max = im_max.max(acc.im.abs());
            }
            (re, truncated, im_max)
        })
        .collect();

    let mut values = Vec::with_capacity(s_values.len() * n_k);
    let mut truncated = Vec::with_capacity(s_values.len());
    let mut imag_max = Vec::with_capacity(s_values.len());
    for (re, t, im) in columns {
        values.extend(re);
        truncated.push(t);
        imag_max.push(im);
    }
    WignerMap {
        s_values,
        k_values,
        values,
        window_half_width,
        truncated,
        imag_max,
    }
}

/// Wigner distribution of the source's CSD along `curve`.
///
/// The curve must carry uniformly spaced arclength (as produced by hyperbola
/// tracing). Lags are taken as `Δs = 2 j ds` so both lag endpoints fall on
/// curve samples.
pub fn wdf_along_curve(
    curve: &ObservationSet,
    src: &SourceModel,
    wc: &WaveContext,
    params: &WignerParams,
) -> Result<WignerMap> {
    let s = curve
        .arclength()
        .ok_or_else(|| EitError::contract("Wigner analysis needs a curve with arclength"))?;
    if s.len() < 2 {
        return Err(EitError::contract("curve needs at least two samples"));
    }
    let ds = s[1] - s[0];
    if s.windows(2).any(|w| ((w[1] - w[0]) - ds).abs() > 1e-9 * ds) {
        return Err(EitError::contract("curve arclength must be uniformly spaced"));
    }
    let half = params.window_half_width;
    if !(half >= 2.0 * wc.wavelength() * (1.0 - 1e-12)) {
        return Err(EitError::domain("window half-width must be at least 2λ"));
    }
    let length = s[s.len() - 1] - s[0];
    if !(length >= 4.0 * half * (1.0 - 1e-12)) {
        return Err(EitError::domain(format!(
            "curve length {length} is shorter than four window half-widths ({})",
            4.0 * half
        )));
    }
    if !(params.k_max >= wc.wavenumber() * (1.0 - 1e-12)) || params.n_k == 0 {
        return Err(EitError::domain("k grid must reach at least β and hold at least one sample"));
    }
    let stride = params.stride.max(1);

    // Green's functions from every node to every curve point; None on the source.
    let pts = curve.as_slice();
    let nodes: Vec<_> = src.node_points().collect();
    let weights: Vec<f64> = (0..src.len()).map(|q| src.column_weight(q)).collect();
    let greens: Vec<Option<Vec<Complex64>>> = pts
        .par_iter()
        .map(|p| {
            if src.check_off_support(p).is_err() {
                return None;
            }
            nodes.iter().map(|n| green(p, n, wc).ok()).collect()
        })
        .collect();

    let cross = |a: usize, b: usize| -> Option<Complex64> {
        let (ga, gb) = (greens[a].as_ref()?, greens[b].as_ref()?);
        let mut acc = Complex64::new(0.0, 0.0);
        for q in 0..ga.len() {
            acc += ga[q] * gb[q].conj() * weights[q];
        }
        Some(acc)
    };

    let n_lags = (half / (2.0 * ds) * (1.0 + 1e-12)).floor() as usize;
    let mids: Vec<usize> = (0..pts.len()).step_by(stride).filter(|&i| greens[i].is_some()).collect();
    let s_values: Vec<f64> = mids.iter().map(|&i| s[i]).collect();
    let n = pts.len() as i64;
    let map = wdf_from_correlation(
        s_values,
        2.0 * ds,
        n_lags,
        half,
        k_grid(params.k_max, params.n_k),
        |col, j| {
            let i = mids[col] as i64;
            let (plus, minus) = (i + j, i - j);
            if plus < 0 || minus < 0 || plus >= n || minus >= n {
                return None;
            }
            cross(plus as usize, minus as usize)
        },
    );
    Ok(map)
}

/// `intensity[s] = Σ_k WDF Δk / 2π` and `spectrum[k] = Σ_s WDF Δs`.
#[derive(Debug, Clone)]
pub struct Marginals {
    pub intensity: Vec<f64>,
    pub spectrum: Vec<f64>,
}

pub fn wdf_marginals(map: &WignerMap) -> Marginals {
    let (dk, ds) = (map.delta_k(), map.delta_s());
    let n_k = map.n_k();
    let intensity = (0..map.n_s())
        .map(|i| map.column(i).iter().sum::<f64>() * dk / (2.0 * PI))
        .collect();
    let spectrum = (0..n_k)
        .map(|k| (0..map.n_s()).map(|i| map.values[i * n_k + k]).sum::<f64>() * ds)
        .collect();
    Marginals { intensity, spectrum }
}

/// `Σ_{s,k} WDF Δs Δk / 2π`.
pub fn wdf_total_power(map: &WignerMap) -> f64 {
    map.values.iter().sum::<f64>() * map.delta_s() * map.delta_k() / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCentroid {
    pub s: f64,
    /// Mean of `k` weighted by the positive part of the column.
    pub k: f64,
    /// Standard deviation of `k` under the same weights.
    pub spread: f64,
    /// Mass of the negative lobes relative to the positive mass.
    pub negative_fraction: f64,
}

pub fn spectral_centroid(map: &WignerMap, s: f64) -> Result<SpectralCentroid> {
    let i = map.column_index(s)?;
    let col = map.column(i);
    let (mut mass, mut first, mut second, mut negative) = (0.0, 0.0, 0.0, 0.0);
    for (&k, &v) in map.k_values.iter().zip(col) {
        if v > 0.0 {
            mass += v;
            first += v * k;
            second += v * k * k;
        } else {
            negative -= v;
        }
    }
    if !(mass > 0.0) {
        return Err(EitError::UndefinedCentroid);
    }
    let k = first / mass;
    Ok(SpectralCentroid {
        s: map.s_values[i],
        k,
        spread: (second / mass - k * k).max(0.0).sqrt(),
        negative_fraction: negative / mass,
    })
}
