//! Monte-Carlo ensembles of spatially incoherent source currents.
//!
//! Each node carries an independent circular complex Gaussian current with
//! `Var(J_q) = I_q / w_q`, so `E{(w_q J_q)(w_p J_p)*} = I_q w_q δ_qp` and the
//! ensemble CSD converges to the quadrature CSD of the spectral module.
//!
//! Realization `m` is drawn from ChaCha20 keyed by `seed` on stream `m`, two
//! 64-bit words per node, so any realization can be regenerated on its own.
//! Realizations are reduced in fixed-size chunks whose partial sums are
//! combined in chunk order, which makes the result independent of the
//! number of worker threads.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{EitError, Result};
use crate::geometry::{ObservationSet, WaveContext};
use crate::kernels::green;
use crate::source::SourceModel;
use crate::spectral::{CMatrix, CSDEigensystem};

pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha), stream = realization index, 2 words of 64 bits per node, Box-Muller";

/// Realizations per reduction chunk.
const CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub seed: u64,
    pub src: SourceModel,
    pub obs: ObservationSet,
    pub wc: WaveContext,
}

impl EnsembleConfig {
    pub fn new(n_realizations: usize, seed: u64, src: SourceModel, obs: ObservationSet, wc: WaveContext) -> Result<Self> {
        if n_realizations < 2 {
            return Err(EitError::domain(format!("ensemble needs at least 2 realizations, got {n_realizations}")));
        }
        Ok(EnsembleConfig { n_realizations, seed, src, obs, wc })
    }
}

/// Projections `a[m][n] = ψ_nᴴ E^(m)`, realization × mode.
#[derive(Debug, Clone)]
pub struct KLCoefficients {
    pub a: CMatrix,
}

fn unit_open(bits: u64) -> f64 {
    // (0, 1]
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn unit_half_open(bits: u64) -> f64 {
    // [0, 1)
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn draw_realization(cfg: &EnsembleConfig, index: usize) -> Result<Vec<Complex64>> {
    if index >= cfg.n_realizations {
        return Err(EitError::Range { index, len: cfg.n_realizations });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    rng.set_word_pos(0);
    let src = &cfg.src;
    Ok((0..src.len())
        .map(|q| {
            let (u1, u2) = (unit_open(rng.next_u64()), unit_half_open(rng.next_u64()));
            let variance = src.node_intensity()[q] / src.weights()[q];
            Complex64::from_polar((-variance * u1.ln()).sqrt(), 2.0 * PI * u2)
        })
        .collect())
}

/// `P[m][q] = sqrt(v_m) w_q G(r_m, r'_q)`, with `v_m` the observation weight (1 if absent).
fn propagation_matrix(obs: &ObservationSet, src: &SourceModel, wc: &WaveContext) -> Result<CMatrix> {
    let nodes: Vec<_> = src.node_points().collect();
    let rows: Vec<Vec<Complex64>> = obs
        .as_slice()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            src.check_off_support(p).map_err(|e| e.at(i, 0))?;
            let row_scale = obs.weights().map_or(1.0, |w| w[i].sqrt());
            nodes
                .iter()
                .enumerate()
                .map(|(q, n)| green(p, n, wc).map(|g| g * (src.weights()[q] * row_scale)).map_err(|e| e.at(i, q)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(obs.len(), src.len(), &flat))
}

/// `E_m = Σ_q w_q J_q G(r_m, r'_q)` (times the square root of any observation weight).
pub fn propagate(realization: &[Complex64], obs: &ObservationSet, src: &SourceModel, wc: &WaveContext) -> Result<Vec<Complex64>> {
    if realization.len() != src.len() {
        return Err(EitError::contract(format!(
            "realization has {} entries, source has {} nodes",
            realization.len(),
            src.len()
        )));
    }
    let p = propagation_matrix(obs, src, wc)?;
    let j = DMatrix::from_column_slice(src.len(), 1, realization);
    Ok((p * j).iter().copied().collect())
}

/// Fields of realizations `range` as columns.
fn field_block(cfg: &EnsembleConfig, p: &CMatrix, range: std::ops::Range<usize>) -> Result<CMatrix> {
    let q = cfg.src.len();
    let mut j = CMatrix::zeros(q, range.len());
    for (c, m) in range.enumerate() {
        let draw = draw_realization(cfg, m)?;
        j.column_mut(c).copy_from_slice(&draw);
    }
    Ok(p * j)
}

fn chunks(m: usize) -> Vec<std::ops::Range<usize>> {
    (0..m).step_by(CHUNK).map(|s| s..(s + CHUNK).min(m)).collect()
}

/// `(1/M) Σ_m E^(m) E^(m)ᴴ`, Hermitian by construction.
pub fn empirical_csd(cfg: &EnsembleConfig) -> Result<CMatrix> {
    let p = propagation_matrix(&cfg.obs, &cfg.src, &cfg.wc)?;
    let partials: Vec<CMatrix> = chunks(cfg.n_realizations)
        .into_par_iter()
        .map(|r| {
            let f = field_block(cfg, &p, r)?;
            Ok(&f * f.adjoint())
        })
        .collect::<Result<_>>()?;
    let n = cfg.obs.len();
    let mut w = partials.into_iter().fold(CMatrix::zeros(n, n), |acc, part| acc + part);
    w /= Complex64::new(cfg.n_realizations as f64, 0.0);
    for i in 0..n {
        w[(i, i)].im = 0.0;
        for k in (i + 1)..n {
            w[(k, i)] = w[(i, k)].conj();
        }
    }
    Ok(w)
}

fn check_modes(cfg: &EnsembleConfig, eig: &CSDEigensystem, n_modes: usize) -> Result<()> {
    if eig.eigenvectors.nrows() != cfg.obs.len() {
        return Err(EitError::contract(format!(
            "eigenvectors have {} rows, ensemble observes {} points",
            eig.eigenvectors.nrows(),
            cfg.obs.len()
        )));
    }
    if n_modes == 0 || n_modes > eig.eigenvectors.ncols() {
        return Err(EitError::contract(format!(
            "requested {n_modes} modes of {}",
            eig.eigenvectors.ncols()
        )));
    }
    Ok(())
}

pub fn kl_coefficients(cfg: &EnsembleConfig, eig: &CSDEigensystem, n_modes: usize) -> Result<KLCoefficients> {
    check_modes(cfg, eig, n_modes)?;
    let p = propagation_matrix(&cfg.obs, &cfg.src, &cfg.wc)?;
    let psi_h = eig.eigenvectors.columns(0, n_modes).adjoint();
    let blocks: Vec<CMatrix> = chunks(cfg.n_realizations)
        .into_par_iter()
        .map(|r| Ok((&psi_h * field_block(cfg, &p, r)?).transpose()))
        .collect::<Result<_>>()?;
    let mut a = CMatrix::zeros(cfg.n_realizations, n_modes);
    let mut row = 0;
    for b in blocks {
        a.rows_mut(row, b.nrows()).copy_from(&b);
        row += b.nrows();
    }
    Ok(KLCoefficients { a })
}

/// `C[n][m] = (1/M) Σ a_n a_m*`; diagonal close to `λ_n`, off-diagonal close to 0.
pub fn kl_coefficient_covariance(cfg: &EnsembleConfig, eig: &CSDEigensystem, n_modes: usize) -> Result<CMatrix> {
    check_modes(cfg, eig, n_modes)?;
    Ok(project_covariance(&empirical_csd(cfg)?, eig, n_modes))
}

/// `Ψᴴ W Ψ` over the leading `n_modes` eigenvectors, Hermitian by construction.
pub fn project_covariance(w: &CMatrix, eig: &CSDEigensystem, n_modes: usize) -> CMatrix {
    let psi = eig.eigenvectors.columns(0, n_modes).into_owned();
    let mut c = psi.adjoint() * w * &psi;
    for i in 0..n_modes {
        c[(i, i)].im = 0.0;
        for k in (i + 1)..n_modes {
            c[(k, i)] = c[(i, k)].conj();
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LineSource, Point};
    use crate::source::{build_quadrature, Intensity, QuadratureRule};
    use crate::spectral::{build_csd_matrix, eigen_decompose};

    fn wc() -> WaveContext {
        WaveContext::new(1.0).unwrap()
    }

    fn line_src(intensity: f64) -> SourceModel {
        let line = LineSource::new(1.0).unwrap();
        build_quadrature(line, Intensity::Uniform(intensity), 8.0, QuadratureRule::Gauss, &wc()).unwrap()
    }

    fn arc_points(n: usize) -> ObservationSet {
        ObservationSet::arc(30.0, n, 0.2, 2.9).unwrap().unweighted()
    }

    #[test]
    fn config_and_range_checks() {
        let src = line_src(1.0);
        assert!(EnsembleConfig::new(1, 0, src.clone(), arc_points(4), wc()).is_err());
        let cfg = EnsembleConfig::new(10, 0, src, arc_points(4), wc()).unwrap();
        assert!(matches!(draw_realization(&cfg, 10), Err(EitError::Range { index: 10, len: 10 })));
    }

    #[test]
    fn draws_are_reproducible_in_isolation() {
        let cfg = EnsembleConfig::new(100, 7, line_src(1.0), arc_points(4), wc()).unwrap();
        assert_eq!(draw_realization(&cfg, 42).unwrap(), draw_realization(&cfg, 42).unwrap());
        assert_ne!(draw_realization(&cfg, 42).unwrap(), draw_realization(&cfg, 43).unwrap());
        let other = EnsembleConfig { seed: 8, ..cfg.clone() };
        assert_ne!(draw_realization(&cfg, 42).unwrap(), draw_realization(&other, 42).unwrap());
    }

    #[test]
    fn node_moments() {
        let m = 10_000;
        let src = line_src(2.0);
        let cfg = EnsembleConfig::new(m, 11, src.clone(), arc_points(2), wc()).unwrap();
        let q_len = src.len();
        let (mut power, mut mean, mut pseudo) = (vec![0.0; q_len], vec![Complex64::new(0.0, 0.0); q_len], vec![Complex64::new(0.0, 0.0); q_len]);
        for i in 0..m {
            for (q, j) in draw_realization(&cfg, i).unwrap().into_iter().enumerate() {
                power[q] += j.norm_sqr() * src.weights()[q];
                mean[q] += j;
                pseudo[q] += j * j;
            }
        }
        let mf = m as f64;
        for q in 0..q_len {
            let var = src.node_intensity()[q] / src.weights()[q];
            // |J|² is exponential: relative std 1/√M
            assert!((power[q] / mf - 2.0).abs() <= 0.05 * 2.0, "node {q}: {}", power[q] / mf);
            assert!((mean[q] / mf).norm() <= 3.0 * (var / mf).sqrt());
            assert!((pseudo[q] / mf).norm() <= 3.0 * var / mf.sqrt());
        }
    }

    #[test]
    fn propagate_is_linear() {
        let src = line_src(1.0);
        let obs = arc_points(5);
        let zero = vec![Complex64::new(0.0, 0.0); src.len()];
        assert!(propagate(&zero, &obs, &src, &wc()).unwrap().iter().all(|e| e.norm() == 0.0));
        let cfg = EnsembleConfig::new(4, 3, src.clone(), obs.clone(), wc()).unwrap();
        let j = draw_realization(&cfg, 1).unwrap();
        let alpha = Complex64::new(0.3, -1.7);
        let scaled: Vec<_> = j.iter().map(|v| v * alpha).collect();
        let e1 = propagate(&j, &obs, &src, &wc()).unwrap();
        let e2 = propagate(&scaled, &obs, &src, &wc()).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a * alpha - b).norm() <= 1e-14 * b.norm().max(1e-300));
        }
        assert!(propagate(&j[1..], &obs, &src, &wc()).is_err());
        let on_source = ObservationSet::points(vec![Point::new(0.5, 0.0)]).unwrap();
        assert!(propagate(&j, &on_source, &src, &wc()).is_err());
    }

    #[test]
    fn single_node_variance() {
        let line = LineSource::new(1.0).unwrap();
        let src = SourceModel::single_node(line, 0.25, 0.1, 3.0).unwrap();
        let obs = arc_points(3);
        let m = 10_000;
        let cfg = EnsembleConfig::new(m, 5, src.clone(), obs.clone(), wc()).unwrap();
        let w = empirical_csd(&cfg).unwrap();
        let node = Point::new(0.25, 0.0);
        for (i, p) in obs.as_slice().iter().enumerate() {
            let expected = green(p, &node, &wc()).unwrap().norm_sqr() * 3.0 * 0.1;
            assert!((w[(i, i)].re - expected).abs() <= 0.05 * expected);
        }
    }

    #[test]
    fn empirical_csd_matches_analytic() {
        let src = line_src(1.0);
        let obs = arc_points(12);
        let analytic = build_csd_matrix(&obs, &src, &wc()).unwrap();
        let m = 10_000;
        let cfg = EnsembleConfig::new(m, 2024, src.clone(), obs.clone(), wc()).unwrap();
        let w = empirical_csd(&cfg).unwrap();
        let n = obs.len();
        for i in 0..n {
            assert_eq!(w[(i, i)].im, 0.0);
            for k in 0..n {
                assert_eq!(w[(i, k)], w[(k, i)].conj());
                let sigma = (analytic[(i, i)].re * analytic[(k, k)].re / m as f64).sqrt();
                assert!((w[(i, k)] - analytic[(i, k)]).norm() <= 5.0 * sigma, "({i},{k})");
            }
        }
    }

    #[test]
    fn error_shrinks_at_root_m_rate() {
        let src = line_src(1.0);
        let obs = arc_points(8);
        let analytic = build_csd_matrix(&obs, &src, &wc()).unwrap();
        // average over seeds to tame the spread of a single two-point slope
        let err = |m: usize| -> f64 {
            (0..8u64)
                .map(|seed| {
                    let cfg = EnsembleConfig::new(m, 100 + seed, src.clone(), obs.clone(), wc()).unwrap();
                    (empirical_csd(&cfg).unwrap() - &analytic).norm()
                })
                .sum::<f64>()
        };
        let ratio = err(2_000) / err(8_000);
        assert!((1.5..=2.7).contains(&ratio), "{ratio}");
    }

    #[test]
    fn kl_covariance_is_diagonal() {
        let src = line_src(1.0);
        let obs = arc_points(16);
        let eig = eigen_decompose(&build_csd_matrix(&obs, &src, &wc()).unwrap()).unwrap();
        let m = 10_000;
        let cfg = EnsembleConfig::new(m, 99, src.clone(), obs.clone(), wc()).unwrap();
        let n_modes = 5;
        let c = kl_coefficient_covariance(&cfg, &eig, n_modes).unwrap();
        let mf = m as f64;
        for n in 0..n_modes {
            let ln = eig.eigenvalues[n];
            assert!((c[(n, n)].re - ln).abs() <= 5.0 * ln / mf.sqrt(), "mode {n}");
            for k in 0..n_modes {
                if k != n {
                    let lk = eig.eigenvalues[k];
                    assert!(c[(n, k)].norm() <= 5.0 * (ln * lk / mf).sqrt());
                }
            }
        }
        // coefficient route gives the same covariance
        let a = kl_coefficients(&cfg, &eig, n_modes).unwrap().a;
        let direct = a.transpose() * a.map(|v| v.conj()) / Complex64::new(mf, 0.0);
        assert!((direct - &c).norm() <= 1e-10 * c.norm());
    }

    #[test]
    fn kl_rejects_mismatched_modes() {
        let src = line_src(1.0);
        let eig = eigen_decompose(&build_csd_matrix(&arc_points(6), &src, &wc()).unwrap()).unwrap();
        let cfg = EnsembleConfig::new(10, 1, src, arc_points(7), wc()).unwrap();
        assert!(matches!(kl_coefficient_covariance(&cfg, &eig, 2), Err(EitError::Contract(_))));
    }

    #[test]
    fn dark_source_gives_zero_covariance() {
        let src = line_src(1.0);
        let obs = arc_points(6);
        let eig = eigen_decompose(&build_csd_matrix(&obs, &src, &wc()).unwrap()).unwrap();
        let cfg = EnsembleConfig::new(50, 1, line_src(0.0), obs, wc()).unwrap();
        assert!(kl_coefficient_covariance(&cfg, &eig, 3).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let cfg = EnsembleConfig::new(1_000, 17, line_src(1.0), arc_points(10), wc()).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| empirical_csd(&cfg).unwrap())
        };
        let (a, b) = (run(1), run(8));
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
    }
}
