//! Discretized radiation and cross-spectral-density operators, their spectra,
//! and the comparison between the two.
//!
//! With `A[m][q] = G(r_m, r'_q) sqrt(I_q w_q)` (rows optionally scaled by the
//! square root of observation weights) the incoherent-source CSD matrix is
//! exactly `W = A Aᴴ`, so its eigenpairs are the left singular pairs of `A`
//! with `λ_n = σ_n²`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{EitError, Result};
use crate::geometry::{ObservationSet, WaveContext};
use crate::kernels::green;
use crate::source::SourceModel;

pub type CMatrix = DMatrix<Complex64>;

/// Relative threshold for the significant-eigenvalue count.
pub const DEFAULT_NDF_EPSILON: f64 = 1e-2;
/// Eigenvalues closer than this (relative to the larger) are treated as one cluster.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RadiationMatrix {
    entries: CMatrix,
    obs: ObservationSet,
    src: SourceModel,
}

impl RadiationMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn observation(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn source(&self) -> &SourceModel {
        &self.src
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Wrap an explicit matrix, bypassing assembly (matrix-level studies).
    pub fn from_entries(entries: CMatrix, obs: ObservationSet, src: SourceModel) -> Result<Self> {
        if entries.nrows() != obs.len() || entries.ncols() != src.len() {
            return Err(EitError::contract(format!(
                "matrix is {}x{} but observation/source sizes are {}x{}",
                entries.nrows(),
                entries.ncols(),
                obs.len(),
                src.len()
            )));
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(EitError::Numerical("non-finite matrix entry".into()));
        }
        Ok(RadiationMatrix { entries, obs, src })
    }
}

/// Left/right singular system of a radiation matrix, `σ` descending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub singular_values: Vec<f64>,
    /// Columns `u_n` over observation points.
    pub left_vectors: CMatrix,
    /// Columns `v_n` over source nodes.
    pub right_vectors: CMatrix,
}

/// Eigenpairs of a Hermitian CSD matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct CSDEigensystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

pub fn build_radiation_matrix(obs: &ObservationSet, src: &SourceModel, wc: &WaveContext) -> Result<RadiationMatrix> {
    let m = obs.len();
    let q = src.len();
    let col_scale: Vec<f64> = (0..q).map(|j| src.column_weight(j).sqrt()).collect();
    let nodes: Vec<_> = src.node_points().collect();
    for (i, p) in obs.as_slice().iter().enumerate() {
        src.check_off_support(p).map_err(|e| e.at(i, 0))?;
    }

    let rows: Vec<Vec<Complex64>> = obs
        .as_slice()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let row_scale = obs.weights().map_or(1.0, |w| w[i].sqrt());
            nodes
                .iter()
                .enumerate()
                .map(|(j, node)| {
                    green(p, node, wc)
                        .map(|g| g * (col_scale[j] * row_scale))
                        .map_err(|e| e.at(i, j))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    RadiationMatrix::from_entries(DMatrix::from_row_slice(m, q, &flat), obs.clone(), src.clone())
}

/// Hermitian eigendecomposition, eigenvalues sorted descending.
///
/// Each eigenvector is rotated so its largest-magnitude component is real
/// and positive, which makes the output independent of solver phase choices.
pub fn hermitian_eigen(matrix: CMatrix) -> (Vec<f64>, CMatrix) {
    let n = matrix.nrows();
    let eig = nalgebra::SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
        vectors.set_column(dst, &(col * phase));
    }
    (values, vectors)
}

/// Thin singular value decomposition, `σ` descending.
///
/// Uses a Golub–Kahan bidiagonalization on the `M×Q` matrix, which costs
/// `O(M Q min(M, Q))` like the Gram-matrix route but keeps `U` and `V`
/// orthonormal and `UΣVᴴ = A` to working precision for every mode, including
/// singular values below `sqrt(ε) σ_1`.
pub fn singular_decompose(a: &RadiationMatrix) -> Result<SpectralDecomposition> {
    let mat = a.entries();
    if mat.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(EitError::Numerical("radiation matrix has non-finite entries".into()));
    }
    let (m, q) = mat.shape();
    let svd = mat
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| EitError::Numerical(format!("SVD of {m}x{q} radiation matrix did not converge")))?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(EitError::Numerical("SVD returned no singular vectors".into())),
    };
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));

    let mut left = CMatrix::zeros(m, k);
    let mut right = CMatrix::zeros(q, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        singular_values.push(svd.singular_values[src]);
        // fix the free phase on the right vector, carry it to the left one
        let v = v_t.row(src).adjoint();
        let pivot = v.iter().copied().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap_or_default();
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
        right.set_column(dst, &(v * phase));
        left.set_column(dst, &(u.column(src) * phase));
    }
    Ok(SpectralDecomposition {
        singular_values,
        left_vectors: left,
        right_vectors: right,
    })
}

/// `W = A Aᴴ`, the CSD sampled at the observation points (row weights included).
pub fn build_csd_matrix(obs: &ObservationSet, src: &SourceModel, wc: &WaveContext) -> Result<CMatrix> {
    let a = build_radiation_matrix(obs, src, wc)?;
    Ok(csd_from_radiation(&a))
}

pub fn csd_from_radiation(a: &RadiationMatrix) -> CMatrix {
    let mat = a.entries();
    let mut w = mat * mat.adjoint();
    // exact Hermitian symmetry and a real diagonal
    let n = w.nrows();
    for i in 0..n {
        w[(i, i)] = Complex64::new(w[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            w[(j, i)] = w[(i, j)].conj();
        }
    }
    w
}

pub fn eigen_decompose(w: &CMatrix) -> Result<CSDEigensystem> {
    if !w.is_square() {
        return Err(EitError::contract("CSD matrix must be square"));
    }
    let scale = w.norm();
    let mut asym = 0.0f64;
    for i in 0..w.nrows() {
        for j in i..w.ncols() {
            asym = asym.max((w[(i, j)] - w[(j, i)].conj()).norm());
        }
    }
    if asym > 1e-12 * scale {
        return Err(EitError::contract(format!(
            "matrix is not Hermitian (asymmetry {asym:e}, norm {scale:e})"
        )));
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(w.clone());
    Ok(CSDEigensystem { eigenvalues, eigenvectors })
}

/// Number of values at or above `epsilon` times the largest one.
pub fn ndf_from_spectrum(values: &[f64], epsilon: f64) -> Result<usize> {
    if values.is_empty() {
        return Err(EitError::domain("empty spectrum"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(EitError::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let top = values[0].max(0.0);
    Ok(values.iter().filter(|&&v| v.max(0.0) >= epsilon * top).count())
}

/// Per-mode comparison of `σ_n²` with `λ_n` and of `u_n` with `ψ_n`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ModeComparison {
    pub n: usize,
    pub sigma: f64,
    pub lambda: f64,
    /// `|λ_n − σ_n²| / σ_1²`.
    pub gap: f64,
    /// `|⟨u_n, ψ_n⟩|`, or the cosine of the largest principal angle for
    /// modes inside a degenerate cluster.
    pub alignment: f64,
    /// Largest principal angle between the cluster subspaces (0 for single modes).
    pub principal_angle: f64,
    /// Index range `[start, end)` of the cluster this mode belongs to.
    pub cluster: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub modes: Vec<ModeComparison>,
}

impl EquivalenceReport {
    pub fn max_gap(&self) -> f64 {
        self.modes.iter().map(|m| m.gap).fold(0.0, f64::max)
    }

    pub fn min_alignment(&self) -> f64 {
        self.modes.iter().map(|m| m.alignment).fold(1.0, f64::min)
    }

    pub fn max_principal_angle(&self) -> f64 {
        self.modes.iter().map(|m| m.principal_angle).fold(0.0, f64::max)
    }
}

pub fn equivalence_report(dec: &SpectralDecomposition, eig: &CSDEigensystem, n_modes: usize) -> Result<EquivalenceReport> {
    let m = eig.eigenvectors.nrows();
    if dec.left_vectors.nrows() != m {
        return Err(EitError::contract(format!(
            "left vectors have {} rows, eigenvectors {}",
            dec.left_vectors.nrows(),
            m
        )));
    }
    let available = dec.singular_values.len().min(eig.eigenvalues.len());
    if n_modes > available {
        return Err(EitError::contract(format!("{n_modes} modes requested, {available} available")));
    }
    let s1sq = dec.singular_values.first().map_or(0.0, |s| s * s);
    let norm = if s1sq > 0.0 { s1sq } else { 1.0 };

    let clusters = degenerate_clusters(&eig.eigenvalues[..available], n_modes);
    let mut modes = Vec::with_capacity(n_modes);
    for &(start, end) in &clusters {
        let (alignment_single, angle) = if end - start == 1 {
            let inner = dec.left_vectors.column(start).dotc(&eig.eigenvectors.column(start));
            (inner.norm().min(1.0), 0.0)
        } else {
            let angle = max_principal_angle(
                &dec.left_vectors.columns(start, end - start).into_owned(),
                &eig.eigenvectors.columns(start, end - start).into_owned(),
            );
            (angle.cos(), angle)
        };
        for n in start..end.min(n_modes) {
            let sigma = dec.singular_values[n];
            let lambda = eig.eigenvalues[n];
            modes.push(ModeComparison {
                n: n + 1,
                sigma,
                lambda,
                gap: (lambda - sigma * sigma).abs() / norm,
                alignment: alignment_single,
                principal_angle: angle,
                cluster: (start, end),
            });
        }
    }
    Ok(EquivalenceReport { modes })
}

/// Group descending eigenvalues into clusters of near-equal values, covering
/// at least the first `n_modes`; a cluster straddling `n_modes` is kept whole.
fn degenerate_clusters(values: &[f64], n_modes: usize) -> Vec<(usize, usize)> {
    let mut clusters = Vec::new();
    let mut start = 0;
    while start < n_modes {
        let mut end = start + 1;
        while end < values.len() {
            let (a, b) = (values[end - 1], values[end]);
            let scale = a.abs().max(b.abs());
            if scale > 0.0 && (a - b).abs() <= DEGENERACY_TOLERANCE * scale {
                end += 1;
            } else {
                break;
            }
        }
        clusters.push((start, end));
        start = end;
    }
    clusters
}

/// Largest principal angle between the column spans of two orthonormal bases.
pub fn max_principal_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap = a.adjoint() * b;
    let sv = overlap.singular_values();
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    smallest.acos()
}
