//! Execution of one scenario task and the artifacts it leaves behind.
//!
//! Lengths in files are in wavelengths, wavenumbers in radians per
//! wavelength; the manifest lists the unit of every column.

use serde_json::{json, Map, Value};

use crate::coherence::{coherence_map, nats_to_bits, CoherenceMap};
use crate::config::{NdfEstimator, Scenario, Task, TaskParams};
use crate::error::{EitError, Result};
use crate::geometry::{q_xi_set, xi_of_point, Hyperbola, Point};
use crate::ndf::{
    ndf_phase_space, ndf_radiometric, ndf_sphere, projected_solid_angle, PhaseSpaceDescriptor,
};
use crate::output::{col, fmt_f64, fmt_opt, ArtifactWriter};
use crate::spectral::{
    build_csd_matrix, build_radiation_matrix, csd_from_radiation, eigen_decompose, equivalence_report,
    ndf_from_spectrum, singular_decompose,
};
use crate::stochastic::{empirical_csd, project_covariance, EnsembleConfig, RNG_ALGORITHM};
use crate::wigner::{spectral_centroid, wdf_along_curve, wdf_marginals, WignerParams};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Report mutual information in bits instead of nats.
    pub log_bits: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest_sha256: String,
    pub files: Vec<String>,
    /// Text the task prints on standard output, if any.
    pub stdout: Option<String>,
    pub summary: Value,
}

struct Ctx<'a> {
    s: &'a Scenario,
    lambda: f64,
    out: ArtifactWriter,
    summary: Map<String, Value>,
    extra: Map<String, Value>,
    stdout: Option<String>,
}

/// Run the scenario's task, writing into `s.output_dir`.
pub fn run_scenario(s: &Scenario, opts: RunOptions) -> Result<RunReport> {
    let out = ArtifactWriter::create(&s.output_dir)?;
    let mut ctx = Ctx {
        s,
        lambda: s.wave.wavelength(),
        out,
        summary: Map::new(),
        extra: Map::new(),
        stdout: None,
    };
    match s.task {
        Task::Svd => run_svd(&mut ctx)?,
        Task::Equivalence => run_equivalence(&mut ctx)?,
        Task::CsdMap | Task::MiMap => run_map(&mut ctx, opts)?,
        Task::Wigner => run_wigner(&mut ctx)?,
        Task::Ndf => run_ndf(&mut ctx)?,
        Task::Hyperbolas => run_hyperbolas(&mut ctx)?,
        Task::MonteCarlo => run_monte_carlo(&mut ctx)?,
    }

    let summary = Value::Object(ctx.summary);
    let mut manifest = Map::new();
    manifest.insert("tool".into(), json!("eit"));
    manifest.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    manifest.insert("task".into(), json!(s.task.name()));
    manifest.insert("settings".into(), serde_json::to_value(&s.settings)?);
    manifest.insert(
        "conventions".into(),
        json!({
            "time_dependence": "exp(+j omega t)",
            "green_function": "exp(-j beta R) / (4 pi R)",
            "csd_prefactor": "1/(16 pi^2), carried by the product of two Green's functions",
            "length_unit": "wavelength",
            "wavenumber_unit": "rad per wavelength",
            "information_unit": if opts.log_bits { "bit" } else { "nat" },
        }),
    );
    for (k, v) in ctx.extra {
        manifest.insert(k, v);
    }
    manifest.insert("summary".into(), summary.clone());
    let files = ctx.out.files().iter().map(|f| f.name.clone()).collect();
    let manifest_sha256 = ctx.out.finish(manifest)?;
    Ok(RunReport {
        manifest_sha256,
        files,
        stdout: ctx.stdout,
        summary,
    })
}

fn spectrum_params(s: &Scenario) -> (usize, f64, bool) {
    match s.params {
        TaskParams::Spectrum { modes, epsilon, dump_matrix } => (modes, epsilon, dump_matrix),
        _ => (20, 1e-2, false),
    }
}

fn phase_space_reference(ctx: &Ctx) -> Option<f64> {
    ctx.s
        .line
        .map(|l| ndf_phase_space(&PhaseSpaceDescriptor::line_half_plane(&l, &ctx.s.wave)))
}

fn run_svd(ctx: &mut Ctx) -> Result<()> {
    let (_, epsilon, dump) = spectrum_params(ctx.s);
    let a = build_radiation_matrix(&ctx.s.observation_set()?, ctx.s.source()?, &ctx.s.wave)?;
    let dec = singular_decompose(&a)?;
    let sv = &dec.singular_values;
    let top = sv[0];
    ctx.out.csv(
        "singular_values.csv",
        &[col("n", "index from 1"), col("sigma_n", "field per sqrt(source power)"), col("sigma_rel", "sigma_n / sigma_1")],
        sv.iter()
            .enumerate()
            .map(|(i, &v)| vec![(i + 1).to_string(), fmt_f64(v), fmt_f64(if top > 0.0 { v / top } else { 0.0 })]),
    )?;
    if dump {
        ctx.out.complex_matrix("radiation_matrix", a.entries())?;
    }
    let squares: Vec<f64> = sv.iter().map(|v| v * v).collect();
    ctx.summary.insert("rows".into(), json!(a.rows()));
    ctx.summary.insert("cols".into(), json!(a.cols()));
    ctx.summary.insert("epsilon".into(), json!(epsilon));
    ctx.summary.insert("ndf".into(), json!(ndf_from_spectrum(&squares, epsilon)?));
    ctx.summary.insert("ndf_phase_space".into(), json!(phase_space_reference(ctx)));
    Ok(())
}

fn run_equivalence(ctx: &mut Ctx) -> Result<()> {
    let (modes, epsilon, dump) = spectrum_params(ctx.s);
    let a = build_radiation_matrix(&ctx.s.observation_set()?, ctx.s.source()?, &ctx.s.wave)?;
    let dec = singular_decompose(&a)?;
    let w = csd_from_radiation(&a);
    let eig = eigen_decompose(&w)?;
    let n = modes.min(dec.singular_values.len());
    let report = equivalence_report(&dec, &eig, n)?;
    ctx.out.csv(
        "spectra.csv",
        &[
            col("n", "index from 1"),
            col("sigma_n", "field per sqrt(source power)"),
            col("lambda_n", "CSD eigenvalue"),
            col("gap", "|lambda_n - sigma_n^2| / sigma_1^2"),
            col("alignment", "|<u_n, psi_n>|"),
        ],
        report.modes.iter().map(|m| {
            vec![
                (m.n + 1).to_string(),
                fmt_f64(m.sigma),
                fmt_f64(m.lambda),
                fmt_f64(m.gap),
                fmt_f64(m.alignment),
            ]
        }),
    )?;
    if dump {
        ctx.out.complex_matrix("radiation_matrix", a.entries())?;
        ctx.out.complex_matrix("csd_matrix", &w)?;
    }
    let squares: Vec<f64> = dec.singular_values.iter().map(|v| v * v).collect();
    ctx.summary.insert("modes".into(), json!(n));
    ctx.summary.insert("max_gap".into(), json!(report.max_gap()));
    ctx.summary.insert("min_alignment".into(), json!(report.min_alignment()));
    ctx.summary.insert("max_principal_angle".into(), json!(report.max_principal_angle()));
    ctx.summary.insert("epsilon".into(), json!(epsilon));
    ctx.summary.insert("ndf_eigen".into(), json!(ndf_from_spectrum(&eig.eigenvalues, epsilon)?));
    ctx.summary.insert("ndf_svd".into(), json!(ndf_from_spectrum(&squares, epsilon)?));
    ctx.summary.insert("ndf_phase_space".into(), json!(phase_space_reference(ctx)));
    Ok(())
}

fn run_map(ctx: &mut Ctx, opts: RunOptions) -> Result<()> {
    let TaskParams::Map { reference, exclusion } = ctx.s.params else {
        return Err(EitError::contract("map task without map parameters"));
    };
    let grid = ctx.s.observation_set()?;
    let src = ctx.s.source()?;
    let map = coherence_map(&reference, &grid, src, &ctx.s.wave, exclusion)?;
    let l = ctx.lambda;
    if ctx.s.task == Task::CsdMap {
        ctx.out.csv(
            "csd_map.csv",
            &[
                col("y", "wavelength"),
                col("z", "wavelength"),
                col("w12_re", "CSD, source intensity units"),
                col("w12_im", "CSD, source intensity units"),
                col("abs_mu", "1"),
                col("mask", "0 valid, 1 near reference, 2 near source, 3 saturated, 4 undefined"),
            ],
            map.cells.iter().map(|c| {
                let w = c.sample.map(|s| s.w12);
                vec![
                    fmt_f64(c.point.y / l),
                    fmt_f64(c.point.z / l),
                    fmt_opt(w.map(|w| w.re)),
                    fmt_opt(w.map(|w| w.im)),
                    fmt_opt(c.abs_mu()),
                    (c.mask as u8).to_string(),
                ]
            }),
        )?;
    } else {
        let (name, unit): (&'static str, &'static str) =
            if opts.log_bits { ("mi_bits", "bit") } else { ("mi_nats", "nat") };
        ctx.out.csv(
            "mi_map.csv",
            &[
                col("y", "wavelength"),
                col("z", "wavelength"),
                col("abs_mu", "1"),
                col(name, unit),
                col("mask", "0 valid, 1 near reference, 2 near source, 3 saturated, 4 undefined"),
            ],
            map.cells.iter().map(|c| {
                let mi = c.mi_nats().map(|v| if opts.log_bits { nats_to_bits(v) } else { v });
                vec![
                    fmt_f64(c.point.y / l),
                    fmt_f64(c.point.z / l),
                    fmt_opt(c.abs_mu()),
                    fmt_opt(mi),
                    (c.mask as u8).to_string(),
                ]
            }),
        )?;
    }
    map_summary(ctx, &map, grid.grid_shape())
}

fn map_summary(ctx: &mut Ctx, map: &CoherenceMap, shape: Option<(usize, usize)>) -> Result<()> {
    let line = ctx.s.line.ok_or_else(|| EitError::contract("map task without source geometry"))?;
    let r = map.reference;
    ctx.summary.insert("reference".into(), json!({"y": r.y / ctx.lambda, "z": r.z / ctx.lambda}));
    ctx.summary.insert("xi_reference".into(), json!(xi_of_point(&r, &line)? / ctx.lambda));
    ctx.summary.insert("grid_shape".into(), json!(shape));
    ctx.summary.insert("masked_cells".into(), json!(map.masked_count()));
    if let Some(i) = map.argmax_abs_mu() {
        let c = &map.cells[i];
        ctx.summary.insert(
            "argmax_abs_mu".into(),
            json!({
                "index": i,
                "y": c.point.y / ctx.lambda,
                "z": c.point.z / ctx.lambda,
                "abs_mu": c.abs_mu(),
                "xi": xi_of_point(&c.point, &line)? / ctx.lambda,
            }),
        );
    }
    Ok(())
}

fn run_wigner(ctx: &mut Ctx) -> Result<()> {
    let TaskParams::Wigner { window, n_k, k_max, stride } = ctx.s.params else {
        return Err(EitError::contract("wigner task without Wigner parameters"));
    };
    let curve = ctx.s.observation_set()?;
    let src = ctx.s.source()?;
    let line = *src.geometry();
    let params = WignerParams { window_half_width: window, n_k, k_max, stride };
    let map = wdf_along_curve(&curve, src, &ctx.s.wave, &params)?;
    let l = ctx.lambda;
    let n_k = map.n_k();
    let rows = (0..map.n_s()).flat_map(|i| {
        let s = fmt_f64(map.s_values[i] / l);
        let map = &map;
        (0..n_k).map(move |k| vec![s.clone(), fmt_f64(map.k_values[k] * l), fmt_f64(map.values[i * n_k + k])])
    });
    ctx.out.csv(
        "wdf.csv",
        &[col("s", "wavelength"), col("k_s", "rad per wavelength"), col("wdf", "CSD x length")],
        rows,
    )?;

    let marg = wdf_marginals(&map);
    let arclength = curve.arclength().unwrap_or(&[]);
    let fraunhofer = 2.0 * line.length() * line.length() / l;
    let mut columns = Vec::with_capacity(map.n_s());
    let mut far = Vec::new();
    for i in 0..map.n_s() {
        let s = map.s_values[i];
        let idx = arclength.iter().position(|&x| x == s).unwrap_or(0);
        let p = curve.as_slice()[idx];
        let c = spectral_centroid(&map, s).ok();
        if let (Some(c), false) = (c, map.truncated[i]) {
            if p.z > fraunhofer {
                far.push(c.k);
            }
        }
        columns.push(vec![
            fmt_f64(s / l),
            fmt_f64(p.y / l),
            fmt_f64(p.z / l),
            fmt_opt(c.map(|c| c.k * l)),
            fmt_opt(c.map(|c| c.spread * l)),
            fmt_opt(c.map(|c| c.negative_fraction)),
            fmt_f64(marg.intensity[i]),
            u8::from(map.truncated[i]).to_string(),
        ]);
    }
    ctx.out.csv(
        "wdf_columns.csv",
        &[
            col("s", "wavelength"),
            col("y", "wavelength"),
            col("z", "wavelength"),
            col("centroid_k", "rad per wavelength"),
            col("spread_k", "rad per wavelength"),
            col("negative_fraction", "1"),
            col("intensity", "CSD"),
            col("truncated", "1 if the lag window was cut"),
        ],
        columns,
    )?;
    let beta = ctx.s.wave.wavenumber();
    ctx.summary.insert("xi".into(), json!(xi_of_point(&curve.as_slice()[curve.len() - 1], &line)? / l));
    ctx.summary.insert("columns".into(), json!(map.n_s()));
    ctx.summary.insert("fraunhofer_distance".into(), json!(fraunhofer / l));
    ctx.summary.insert(
        "far_zone_mean_centroid_over_beta".into(),
        json!(if far.is_empty() { None } else { Some(far.iter().sum::<f64>() / far.len() as f64 / beta) }),
    );
    ctx.summary
        .insert("max_imag_over_column_max".into(), json!(max_imag_ratio(&map)));
    ctx.extra.insert(
        "wigner".into(),
        json!({
            "window_half_width": window / l,
            "taper": "hann",
            "n_k": n_k,
            "k_max": k_max * l,
            "stride": stride,
            "kernel": "exp(+j k ds): k is the tangential wavevector component",
        }),
    );
    Ok(())
}

fn max_imag_ratio(map: &crate::wigner::WignerMap) -> f64 {
    (0..map.n_s())
        .map(|i| {
            let m = map.column(i).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                map.imag_max[i] / m
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

fn run_ndf(ctx: &mut Ctx) -> Result<()> {
    let TaskParams::Ndf(ref est) = ctx.s.params else {
        return Err(EitError::contract("ndf task without estimator"));
    };
    let l = ctx.lambda;
    let wc = &ctx.s.wave;
    let value = match est {
        NdfEstimator::PhaseSpace { full_plane } => {
            let line = ctx.s.line.ok_or_else(|| EitError::contract("phase-space estimate needs a source"))?;
            let d = if *full_plane {
                PhaseSpaceDescriptor::line_full_plane(&line, wc)
            } else {
                PhaseSpaceDescriptor::line_half_plane(&line, wc)
            };
            json!({
                "estimator": "phase-space",
                "inputs": {"source_length": line.length() / l, "plane": if *full_plane { "full" } else { "half" },
                           "n_dims": d.n_dims, "volume": d.volume},
                "value": ndf_phase_space(&d),
            })
        }
        NdfEstimator::Sphere { area } => json!({
            "estimator": "sphere",
            "inputs": {"source_area": area / (l * l)},
            "value": ndf_sphere(*area, wc)?,
        }),
        NdfEstimator::Radiometric { area, omega_prime } => {
            let e = ndf_radiometric(*area, *omega_prime, wc)?;
            json!({
                "estimator": "radiometric",
                "inputs": {"source_area": area / (l * l), "projected_solid_angle": omega_prime},
                "value": e.n_cells,
                "etendue": e.etendue / (l * l),
                "cell": e.cell / (l * l),
                "occlusion_caveat": e.occlusion_caveat,
            })
        }
        NdfEstimator::ProjectedSolidAngle { theta_max } => json!({
            "estimator": "projected-solid-angle",
            "inputs": {"theta_max_deg": theta_max.to_degrees()},
            "value": projected_solid_angle(*theta_max)?,
        }),
    };
    ctx.out.json("ndf.json", &value)?;
    ctx.stdout = Some(serde_json::to_string(&value)?);
    if let Value::Object(m) = value {
        ctx.summary = m;
    }
    Ok(())
}

fn run_hyperbolas(ctx: &mut Ctx) -> Result<()> {
    let TaskParams::Hyperbolas { s_max, ds } = ctx.s.params else {
        return Err(EitError::contract("hyperbolas task without trace parameters"));
    };
    let line = ctx.s.line.ok_or_else(|| EitError::contract("hyperbolas need a source"))?;
    let l = ctx.lambda;
    let a = line.half_length();
    let mut rows = Vec::new();
    let mut degenerate = 0usize;
    let xis = q_xi_set(&line, &ctx.s.wave);
    for (c, &xi) in xis.iter().enumerate() {
        let pts: Vec<(f64, Point)> = match Hyperbola::new(xi, line) {
            Ok(h) => {
                let curve = h.trace(s_max, ds)?;
                curve.arclength().unwrap_or(&[]).iter().copied().zip(curve.as_slice().iter().copied()).collect()
            }
            Err(EitError::DegenerateBranch { .. }) => {
                // |xi| = 2a: the branch collapses onto the axis beyond an endpoint
                degenerate += 1;
                let n = (s_max / ds * (1.0 + 1e-12)).floor() as usize;
                (0..=n)
                    .map(|i| {
                        let s = i as f64 * ds;
                        (s, Point::new(xi.signum() * (a + s), 0.0))
                    })
                    .collect()
            }
            Err(e) => return Err(e),
        };
        for (s, p) in pts {
            rows.push(vec![c.to_string(), fmt_f64(xi / l), fmt_f64(s / l), fmt_f64(p.y / l), fmt_f64(p.z / l)]);
        }
    }
    ctx.out.csv(
        "hyperbolas.csv",
        &[
            col("curve", "index"),
            col("xi", "wavelength"),
            col("s", "wavelength"),
            col("y", "wavelength"),
            col("z", "wavelength"),
        ],
        rows,
    )?;
    ctx.summary.insert("curves".into(), json!(xis.len()));
    ctx.summary.insert("degenerate".into(), json!(degenerate));
    ctx.summary.insert("asymptote_angles_deg".into(), json!(xis.iter().map(|x| (x / line.length()).clamp(-1.0, 1.0).acos().to_degrees()).collect::<Vec<_>>()));
    Ok(())
}

fn run_monte_carlo(ctx: &mut Ctx) -> Result<()> {
    let TaskParams::MonteCarlo { realizations, seed, modes, epsilon } = ctx.s.params else {
        return Err(EitError::contract("monte-carlo task without ensemble parameters"));
    };
    let obs = ctx.s.observation_set()?;
    let src = ctx.s.source()?.clone();
    let analytic = eigen_decompose(&build_csd_matrix(&obs, &src, &ctx.s.wave)?)?;
    let cfg = EnsembleConfig::new(realizations, seed, src, obs, ctx.s.wave)?;
    let w = empirical_csd(&cfg)?;
    let empirical = eigen_decompose(&w)?;
    let n_modes = modes.min(analytic.eigenvalues.len());
    let cov = project_covariance(&w, &analytic, n_modes);

    let n_rows = (2 * n_modes).max(n_modes + 10).min(analytic.eigenvalues.len());
    ctx.out.csv(
        "mc_spectrum.csv",
        &[col("n", "index from 1"), col("lambda_empirical", "CSD eigenvalue"), col("lambda_analytic", "CSD eigenvalue")],
        (0..n_rows).map(|i| {
            vec![(i + 1).to_string(), fmt_f64(empirical.eigenvalues[i]), fmt_f64(analytic.eigenvalues[i])]
        }),
    )?;
    let mut cov_rows = Vec::with_capacity(n_modes * n_modes);
    let mf = realizations as f64;
    let (mut diag, mut off) = (0.0f64, 0.0f64);
    for i in 0..n_modes {
        for k in 0..n_modes {
            let c = cov[(i, k)];
            cov_rows.push(vec![(i + 1).to_string(), (k + 1).to_string(), fmt_f64(c.re), fmt_f64(c.im)]);
            let (li, lk) = (analytic.eigenvalues[i], analytic.eigenvalues[k]);
            if i == k {
                diag = diag.max((c.re - li).abs() / (li / mf.sqrt()));
            } else {
                off = off.max(c.norm() / (li * lk / mf).sqrt());
            }
        }
    }
    ctx.out.csv(
        "kl_covariance.csv",
        &[col("n", "index from 1"), col("m", "index from 1"), col("c_re", "CSD eigenvalue"), col("c_im", "CSD eigenvalue")],
        cov_rows,
    )?;
    ctx.summary.insert("modes".into(), json!(n_modes));
    ctx.summary.insert("max_diagonal_error_sigmas".into(), json!(diag));
    ctx.summary.insert("max_off_diagonal_sigmas".into(), json!(off));
    ctx.summary.insert("ndf_empirical".into(), json!(ndf_from_spectrum(&empirical.eigenvalues, epsilon)?));
    ctx.summary.insert("ndf_analytic".into(), json!(ndf_from_spectrum(&analytic.eigenvalues, epsilon)?));
    ctx.extra.insert(
        "rng".into(),
        json!({"algorithm": RNG_ALGORITHM, "seed": seed, "realizations": realizations}),
    );
    Ok(())
}
