//! Scenario files: `key = value` lines grouped under `[section]` headers.
//!
//! A key `k` under `[s]` is the same as the dotted key `s.k` at top level.
//! Lengths are written in wavelengths and scaled by `wave.lambda` once here.
//! `#` and `;` start comments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{EitError, Result};
use crate::geometry::{LineSource, ObservationSet, Point, WaveContext};
use crate::source::{build_quadrature, Intensity, QuadratureRule, SourceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Svd,
    CsdMap,
    MiMap,
    Wigner,
    Ndf,
    Hyperbolas,
    MonteCarlo,
    Equivalence,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Svd,
        Task::CsdMap,
        Task::MiMap,
        Task::Wigner,
        Task::Ndf,
        Task::Hyperbolas,
        Task::MonteCarlo,
        Task::Equivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Svd => "svd",
            Task::CsdMap => "csd-map",
            Task::MiMap => "mi-map",
            Task::Wigner => "wigner",
            Task::Ndf => "ndf",
            Task::Hyperbolas => "hyperbolas",
            Task::MonteCarlo => "monte-carlo",
            Task::Equivalence => "equivalence",
        }
    }

    pub fn from_name(name: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Text,
    Number,
    NonNegative,
    Length,
    Count,
    Seed,
    Flag,
    List,
}

const KEYS: &[(&str, Kind)] = &[
    ("task", Kind::Text),
    ("wave.lambda", Kind::Length),
    ("source.length", Kind::Length),
    ("source.intensity", Kind::NonNegative),
    ("source.profile", Kind::List),
    ("source.nodes_per_wavelength", Kind::Number),
    ("source.rule", Kind::Text),
    ("observation.kind", Kind::Text),
    ("observation.radius", Kind::Length),
    ("observation.n", Kind::Count),
    ("observation.theta_start", Kind::Number),
    ("observation.theta_end", Kind::Number),
    ("observation.y_min", Kind::Number),
    ("observation.y_max", Kind::Number),
    ("observation.ny", Kind::Count),
    ("observation.z_min", Kind::Length),
    ("observation.z_max", Kind::Length),
    ("observation.nz", Kind::Count),
    ("observation.through_y", Kind::Number),
    ("observation.through_z", Kind::Length),
    ("observation.s_max", Kind::Length),
    ("observation.ds", Kind::Length),
    ("spectrum.modes", Kind::Count),
    ("spectrum.epsilon", Kind::Number),
    ("spectrum.dump_matrix", Kind::Flag),
    ("coherence.reference_y", Kind::Number),
    ("coherence.reference_z", Kind::Length),
    ("coherence.exclusion", Kind::Length),
    ("wigner.window", Kind::Length),
    ("wigner.n_k", Kind::Count),
    ("wigner.k_max", Kind::Number),
    ("wigner.stride", Kind::Count),
    ("ndf.estimator", Kind::Text),
    ("ndf.plane", Kind::Text),
    ("ndf.area", Kind::Length),
    ("ndf.omega_prime", Kind::NonNegative),
    ("ndf.theta_max", Kind::NonNegative),
    ("hyperbolas.s_max", Kind::Length),
    ("hyperbolas.ds", Kind::Length),
    ("monte_carlo.realizations", Kind::Count),
    ("monte_carlo.seed", Kind::Seed),
    ("monte_carlo.modes", Kind::Count),
    ("output.dir", Kind::Text),
];

#[derive(Debug, Clone, Serialize)]
pub struct Parameter {
    pub value: String,
    pub origin: &'static str,
}

struct Raw {
    value: String,
    line: usize,
}

/// Typed access to the raw key table; records every effective value.
struct Reader {
    raw: BTreeMap<String, Raw>,
    used: BTreeMap<String, Parameter>,
}

fn config_err(line: Option<usize>, key: &str, message: impl Into<String>) -> EitError {
    EitError::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

impl Reader {
    fn parse(text: &str) -> Result<Self> {
        let mut raw = BTreeMap::new();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(Some(n), line, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(config_err(Some(n), line, "empty section name"));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(Some(n), line, "expected `key = value`"))?;
            let k = k.trim();
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if !KEYS.iter().any(|(name, _)| *name == key) {
                return Err(config_err(Some(n), &key, "unknown key"));
            }
            if raw.contains_key(&key) {
                return Err(config_err(Some(n), &key, "duplicate key"));
            }
            raw.insert(key, Raw { value: v.trim().to_string(), line: n });
        }
        Ok(Reader { raw, used: BTreeMap::new() })
    }

    fn kind(key: &str) -> Kind {
        KEYS.iter().find(|(k, _)| *k == key).map(|(_, k)| *k).unwrap_or(Kind::Text)
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.raw.get(key).map(|r| r.line)
    }

    fn given(&self, key: &str) -> bool {
        self.raw.contains_key(key)
    }

    fn text(&mut self, key: &str, default: Option<&str>) -> Result<String> {
        let (value, origin) = match (self.raw.get(key), default) {
            (Some(r), _) => (r.value.clone(), "config"),
            (None, Some(d)) => (d.to_string(), "default"),
            (None, None) => return Err(config_err(None, key, "missing required key")),
        };
        self.used.insert(key.to_string(), Parameter { value: value.clone(), origin });
        Ok(value)
    }

    fn number(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        let d = default.map(|v| v.to_string());
        let text = self.text(key, d.as_deref())?;
        let line = self.line(key);
        let v: f64 = text
            .parse()
            .map_err(|_| config_err(line, key, format!("`{text}` is not a number")))?;
        if !v.is_finite() {
            return Err(config_err(line, key, "value must be finite"));
        }
        match Self::kind(key) {
            Kind::Length | Kind::Count if v <= 0.0 => Err(config_err(line, key, format!("must be positive, got {v}"))),
            Kind::NonNegative if v < 0.0 => Err(config_err(line, key, format!("must be non-negative, got {v}"))),
            _ => Ok(v),
        }
    }

    fn count(&mut self, key: &str, default: Option<usize>) -> Result<usize> {
        let d = default.map(|v| v.to_string());
        let text = self.text(key, d.as_deref())?;
        let line = self.line(key);
        match text.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(config_err(line, key, format!("`{text}` is not a positive integer"))),
        }
    }

    fn seed(&mut self, key: &str, default: u64) -> Result<u64> {
        let text = self.text(key, Some(&default.to_string()))?;
        let line = self.line(key);
        text.parse()
            .map_err(|_| config_err(line, key, format!("`{text}` is not an unsigned 64-bit integer")))
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool> {
        let text = self.text(key, Some(if default { "true" } else { "false" }))?;
        match text.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(config_err(self.line(key), key, format!("`{text}` is not a boolean"))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        if !self.given(key) {
            return Ok(None);
        }
        let text = self.text(key, None)?;
        let line = self.line(key);
        text.split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| config_err(line, key, format!("`{t}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn choice<'a>(&mut self, key: &str, default: &str, options: &[&'a str]) -> Result<&'a str> {
        let text = self.text(key, Some(default))?;
        options
            .iter()
            .copied()
            .find(|o| *o == text)
            .ok_or_else(|| config_err(self.line(key), key, format!("`{text}` is not one of {}", options.join(", "))))
    }
}

#[derive(Debug, Clone)]
pub enum ObservationSpec {
    /// Arc at `radius` from the source center, angles from +y in radians.
    Arc { radius: f64, n: usize, theta_start: f64, theta_end: f64 },
    Grid { ys: Vec<f64>, zs: Vec<f64> },
    /// Hyperbola through a point, traced from its vertex.
    Hyperbola { through: Point, s_max: f64, ds: f64 },
}

#[derive(Debug, Clone)]
pub enum NdfEstimator {
    PhaseSpace { full_plane: bool },
    Sphere { area: f64 },
    Radiometric { area: f64, omega_prime: f64 },
    ProjectedSolidAngle { theta_max: f64 },
}

#[derive(Debug, Clone)]
pub enum TaskParams {
    Spectrum { modes: usize, epsilon: f64, dump_matrix: bool },
    Map { reference: Point, exclusion: f64 },
    Wigner { window: f64, n_k: usize, k_max: f64, stride: usize },
    Ndf(NdfEstimator),
    Hyperbolas { s_max: f64, ds: f64 },
    MonteCarlo { realizations: usize, seed: u64, modes: usize, epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub task: Task,
    pub wave: WaveContext,
    pub line: Option<LineSource>,
    pub source: Option<SourceModel>,
    pub observation: Option<ObservationSpec>,
    pub params: TaskParams,
    pub output_dir: PathBuf,
    /// Every effective setting with its origin (`config` or `default`).
    pub settings: BTreeMap<String, Parameter>,
}

impl Scenario {
    pub fn source(&self) -> Result<&SourceModel> {
        self.source
            .as_ref()
            .ok_or_else(|| config_err(None, "source.length", "missing required key"))
    }

    pub fn observation_set(&self) -> Result<ObservationSet> {
        let line = self.line.ok_or_else(|| config_err(None, "source.length", "missing required key"))?;
        match self.observation.as_ref() {
            Some(ObservationSpec::Arc { radius, n, theta_start, theta_end }) => {
                ObservationSet::arc(*radius, *n, *theta_start, *theta_end)
            }
            Some(ObservationSpec::Grid { ys, zs }) => ObservationSet::grid(ys, zs),
            Some(ObservationSpec::Hyperbola { through, s_max, ds }) => {
                crate::geometry::Hyperbola::through(through, line)?.trace(*s_max, *ds)
            }
            None => Err(EitError::contract("task has no observation set")),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Parse a scenario for `task`. A `task` key, if present, must agree.
pub fn parse_scenario(text: &str, task: Task) -> Result<Scenario> {
    let mut r = Reader::parse(text)?;
    if r.given("task") {
        let named = r.text("task", None)?;
        if named != task.name() {
            return Err(config_err(
                r.line("task"),
                "task",
                format!("config is for `{named}` but `{}` was requested", task.name()),
            ));
        }
    } else {
        r.used.insert("task".into(), Parameter { value: task.name().into(), origin: "command line" });
    }

    let lambda = r.number("wave.lambda", Some(1.0))?;
    let wave = WaveContext::new(lambda)?;

    let needs_source = !matches!(task, Task::Ndf) || {
        let est = r.raw.get("ndf.estimator").map(|v| v.value.as_str()).unwrap_or("phase-space");
        est == "phase-space"
    };
    let (line, source) = if needs_source {
        let line = LineSource::from_length(r.number("source.length", None)? * lambda)?;
        let source = if matches!(task, Task::Hyperbolas | Task::Ndf) {
            None
        } else {
            Some(build_source(&mut r, line, &wave)?)
        };
        (Some(line), source)
    } else {
        (None, None)
    };

    let observation = match task {
        Task::Svd | Task::Equivalence | Task::MonteCarlo => {
            let kind = r.choice("observation.kind", "semicircle", &["semicircle", "arc"])?;
            let default_n = if task == Task::MonteCarlo { 180 } else { 720 };
            let radius = r.number("observation.radius", Some(200.0))? * lambda;
            let n = r.count("observation.n", Some(default_n))?;
            let (t0, t1) = if kind == "arc" {
                (r.number("observation.theta_start", Some(0.0))?, r.number("observation.theta_end", Some(180.0))?)
            } else {
                (0.0, 180.0)
            };
            if !(0.0..=180.0).contains(&t0) || !(0.0..=180.0).contains(&t1) || t0 >= t1 {
                return Err(config_err(
                    r.line("observation.theta_start"),
                    "observation.theta_start",
                    "arc angles must satisfy 0 <= start < end <= 180 degrees",
                ));
            }
            Some(ObservationSpec::Arc {
                radius,
                n,
                theta_start: t0.to_radians(),
                theta_end: t1.to_radians(),
            })
        }
        Task::CsdMap | Task::MiMap => {
            r.choice("observation.kind", "grid", &["grid"])?;
            let y0 = r.number("observation.y_min", Some(-40.0))?;
            let y1 = r.number("observation.y_max", Some(40.0))?;
            let z0 = r.number("observation.z_min", Some(0.3))?;
            let z1 = r.number("observation.z_max", Some(60.0))?;
            let ny = r.count("observation.ny", Some(200))?;
            let nz = r.count("observation.nz", Some(200))?;
            if y0 >= y1 || z0 >= z1 {
                return Err(config_err(r.line("observation.y_min"), "observation.y_min", "grid bounds must be increasing"));
            }
            Some(ObservationSpec::Grid {
                ys: linspace(y0 * lambda, y1 * lambda, ny),
                zs: linspace(z0 * lambda, z1 * lambda, nz),
            })
        }
        Task::Wigner => {
            r.choice("observation.kind", "hyperbola", &["hyperbola"])?;
            Some(ObservationSpec::Hyperbola {
                through: Point::new(
                    r.number("observation.through_y", Some(20.0))? * lambda,
                    r.number("observation.through_z", Some(16.0))? * lambda,
                ),
                s_max: r.number("observation.s_max", Some(300.0))? * lambda,
                ds: r.number("observation.ds", Some(1.0 / 16.0))? * lambda,
            })
        }
        Task::Ndf | Task::Hyperbolas => None,
    };

    let params = match task {
        Task::Svd | Task::Equivalence => TaskParams::Spectrum {
            modes: r.count("spectrum.modes", Some(20))?,
            epsilon: epsilon(&mut r)?,
            dump_matrix: r.flag("spectrum.dump_matrix", false)?,
        },
        Task::CsdMap | Task::MiMap => TaskParams::Map {
            reference: Point::new(
                r.number("coherence.reference_y", None)? * lambda,
                r.number("coherence.reference_z", None)? * lambda,
            ),
            exclusion: r.number("coherence.exclusion", Some(0.25))? * lambda,
        },
        Task::Wigner => TaskParams::Wigner {
            window: r.number("wigner.window", Some(8.0))? * lambda,
            n_k: r.count("wigner.n_k", Some(256))?,
            k_max: r.number("wigner.k_max", Some(1.5))? * wave.wavenumber(),
            stride: r.count("wigner.stride", Some(8))?,
        },
        Task::Ndf => TaskParams::Ndf(ndf_estimator(&mut r, lambda)?),
        Task::Hyperbolas => TaskParams::Hyperbolas {
            s_max: r.number("hyperbolas.s_max", Some(60.0))? * lambda,
            ds: r.number("hyperbolas.ds", Some(0.25))? * lambda,
        },
        Task::MonteCarlo => TaskParams::MonteCarlo {
            realizations: r.count("monte_carlo.realizations", Some(10_000))?,
            seed: r.seed("monte_carlo.seed", 0)?,
            modes: r.count("monte_carlo.modes", Some(10))?,
            epsilon: epsilon(&mut r)?,
        },
    };

    let output_dir = PathBuf::from(r.text("output.dir", Some("out"))?);
    Ok(Scenario {
        task,
        wave,
        line,
        source,
        observation,
        params,
        output_dir,
        settings: r.used,
    })
}

fn epsilon(r: &mut Reader) -> Result<f64> {
    let eps = r.number("spectrum.epsilon", Some(1e-2))?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(config_err(r.line("spectrum.epsilon"), "spectrum.epsilon", "must lie in (0, 1)"));
    }
    Ok(eps)
}

fn build_source(r: &mut Reader, line: LineSource, wave: &WaveContext) -> Result<SourceModel> {
    let intensity = match r.list("source.profile")? {
        Some(samples) => {
            if r.given("source.intensity") {
                return Err(config_err(
                    r.line("source.intensity"),
                    "source.intensity",
                    "give either a homogeneous intensity or a profile, not both",
                ));
            }
            Intensity::Tabulated(samples)
        }
        None => Intensity::Uniform(r.number("source.intensity", Some(1.0))?),
    };
    let npw = r.number("source.nodes_per_wavelength", Some(8.0))?;
    let rule = match r.choice("source.rule", "gauss", &["gauss", "midpoint"])? {
        "midpoint" => QuadratureRule::Midpoint,
        _ => QuadratureRule::Gauss,
    };
    let line_no = r.line("source.profile");
    build_quadrature(line, intensity, npw, rule, wave).map_err(|e| match e {
        EitError::Domain(msg) => config_err(line_no, "source", msg),
        other => other,
    })
}

fn ndf_estimator(r: &mut Reader, lambda: f64) -> Result<NdfEstimator> {
    let est = r.choice(
        "ndf.estimator",
        "phase-space",
        &["phase-space", "sphere", "radiometric", "projected-solid-angle"],
    )?;
    Ok(match est {
        "phase-space" => NdfEstimator::PhaseSpace {
            full_plane: r.choice("ndf.plane", "half", &["half", "full"])? == "full",
        },
        "sphere" => NdfEstimator::Sphere {
            area: r.number("ndf.area", None)? * lambda * lambda,
        },
        "radiometric" => NdfEstimator::Radiometric {
            area: r.number("ndf.area", None)? * lambda * lambda,
            omega_prime: r.number("ndf.omega_prime", Some(PI))?,
        },
        _ => NdfEstimator::ProjectedSolidAngle {
            theta_max: r.number("ndf.theta_max", Some(90.0))?.to_radians(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_scenario("[wave]\nlambda = 1\n[source]\nlength = 8\ntask = svd\n", Task::Svd);
        // `task` under [source] is `source.task`, which is unknown
        assert!(matches!(s, Err(EitError::Config { line: Some(5), .. })));

        let s = parse_scenario("task = svd\n[wave]\nlambda = 1\n[source]\nlength = 8\n", Task::Svd).unwrap();
        assert_eq!(s.line.unwrap().length(), 8.0);
        assert_eq!(s.settings["observation.n"].value, "720");
        assert_eq!(s.settings["observation.n"].origin, "default");
        assert_eq!(s.settings["source.length"].origin, "config");
        assert_eq!(s.observation_set().unwrap().len(), 720);
        match s.params {
            TaskParams::Spectrum { modes, epsilon, dump_matrix } => {
                assert_eq!((modes, epsilon, dump_matrix), (20, 1e-2, false));
            }
            _ => panic!("wrong params"),
        }
    }

    #[test]
    fn dotted_keys_equal_sections() {
        let a = parse_scenario("source.length = 8\nwave.lambda = 0.5\n", Task::Svd).unwrap();
        assert_eq!(a.line.unwrap().length(), 4.0);
        assert_eq!(a.wave.wavelength(), 0.5);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_scenario("# comment\nsorce.length = 8\n", Task::Svd).unwrap_err();
        match err {
            EitError::Config { line, key, .. } => assert_eq!((line, key.as_str()), (Some(2), "sorce.length")),
            other => panic!("{other}"),
        }
        assert_eq!(parse_scenario("sorce.length = 8\n", Task::Svd).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn missing_and_invalid_values() {
        assert!(matches!(
            parse_scenario("wave.lambda = 1\n", Task::Svd),
            Err(EitError::Config { ref key, .. }) if key == "source.length"
        ));
        assert!(matches!(
            parse_scenario("source.length = -8\n", Task::Svd),
            Err(EitError::Config { line: Some(1), .. })
        ));
        assert!(parse_scenario("source.length = eight\n", Task::Svd).is_err());
        assert!(parse_scenario("source.length = 8\nsource.length = 9\n", Task::Svd).is_err());
        assert!(parse_scenario("source.length = 8\ntask = mi-map\n", Task::Svd).is_err());
        assert!(parse_scenario("source.length = 8\n", Task::MiMap).is_err());
        assert!(parse_scenario("source.length = 8\nsource.rule = simpson\n", Task::Svd).is_err());
        assert!(parse_scenario("[source\n", Task::Svd).is_err());
        assert!(parse_scenario("source.length 8\n", Task::Svd).is_err());
    }

    #[test]
    fn ndf_sphere_needs_no_source() {
        let s = parse_scenario("[ndf]\nestimator = sphere\narea = 2\n", Task::Ndf).unwrap();
        assert!(s.line.is_none());
        assert!(matches!(s.params, TaskParams::Ndf(NdfEstimator::Sphere { area }) if area == 2.0));
    }

    #[test]
    fn tabulated_profile() {
        let s = parse_scenario("source.length = 2\nsource.profile = 1, 2, 1\n", Task::Svd).unwrap();
        assert!(matches!(s.source().unwrap().intensity(), Intensity::Tabulated(v) if v.len() == 3));
        assert!(parse_scenario("source.length = 2\nsource.profile = 1, 2\nsource.intensity = 1\n", Task::Svd).is_err());
        assert!(parse_scenario("source.length = 2\nsource.profile = 1, x\n", Task::Svd).is_err());
    }

    #[test]
    fn map_grid_is_scaled() {
        let s = parse_scenario(
            "source.length = 8\nwave.lambda = 2\n[coherence]\nreference_y = 20\nreference_z = 16\n[observation]\nny = 3\nnz = 2\n",
            Task::CsdMap,
        )
        .unwrap();
        let obs = s.observation_set().unwrap();
        assert_eq!(obs.grid_shape(), Some((3, 2)));
        assert_eq!(obs.as_slice()[0].y, -80.0);
        assert!(matches!(s.params, TaskParams::Map { reference, .. } if reference == Point::new(40.0, 32.0)));
    }
}
