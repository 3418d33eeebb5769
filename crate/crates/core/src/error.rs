use thiserror::Error;

/// Errors raised by the numerical routines and the scenario front end.
#[derive(Debug, Error)]
pub enum EitError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "singular Green's function evaluation (R = {distance:e}){}",
        indices_suffix(*.obs_index, *.node_index)
    )]
    Singularity {
        distance: f64,
        obs_index: Option<usize>,
        node_index: Option<usize>,
    },

    #[error("{nodes_per_wavelength} nodes per wavelength is below the minimum of 4")]
    Resolution { nodes_per_wavelength: f64 },

    #[error("|xi| = {xi:e} does not define a hyperbola branch (limit 2a = {limit:e})")]
    DegenerateBranch { xi: f64, limit: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degree of coherence undefined: zero spectral intensity at an endpoint")]
    UndefinedCoherence,

    #[error("mutual information saturates at |mu| = {abs_mu}")]
    Saturation { abs_mu: f64 },

    #[error("spectral centroid undefined: column has no positive values")]
    UndefinedCentroid,

    #[error("index {index} out of range (len {len})")]
    Range { index: usize, len: usize },

    #[error("{}", config_message(*.line, .key, .message))]
    Config {
        line: Option<usize>,
        key: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EitError>;

fn indices_suffix(obs: Option<usize>, node: Option<usize>) -> String {
    match (obs, node) {
        (Some(m), Some(q)) => format!(" at observation {m}, source node {q}"),
        (Some(m), None) => format!(" at observation {m}"),
        (None, Some(q)) => format!(" at source node {q}"),
        (None, None) => String::new(),
    }
}

fn config_message(line: Option<usize>, key: &str, message: &str) -> String {
    match line {
        Some(l) => format!("config line {l}: `{key}`: {message}"),
        None => format!("config: `{key}`: {message}"),
    }
}

impl EitError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        EitError::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        EitError::Contract(msg.into())
    }

    /// Attach observation/node indices to a singularity raised by a bare kernel call.
    pub(crate) fn at(self, obs: usize, node: usize) -> Self {
        match self {
            EitError::Singularity { distance, .. } => EitError::Singularity {
                distance,
                obs_index: Some(obs),
                node_index: Some(node),
            },
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            EitError::Io(_) | EitError::Csv(_) | EitError::Json(_) => 2,
            EitError::Config { .. } => 1,
            _ => 3,
        }
    }
}
