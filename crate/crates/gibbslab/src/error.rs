use std::path::PathBuf;

use crate::lattice::Site;

/// Crate-wide error type. Numerical routines refuse to return silently
/// degraded answers; every guard that trips maps to one of these variants.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("not convex: discrete slope decreases at grid index {index}")]
    NotConvex { index: usize },

    #[error("not a usable Young function: {clause}")]
    NotNice { clause: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tail not contained on the grid ({what}); {hint}")]
    TailNotContained { what: String, hint: String },

    #[error("growth envelope diverges on the t-grid at x = {x}")]
    DivergentEnvelope { x: f64 },

    #[error("divergent integrand near zero in the Herbst integral")]
    DivergentIntegrand,

    #[error("tensor of {size} points exceeds the budget of {budget}")]
    TensorBudget { size: usize, budget: usize },

    #[error("site {site} is not in the function support")]
    SiteNotInSupport { site: Site },

    #[error("support reaches L1 radius {radius}, not covered by shells {smax_minus_one} and {smax}")]
    SupportCondition {
        radius: u32,
        smax_minus_one: i64,
        smax: i64,
    },

    #[error("shell sites {a} and {b} are adjacent; refusing product integration")]
    ShellAdjacency { a: Site, b: Site },

    #[error("probe family produced no informative probe")]
    NoInformativeProbe,

    #[error("empty witness set: no sample landed in the base event")]
    EmptyWitnessSet,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config file {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("unknown scenario {0:?}; run `list-scenarios` for the registry")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
