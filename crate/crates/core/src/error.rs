use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    /// The denominator polynomial has at least one root on or outside the unit circle.
    #[error("unstable denominator: roots {roots:?} (magnitudes {magnitudes:?})")]
    UnstableDenominator {
        roots: Vec<(f64, f64)>,
        magnitudes: Vec<f64>,
    },

    #[error("simulation diverged at tick {tick}")]
    Diverged { tick: usize },

    /// An element was retriggered while still holding a duty pulse.
    #[error("schedule collision: element {element} retriggered at tick {tick} (busy until {busy_until})")]
    Collision {
        element: usize,
        tick: usize,
        busy_until: usize,
    },

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("frequency {freq} is not inside the signal band (edge {band_edge})")]
    OutOfBand { freq: f64, band_edge: f64 },

    #[error("insufficient bins for slope fit: {0}")]
    InsufficientBins(usize),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("case '{case}': {source}")]
    Scenario {
        case: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::UnstableDenominator { .. } => "unstable",
            Error::Diverged { .. } => "diverged",
            Error::Collision { .. } => "collision",
            Error::NonFinite { .. } => "non-finite",
            Error::OutOfBand { .. } => "out-of-band",
            Error::InsufficientBins(_) => "insufficient-bins",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Scenario { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_case(self, case: &str) -> Error {
        Error::Scenario {
            case: case.to_owned(),
            source: Box::new(self),
        }
    }
}
