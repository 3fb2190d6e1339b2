use thiserror::Error;

/// Errors raised across the simulation and aggregation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode {mode} is not in the model's mode set")]
    UnknownMode { mode: usize },

    #[error("numerical blow-up for load {load} at t = {time} h")]
    NumericalBlowup { load: usize, time: f64 },

    #[error("model contract violated: {0}")]
    ModelContract(String),

    #[error("Zeno guard: jumps at t = {first} h and t = {second} h are closer than {epsilon} h (load {load})")]
    Zeno {
        load: usize,
        first: f64,
        second: f64,
        epsilon: f64,
    },

    #[error("load {load}: {source}")]
    Load {
        load: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid resolution: {0}")]
    Resolution(String),

    #[error("partition defect: {0}")]
    Partition(String),

    #[error("CFL violation: dt = {dt} h exceeds the admissible {admissible} h")]
    Cfl { dt: f64, admissible: f64 },

    #[error("mass conservation: |mass - 1| = {drift:e} exceeds {tolerance:e} at t = {time} h")]
    MassDrift {
        drift: f64,
        tolerance: f64,
        time: f64,
    },

    #[error("structural mismatch: {0}")]
    Mismatch(String),

    #[error("config: `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("empty comparison window")]
    EmptyWindow,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn for_load(self, load: usize) -> Self {
        match self {
            e @ (Error::Load { .. } | Error::Zeno { .. } | Error::NumericalBlowup { .. }) => e,
            other => Error::Load {
                load,
                source: Box::new(other),
            },
        }
    }
}
