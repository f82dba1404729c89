use thiserror::Error;

use crate::fields::ParticleField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty field")]
    EmptyField,

    #[error("region exceeds field support")]
    RegionExceedsSupport,

    #[error("grid too small for the stencil: {nr}x{nz} nodes, need at least 3 per axis")]
    StencilTooSmall { nr: usize, nz: usize },

    #[error("particles outside grid: {indices:?}")]
    ParticlesOutsideGrid { indices: Vec<usize> },

    #[error("singular evaluation")]
    SingularEvaluation,

    #[error("quadrature failed to converge: error estimate {estimate:e} exceeds tolerance {tol:e}")]
    QuadratureFailed { estimate: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("data is not integrable: {norm} norm diverges")]
    NonIntegrable { norm: String },

    #[error("grid spacing {h} too coarse for mollifier radius {eps} (need h <= eps/2)")]
    MollifierUnderResolved { h: f64, eps: f64 },

    #[error("velocity evaluation failed at particle {index}: {source}")]
    VelocityFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite state at step {step} (t = {time})")]
    NonFiniteState {
        step: usize,
        time: f64,
        snapshot: Box<ParticleField>,
    },

    #[error("majorant vanishes where the bounded quantity is {lhs:e}")]
    DegenerateMajorant { lhs: f64 },

    #[error("empty trajectory record")]
    EmptyRecord,

    #[error("test function support [{t0}, {t1}] exceeds record time range [0, {t_end}]")]
    TestSupportOutsideRecord { t0: f64, t1: f64, t_end: f64 },

    #[error("only {found} snapshots inside test support, need at least {needed}")]
    InsufficientSnapshots { found: usize, needed: usize },

    #[error("epsilon study is not Cauchy: {table}")]
    NotCauchy { table: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
