use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time {t} outside [0, 1]")]
    TimeOutOfRange { t: f64 },

    #[error("noise scale is infinite at t = 0")]
    InfiniteNoiseScale,

    #[error("{scheduler} scheduler boundary: {what} at t = {t}")]
    SchedulerBoundary {
        scheduler: &'static str,
        what: &'static str,
        t: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite input")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("covariance is not positive definite (det = {det})")]
    SingularCovariance { det: f64 },

    #[error("mean-scale vector carries no information about the latent")]
    NoInformation,

    #[error("inner noise scale vanished at s = {s}")]
    InnerSingularity { s: f64 },

    #[error("unknown class label `{0}`")]
    UnknownLabel(String),

    #[error("model has no classifier-free guidance configuration")]
    NoGuidanceConfig,

    #[error("transition {transition}, step {step}: {source}")]
    AtStep {
        transition: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite potential for particle {particle} at transition {transition}")]
    NonFinitePotential { particle: usize, transition: usize },

    #[error("reward evaluated to NaN")]
    NanReward,

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_step(self, transition: usize, step: usize) -> Self {
        Error::AtStep {
            transition,
            step,
            source: Box::new(self),
        }
    }
}
