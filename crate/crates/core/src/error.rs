use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("time {t_s} s outside scene duration [0, {duration_s}] s")]
    TimeOutOfRange { t_s: f64, duration_s: f64 },

    #[error("frame index {index} outside scene ({n_frames} frames)")]
    FrameOutOfRange { index: usize, n_frames: usize },

    #[error("CFAR window {window_rows}x{window_cols} does not fit a {rows}x{cols} map")]
    WindowTooLarge {
        window_rows: usize,
        window_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("CFAR threshold search did not converge: {0}")]
    ThresholdNotConverged(String),

    #[error("angle estimation needs at least 2 channels, got {0}")]
    TooFewChannels(usize),

    #[error("measurement geometry is singular (range {0} m)")]
    SingularGeometry(f64),

    #[error("innovation covariance is not invertible")]
    DegenerateInnovation,

    #[error("need at least 2 ROC points, got {0}")]
    TooFewPoints(usize),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("run spec {path}: {message}")]
    Spec { path: PathBuf, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    /// Attributes an error to a named processing stage.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
