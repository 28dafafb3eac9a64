use crate::image::StageName;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by parsing, contract violations, and pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid PPM at byte {offset}: {message}")]
    PpmParse { offset: usize, message: String },

    #[error("truncated PPM pixel data: expected {expected} bytes, found {actual}")]
    PpmTruncated { expected: usize, actual: usize },

    #[error("unsupported PPM depth: maxval {maxval} exceeds 255")]
    UnsupportedDepth { maxval: u64 },

    #[error("degenerate sample range [{lo}, {hi}] has zero width")]
    DegenerateRange { lo: f64, hi: f64 },

    #[error("k-means needs at least k={k} samples, got {rows}")]
    TooFewSamples { rows: usize, k: usize },

    #[error(
        "no foreground marker survived erosion radius {erosion_radius} with min_area \
         {min_area}; lower --min-area or --erosion"
    )]
    NoForegroundMarkers {
        erosion_radius: usize,
        min_area: usize,
    },

    #[error("marker map is empty")]
    EmptyMarkers,

    #[error("MSE must be nonnegative, got {mse}")]
    NegativeMse { mse: f64 },

    #[error("{0}")]
    Contract(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: StageName,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: StageName) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Error {
        Error::Contract(msg.into())
    }
}
