use thiserror::Error;

/// Errors produced by every stage of the stylization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("scene has neither structure elements nor objects")]
    EmptyScene,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("segmentation failed: {0}")]
    SegmentationFailure(String),
    #[error("labeling does not match mesh: {0}")]
    LabelMismatch(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("requested {requested} eigenpairs but mesh has only {available} vertices")]
    KTooLarge { requested: usize, available: usize },

    #[error("no face projects inside the frame")]
    EmptyRender,
    #[error("object {0} is not visible from any scene camera")]
    CoverageFailure(String),

    #[error("image has no pixel above the intensity floor")]
    DegenerateImage,
    #[error("embedding backend failure: {0}")]
    BackendFailure(String),
    #[error("embedding has (near) zero norm")]
    ZeroVector,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },
    #[error("texture library is empty or has no usable texture")]
    EmptyLibrary,
    #[error("no base color for segment {segment} of object {object}")]
    MissingBaseColor { object: String, segment: usize },
    #[error("rasterizer was not configured with position gradients")]
    GradientUnsupported,
    #[error("missing upstream artifact {0}")]
    MissingUpstream(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Wraps an error with the name of the pipeline stage it escaped from.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
