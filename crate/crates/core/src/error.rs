use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("vertex {vertex} out of range for a space of {n} points")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("points {0} and {1} are in different connected components")]
    Disconnected(usize, usize),

    #[error("generating set does not reach element {0}")]
    NotGenerating(String),

    #[error("element {element} is not representable in quotient {quotient}")]
    NotRepresentable { element: String, quotient: usize },

    #[error("kernel has no value for the pair ({0}, {1})")]
    MissingPair(usize, usize),

    #[error("kernel is not of negative type: eigenvalue {eigenvalue} beyond tolerance {tolerance}")]
    NotNegativeType { eigenvalue: f64, tolerance: f64 },

    #[error("no component has chart radius >= {0}")]
    ScaleUnavailable(u64),

    #[error("missing chart: center {center} does not trivialise point {member}")]
    MissingChart { center: usize, member: usize },

    #[error("component {component} has girth {girth:?}, too small for chart radius {radius}")]
    GirthTooSmall {
        component: usize,
        girth: Option<usize>,
        radius: u64,
    },

    #[error("point {0} lies in no set of the cover")]
    Coverage(usize),

    #[error("truncation infeasible at n = {n}: {reason}")]
    Infeasible { n: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
