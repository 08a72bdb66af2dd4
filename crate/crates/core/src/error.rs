use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{source_name}, row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("{source_name}, row {row}: expected {expected} values, found {found}")]
    DimensionMismatch {
        source_name: String,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),

    #[error("degenerate local geometry at point {index}: {reason}")]
    DegenerateGeometry { index: usize, reason: String },

    #[error("landscape evaluation at the pole of the stereographic chart")]
    Pole,

    #[error("point is {distance:e} away from the torus (tolerance {tolerance:e})")]
    OffManifold { distance: f64, tolerance: f64 },

    #[error("non-finite energy at sample {0}")]
    NonFiniteEnergy(usize),

    #[error("isolated state {0} has zero jump rate")]
    IsolatedState(usize),

    #[error("boundary sets intersect at {0:?}")]
    OverlappingSets(Vec<usize>),

    #[error("connected component reaches neither A nor B: {members:?}")]
    DisconnectedComponent { members: Vec<usize> },

    #[error("iterative solver stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("B is not reachable from A in the reactive graph")]
    Unreachable,

    #[error("dominant path recursion found an empty subgraph below bottleneck ({0}, {1})")]
    EmptySubgraph(usize, usize),

    #[error("nodes {0} and {1} are not joined by a reactive edge")]
    NotAdjacent(usize, usize),

    #[error("committor vanishes at retained states {0:?}")]
    VanishingCommittor(Vec<usize>),

    #[error("no neighbouring sample within the averaging radius for {empty} of {total} path points; increase r0 (currently {r0})")]
    EmptyBalls { empty: usize, total: usize, r0: f64 },

    #[error("string iteration did not converge in {steps} steps (last displacement {displacement:e})")]
    StringNotConverged { steps: usize, displacement: f64 },

    #[error("no sign change of z found in the dihedral series; the transition is never sampled")]
    NoCrossings,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

/// Read a whole text file, naming the file in the error.
pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

/// Tag the error of a pipeline stage with the stage name.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
