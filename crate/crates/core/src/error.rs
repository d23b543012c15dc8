use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("duplicate joint id `{0}`")]
    DuplicateJoint(String),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("self-loop joint `{0}`")]
    SelfLoop(String),
    #[error("kinematic cycle through link `{0}`")]
    Cycle(String),
    #[error("link `{0}` has more than one parent joint")]
    MultipleParents(String),
    #[error("link `{0}` is not connected to the root")]
    Disconnected(String),
    #[error("root link `{0}` cannot be the child of a joint")]
    RootHasParent(String),
    #[error("joint `{joint}` axis has norm {norm}, expected 1")]
    NonUnitAxis { joint: String, norm: f64 },
    #[error("joint `{joint}` has invalid limits [{lower}, {upper}]")]
    InvalidLimits { joint: String, lower: f64, upper: f64 },
    #[error("joint `{0}` has zero range")]
    ZeroRange(String),
    #[error("invalid geometry on link `{link}`: {reason}")]
    InvalidGeometry { link: String, reason: String },
    #[error("invalid joint state: {0}")]
    InvalidState(String),
    #[error("object has zero total surface area")]
    ZeroArea,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no feasible contact point")]
    ContactFailed,
    #[error("degenerate flow estimate: {0}")]
    EstimatorDegenerate(String),
}
