use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the core.
///
/// Variants split into two families: configuration errors (the caller asked
/// for something meaningless, see [`Error::is_config`]) and data errors (the
/// inputs violate a store invariant).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("matrix of {rows}x{dim} needs {} values, found {len}", rows * dim)]
    Shape { rows: usize, dim: usize, len: usize },

    #[error("row {row} of {matrix} has norm {norm}, expected 1 within 1e-3")]
    NormViolation { matrix: &'static str, row: usize, norm: f64 },

    #[error("cosine of a zero vector is undefined")]
    ZeroVector,

    #[error("{what}: expected {expected} entries, found {found}")]
    CountMismatch { what: &'static str, expected: usize, found: usize },

    #[error("image {image} has label {label} but the store has {classes} classes")]
    LabelOutOfRange { image: usize, label: u32, classes: usize },

    #[error("class {class} has no test images")]
    NoTestImages { class: usize },

    #[error("description {pool_id} mentions the name of its origin class {class}")]
    ClassnameInDescription { pool_id: usize, class: usize },

    #[error("pair key ({class}, {pool_id}) does not reference a valid class and description")]
    InvalidPairKey { class: u32, pool_id: u32 },

    #[error("duplicate pair key ({class}, {pool_id})")]
    DuplicatePairKey { class: u32, pool_id: u32 },

    #[error("class {class} has {available} train images, {requested} requested")]
    InsufficientSamples { class: usize, available: usize, requested: usize },

    #[error("probe set does not match the store: {0}")]
    InvalidProbeSet(&'static str),

    #[error("neighborhood size k={k} is too small, need at least 2 candidates")]
    KTooSmall { k: usize },

    #[error("class {class} is not among the candidates")]
    NotACandidate { class: u32 },

    #[error("the description pool carries no origin-class metadata")]
    MissingOrigin,

    #[error("requested {requested} descriptions per class from a pool of {available}")]
    PoolTooSmall { requested: usize, available: usize },

    #[error("no pair embedding for class {class} and description {pool_id}")]
    MissingPair { class: u32, pool_id: u32 },

    #[error("classname-included evaluation needs a pair embedding table")]
    MissingPairTable,

    #[error("cannot aggregate an empty description list")]
    EmptyDescriptions,

    #[error("lookup matrix does not fit the store: {0}")]
    LookupMismatch(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
}

impl Error {
    /// True for errors caused by request parameters rather than by data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::KTooSmall { .. }
                | Error::InvalidConfig(_)
                | Error::InfeasibleSpec(_)
                | Error::MissingPairTable
                | Error::PoolTooSmall { .. }
                | Error::InsufficientSamples { .. }
        )
    }
}
