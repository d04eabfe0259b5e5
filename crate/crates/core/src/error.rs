use alloc::string::String;

use crate::scenario::VehicleId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no vehicles")]
    NoVehicles,

    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },

    #[error("unknown vehicle id {0}")]
    UnknownVehicle(VehicleId),

    #[error("zero distance between transmitter and receiver")]
    ZeroDistance,

    #[error("empty sample set")]
    EmptySamples,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("frame list is empty")]
    EmptyFrames,

    #[error("frame {frame} does not exist")]
    UnknownFrame { frame: usize },

    #[error(
        "conflict graph has {nodes} nodes, above the enumeration cap of {cap}; \
         reduce the scenario (fewer vehicles or a smaller communication range)"
    )]
    TooManyNodes { nodes: usize, cap: usize },

    #[error("missing capacity for active arc {0}")]
    MissingCapacity(usize),

    #[error("flow program infeasible: {0}")]
    Infeasible(String),

    #[error("interior-point solver hit the iteration limit ({0})")]
    IterationLimit(usize),

    #[error("singular KKT system")]
    Singular,
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// An error tagged with the pipeline stage that produced it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

pub(crate) trait AtStage<T> {
    fn at(self, stage: &'static str) -> core::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> core::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}
