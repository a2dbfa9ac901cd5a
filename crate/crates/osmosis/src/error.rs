//! Errors shared by the model, query, and framework layers.

use thiserror::Error;

use crate::model::{PdId, ResourceId};

/// Everything that can go wrong while building or querying a system.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("resource `{0}` does not exist")]
    UnknownResource(ResourceId),

    #[error("protection domain `{0}` does not exist")]
    UnknownPd(PdId),

    #[error("resource id `{0}` is already taken")]
    DuplicateResource(ResourceId),

    #[error("protection domain id `{0}` is already taken")]
    DuplicatePd(PdId),

    #[error("id `{0}` contains characters outside [A-Za-z0-9_.-]")]
    InvalidId(String),

    #[error("resource kind must be a non-empty word over [A-Za-z0-9_.-]")]
    InvalidKind(String),

    #[error("resource `{0}` cannot depend on itself")]
    SelfLoop(ResourceId),

    #[error("topology edges cannot be added once the system is sealed")]
    SealedTopology,

    #[error("physical resources cannot be added once the system is sealed")]
    SealedPhysical,

    #[error("the system must be sealed before it can be queried")]
    NotSealed,

    #[error("protection domain `{pd}` cannot reach resource `{resource}` through ownership or its directory")]
    PermissionDenied { pd: PdId, resource: ResourceId },

    #[error("no provider for kind `{kind}` is reachable from protection domain `{pd}`")]
    NoProvider { pd: PdId, kind: String },

    #[error("provider `{provider}` owns no resource that can back kind `{kind}`")]
    Exhausted { provider: PdId, kind: String },

    #[error("partition requires at least one part")]
    ZeroParts,

    #[error("unknown scenario `{0}` (expected threads, isolated-stacks, processes, unikernel or vm)")]
    UnknownScenario(String),

    #[error("no query named `{0}` in this scenario")]
    UnknownQuery(String),

    #[error("no delta named `{0}` in this scenario")]
    UnknownDelta(String),

    #[error("resource `{0}` is not virtual")]
    NotVirtual(ResourceId),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
