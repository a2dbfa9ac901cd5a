//! Model operating-system isolation mechanisms as graphs and measure the
//! isolation they provide.
//!
//! The core idea: every OS construct (a thread, a process, a container, a
//! virtual machine) is a [`ProtectionDomain`] holding [`Resource`]s, and
//! resources depend on each other through explicit edges (a stack is
//! allocated out of an address space, a heap page is mapped onto physical
//! memory, a device sits on a bus). Once a [`System`] of domains and
//! resources is assembled and sealed, hop-bounded closure queries answer
//! "what does this domain transitively depend on, within `n` steps?", and
//! comparing two domains' closures yields a concrete isolation level: the
//! smallest hop depth at which their dependencies collide outside an
//! accepted set.
//!
//! The crate has four layers:
//!
//! - [`model`]: resources, protection domains, directories, edges, and the
//!   [`System`] container with its validity rules.
//! - [`queries`]: hop-bounded closures, sharing, and isolation levels over
//!   a sealed system, plus a deliberately naive reference implementation
//!   ([`queries::oracle_closure`]) for cross-checking.
//! - [`framework`]: the runtime operations (allocate, partition, request,
//!   map, [`framework::new_pd`], [`framework::clone_pd`]) that grow a
//!   sealed system the way running software would.
//! - [`scenario`] and [`canonical`]: a text format for describing systems
//!   plus the five built-in reference systems used throughout the tests
//!   and examples.
//!
//! Start with the `examples/` directory; each example is a runnable tour
//! of one capability.

pub mod canonical;
pub mod cli;
pub mod error;
pub mod framework;
pub mod model;
pub mod queries;
pub mod scenario;

pub use canonical::{build_canonical, CanonicalScenario};
pub use cli::render_dot;
pub use error::{Error, Result};
pub use framework::{
    allocate_from, clone_pd, map_resource, new_pd, partition, request_resource,
    AllocationReceipt, DirectoryPolicy, IsolationFunction, ResourcePolicy,
};
pub use model::{
    Edge, PdId, ProtectionDomain, RelationKind, Resource, ResourceClass, ResourceDirectory,
    ResourceId, System, Violation,
};
pub use scenario::{
    emit_scenario, parse_scenario, ParseError, QueryExpr, QueryOutcome, ScenarioDoc,
};
pub use queries::{
    oracle_closure, ExclusionSet, HopCount, IsolationVerdict, Snapshot, Witness,
};

