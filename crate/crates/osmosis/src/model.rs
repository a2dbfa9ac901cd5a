//! The state model: protection domains, resources, and the dependency
//! relation between resources.
//!
//! A [`System`] is a flat inventory of resources plus a directed relation
//! over them. An edge `a -> b` reads "`a` depends on `b`" and carries one of
//! three [`RelationKind`]s:
//!
//! * [`RelationKind::Topology`]: a fixed hardware fact (a cache set serving
//!   an address range). Frozen once the system is sealed.
//! * [`RelationKind::Mapping`]: installed by system software (a page-table
//!   entry tying a virtual page to a physical one).
//! * [`RelationKind::Allocation`]: ties a resource to the resource it was
//!   carved out of, recorded when the child is created.
//!
//! A [`ProtectionDomain`] owns a set of resources and carries a
//! [`ResourceDirectory`] that names, per resource kind, the domain that
//! services requests for that kind, with the creating domain as fallback.
//!
//! Construction is append-only: resources, domains, and edges are never
//! removed, so identifiers are never reused. [`System::seal`] flips the
//! system into its queryable state; after sealing, topology edges and
//! physical resources are immutable while virtual resources, mapping and
//! allocation edges, and new domains may still appear (that is exactly what
//! running software does to a machine).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Identifier of a resource, unique within one [`System`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ResourceId(String);

/// Identifier of a protection domain, unique within one [`System`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PdId(String);

macro_rules! id_impls {
    ($ty:ident) => {
        impl $ty {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $ty {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_impls!(ResourceId);
id_impls!(PdId);

/// Whether a resource is a hardware-backed fact or a software construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceClass {
    Physical,
    Virtual,
}

impl fmt::Display for ResourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResourceClass::Physical => "physical",
            ResourceClass::Virtual => "virtual",
        })
    }
}

/// Why one resource depends on another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Topology,
    Mapping,
    Allocation,
}

impl RelationKind {
    pub const ALL: [RelationKind; 3] = [
        RelationKind::Topology,
        RelationKind::Mapping,
        RelationKind::Allocation,
    ];
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationKind::Topology => "topology",
            RelationKind::Mapping => "mapping",
            RelationKind::Allocation => "allocation",
        })
    }
}

/// One directed dependency: `from` depends on `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub from: ResourceId,
    pub to: ResourceId,
    pub kind: RelationKind,
}

/// A named thing a protection domain can hold: a stack, an address space,
/// a bank of physical pages. `kind` is a free-form word ("stack", "vas",
/// "pmem") that groups resources for directory lookup and clone policies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Resource {
    pub id: ResourceId,
    pub kind: String,
    pub class: ResourceClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Per-kind service table of a protection domain.
///
/// `entries` maps a resource kind to the domain that handles requests for
/// that kind; `creator` is the fallback for kinds with no entry. A domain
/// may name itself (a unikernel services its own address-space requests).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ResourceDirectory {
    pub entries: BTreeMap<String, PdId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub creator: Option<PdId>,
}

impl ResourceDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style entry insertion.
    pub fn with_entry(mut self, kind: impl Into<String>, provider: impl Into<PdId>) -> Self {
        self.entries.insert(kind.into(), provider.into());
        self
    }

    /// Builder-style creator assignment.
    pub fn with_creator(mut self, creator: impl Into<PdId>) -> Self {
        self.creator = Some(creator.into());
        self
    }

    /// Every domain this directory can hand a request to: explicit entry
    /// targets plus the creator fallback, deduplicated.
    pub fn providers(&self) -> BTreeSet<PdId> {
        let mut out: BTreeSet<PdId> = self.entries.values().cloned().collect();
        if let Some(c) = &self.creator {
            out.insert(c.clone());
        }
        out
    }
}

/// A protection domain: the set of resources it can currently access plus
/// the directory through which it may acquire more.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProtectionDomain {
    pub id: PdId,
    pub resources: BTreeSet<ResourceId>,
    pub directory: ResourceDirectory,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// A structural defect found by [`System::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DanglingOwnedResource { pd: PdId, resource: ResourceId },
    DanglingDirectoryProvider { pd: PdId, kind: String, provider: PdId },
    DanglingCreator { pd: PdId, creator: PdId },
    DanglingEdgeEndpoint { edge: Edge, endpoint: ResourceId },
    EmptyResourceKind { resource: ResourceId },
    SelfLoopEdge { resource: ResourceId, kind: RelationKind },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingOwnedResource { pd, resource } => {
                write!(f, "pd `{pd}` owns unknown resource `{resource}`")
            }
            Violation::DanglingDirectoryProvider { pd, kind, provider } => {
                write!(f, "pd `{pd}` directs kind `{kind}` to unknown pd `{provider}`")
            }
            Violation::DanglingCreator { pd, creator } => {
                write!(f, "pd `{pd}` names unknown creator `{creator}`")
            }
            Violation::DanglingEdgeEndpoint { edge, endpoint } => {
                write!(
                    f,
                    "{} edge `{}` -> `{}` references unknown resource `{endpoint}`",
                    edge.kind, edge.from, edge.to
                )
            }
            Violation::EmptyResourceKind { resource } => {
                write!(f, "resource `{resource}` has an empty kind")
            }
            Violation::SelfLoopEdge { resource, kind } => {
                write!(f, "{kind} edge loops resource `{resource}` onto itself")
            }
        }
    }
}

pub(crate) fn valid_word(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

/// The whole machine state: resources, domains, and the dependency relation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct System {
    pub(crate) resources: BTreeMap<ResourceId, Resource>,
    pub(crate) pds: BTreeMap<PdId, ProtectionDomain>,
    pub(crate) edges: BTreeSet<Edge>,
    /// Request kinds a provider may satisfy out of a different kind it owns
    /// ("vmem" regions carved from a "vas").
    pub(crate) backing_kinds: BTreeMap<String, String>,
    pub(crate) sealed: bool,
    auto_resource: u64,
    auto_pd: u64,
}

impl System {
    pub fn new() -> Self {
        Self::default()
    }

    // --- inspection -------------------------------------------------------

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn resource(&self, id: &ResourceId) -> Option<&Resource> {
        self.resources.get(id)
    }

    pub fn pd(&self, id: &PdId) -> Option<&ProtectionDomain> {
        self.pds.get(id)
    }

    /// Resources in id order.
    pub fn resources(&self) -> impl Iterator<Item = &Resource> {
        self.resources.values()
    }

    /// Protection domains in id order.
    pub fn pds(&self) -> impl Iterator<Item = &ProtectionDomain> {
        self.pds.values()
    }

    /// Edges in (from, to, kind) order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn resource_count(&self) -> usize {
        self.resources.len()
    }

    pub fn pd_count(&self) -> usize {
        self.pds.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_resource(&self, id: &ResourceId) -> bool {
        self.resources.contains_key(id)
    }

    pub fn contains_pd(&self, id: &PdId) -> bool {
        self.pds.contains_key(id)
    }

    pub fn contains_edge(&self, from: &ResourceId, to: &ResourceId, kind: RelationKind) -> bool {
        self.edges.contains(&Edge {
            from: from.clone(),
            to: to.clone(),
            kind,
        })
    }

    /// The declared backing kind for a request kind, if any.
    pub fn backing_kind(&self, kind: &str) -> Option<&str> {
        self.backing_kinds.get(kind).map(String::as_str)
    }

    /// All `(request kind, backing kind)` declarations, in kind order.
    pub fn backing_kinds(&self) -> impl Iterator<Item = (&str, &str)> {
        self.backing_kinds
            .iter()
            .map(|(k, b)| (k.as_str(), b.as_str()))
    }

    // --- construction -----------------------------------------------------

    /// Adds a resource under a fresh generated id and returns that id.
    ///
    /// Physical resources can only be added while the system is unsealed;
    /// they describe hardware, and hardware does not appear at runtime.
    pub fn add_resource(
        &mut self,
        kind: impl Into<String>,
        class: ResourceClass,
        label: Option<String>,
    ) -> Result<ResourceId> {
        let id = self.fresh_resource_id();
        self.add_resource_with_id(id, kind, class, label)
    }

    /// Adds a resource under a caller-chosen id.
    pub fn add_resource_with_id(
        &mut self,
        id: impl Into<ResourceId>,
        kind: impl Into<String>,
        class: ResourceClass,
        label: Option<String>,
    ) -> Result<ResourceId> {
        let id = id.into();
        let kind = kind.into();
        if !valid_word(id.as_str()) {
            return Err(Error::InvalidId(id.as_str().to_owned()));
        }
        if !valid_word(&kind) {
            return Err(Error::InvalidKind(kind));
        }
        if self.sealed && class == ResourceClass::Physical {
            return Err(Error::SealedPhysical);
        }
        if self.resources.contains_key(&id) {
            return Err(Error::DuplicateResource(id));
        }
        self.resources.insert(
            id.clone(),
            Resource {
                id: id.clone(),
                kind,
                class,
                label,
            },
        );
        Ok(id)
    }

    /// Adds an empty protection domain under a fresh generated id.
    pub fn add_pd(&mut self, label: Option<String>) -> Result<PdId> {
        let id = self.fresh_pd_id();
        self.add_pd_with_id(id, label)
    }

    /// Adds an empty protection domain under a caller-chosen id.
    pub fn add_pd_with_id(&mut self, id: impl Into<PdId>, label: Option<String>) -> Result<PdId> {
        let id = id.into();
        if !valid_word(id.as_str()) {
            return Err(Error::InvalidId(id.as_str().to_owned()));
        }
        if self.pds.contains_key(&id) {
            return Err(Error::DuplicatePd(id));
        }
        self.pds.insert(
            id.clone(),
            ProtectionDomain {
                id: id.clone(),
                resources: BTreeSet::new(),
                directory: ResourceDirectory::new(),
                label,
            },
        );
        Ok(id)
    }

    /// Puts an existing resource into a domain's resource set. Sharing is
    /// first-class: any number of domains may hold the same resource.
    pub fn assign_resource(&mut self, pd: &PdId, resource: &ResourceId) -> Result<()> {
        if !self.resources.contains_key(resource) {
            return Err(Error::UnknownResource(resource.clone()));
        }
        let pd = self
            .pds
            .get_mut(pd)
            .ok_or_else(|| Error::UnknownPd(pd.clone()))?;
        pd.resources.insert(resource.clone());
        Ok(())
    }

    /// Sets (or overwrites) a directory entry on a domain.
    pub fn set_directory_entry(
        &mut self,
        pd: &PdId,
        kind: impl Into<String>,
        provider: &PdId,
    ) -> Result<()> {
        let kind = kind.into();
        if !valid_word(&kind) {
            return Err(Error::InvalidKind(kind));
        }
        if !self.pds.contains_key(provider) {
            return Err(Error::UnknownPd(provider.clone()));
        }
        let pd = self
            .pds
            .get_mut(pd)
            .ok_or_else(|| Error::UnknownPd(pd.clone()))?;
        pd.directory.entries.insert(kind, provider.clone());
        Ok(())
    }

    /// Sets a domain's creator fallback.
    pub fn set_creator(&mut self, pd: &PdId, creator: &PdId) -> Result<()> {
        if !self.pds.contains_key(creator) {
            return Err(Error::UnknownPd(creator.clone()));
        }
        let pd = self
            .pds
            .get_mut(pd)
            .ok_or_else(|| Error::UnknownPd(pd.clone()))?;
        pd.directory.creator = Some(creator.clone());
        Ok(())
    }

    /// Adds a dependency edge. Adding an edge that already exists is a
    /// no-op, not an error.
    pub fn add_edge(&mut self, from: &ResourceId, to: &ResourceId, kind: RelationKind) -> Result<()> {
        if !self.resources.contains_key(from) {
            return Err(Error::UnknownResource(from.clone()));
        }
        if !self.resources.contains_key(to) {
            return Err(Error::UnknownResource(to.clone()));
        }
        if from == to {
            return Err(Error::SelfLoop(from.clone()));
        }
        if self.sealed && kind == RelationKind::Topology {
            return Err(Error::SealedTopology);
        }
        self.edges.insert(Edge {
            from: from.clone(),
            to: to.clone(),
            kind,
        });
        Ok(())
    }

    /// Declares that requests for `kind` may be satisfied by carving from an
    /// owned resource of kind `backing`.
    pub fn declare_backing_kind(
        &mut self,
        kind: impl Into<String>,
        backing: impl Into<String>,
    ) -> Result<()> {
        let kind = kind.into();
        let backing = backing.into();
        if !valid_word(&kind) {
            return Err(Error::InvalidKind(kind));
        }
        if !valid_word(&backing) {
            return Err(Error::InvalidKind(backing));
        }
        self.backing_kinds.insert(kind, backing);
        Ok(())
    }

    /// Freezes the hardware facts: after this, no new physical resources
    /// and no new topology edges. Everything else stays mutable. Idempotent.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    // --- integrity --------------------------------------------------------

    /// Re-checks every cross-reference in the system. The mutating API keeps
    /// these invariants by construction, so a non-empty result means the
    /// system was corrupted by something outside this module.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for r in self.resources.values() {
            if r.kind.is_empty() {
                out.push(Violation::EmptyResourceKind {
                    resource: r.id.clone(),
                });
            }
        }
        for pd in self.pds.values() {
            for res in &pd.resources {
                if !self.resources.contains_key(res) {
                    out.push(Violation::DanglingOwnedResource {
                        pd: pd.id.clone(),
                        resource: res.clone(),
                    });
                }
            }
            for (kind, provider) in &pd.directory.entries {
                if !self.pds.contains_key(provider) {
                    out.push(Violation::DanglingDirectoryProvider {
                        pd: pd.id.clone(),
                        kind: kind.clone(),
                        provider: provider.clone(),
                    });
                }
            }
            if let Some(creator) = &pd.directory.creator {
                if !self.pds.contains_key(creator) {
                    out.push(Violation::DanglingCreator {
                        pd: pd.id.clone(),
                        creator: creator.clone(),
                    });
                }
            }
        }
        for edge in &self.edges {
            for endpoint in [&edge.from, &edge.to] {
                if !self.resources.contains_key(endpoint) {
                    out.push(Violation::DanglingEdgeEndpoint {
                        edge: edge.clone(),
                        endpoint: endpoint.clone(),
                    });
                }
            }
            if edge.from == edge.to {
                out.push(Violation::SelfLoopEdge {
                    resource: edge.from.clone(),
                    kind: edge.kind,
                });
            }
        }
        out
    }

    // --- id generation ----------------------------------------------------

    pub(crate) fn fresh_resource_id(&mut self) -> ResourceId {
        loop {
            let candidate = ResourceId::new(format!("r{}", self.auto_resource));
            self.auto_resource += 1;
            if !self.resources.contains_key(&candidate) {
                return candidate;
            }
        }
    }

    pub(crate) fn fresh_pd_id(&mut self) -> PdId {
        loop {
            let candidate = PdId::new(format!("pd{}", self.auto_pd));
            self.auto_pd += 1;
            if !self.pds.contains_key(&candidate) {
                return candidate;
            }
        }
    }
}
