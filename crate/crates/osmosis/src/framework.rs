//! The operations a running system performs: creating domains, carving
//! resources out of other resources, serving resource requests through
//! directories, installing mappings, and cloning domains under an isolation
//! policy.
//!
//! Every operation validates its inputs before touching the system, so a
//! failed call leaves the system exactly as it was. Every successful call
//! keeps [`System::validate`] empty.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{
    Edge, PdId, RelationKind, ResourceClass, ResourceDirectory, ResourceId, System,
};

/// Proof of one allocation: the fresh resource, the resource it was carved
/// from, and the allocation edge recording that.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationReceipt {
    pub new_resource: ResourceId,
    pub parent: ResourceId,
    pub edge: Edge,
}

/// What a clone does with each kind of resource the source owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResourcePolicy {
    /// The clone holds the very same resource.
    Share,
    /// The clone gets a fresh resource carved from the original's
    /// allocation parent, so the dependency shape repeats one level up.
    /// When the parent itself is copied in the same clone, the fresh
    /// resource is carved from the parent's copy instead, and an original
    /// with no allocation parent yields a fresh parentless resource.
    /// Copies are always virtual: they are made by software.
    Copy,
    /// The clone does not get this kind at all.
    Exclude,
}

/// What a clone does with each directory entry of the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DirectoryPolicy {
    Keep,
    Retarget(PdId),
    Drop,
}

/// Per-kind policies applied by [`clone_pd`], with defaults for kinds not
/// listed. The default directory policy also governs the creator fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsolationFunction {
    resource_policies: BTreeMap<String, ResourcePolicy>,
    directory_policies: BTreeMap<String, DirectoryPolicy>,
    default_resource: ResourcePolicy,
    default_directory: DirectoryPolicy,
}

impl IsolationFunction {
    /// Share every resource, keep every directory entry: the thread case.
    pub fn share_all() -> Self {
        Self::new(ResourcePolicy::Share, DirectoryPolicy::Keep)
    }

    pub fn new(default_resource: ResourcePolicy, default_directory: DirectoryPolicy) -> Self {
        Self {
            resource_policies: BTreeMap::new(),
            directory_policies: BTreeMap::new(),
            default_resource,
            default_directory,
        }
    }

    pub fn resource(mut self, kind: impl Into<String>, policy: ResourcePolicy) -> Self {
        self.resource_policies.insert(kind.into(), policy);
        self
    }

    pub fn directory(mut self, kind: impl Into<String>, policy: DirectoryPolicy) -> Self {
        self.directory_policies.insert(kind.into(), policy);
        self
    }

    pub fn resource_policy_for(&self, kind: &str) -> ResourcePolicy {
        self.resource_policies
            .get(kind)
            .copied()
            .unwrap_or(self.default_resource)
    }

    pub fn directory_policy_for(&self, kind: &str) -> &DirectoryPolicy {
        self.directory_policies
            .get(kind)
            .unwrap_or(&self.default_directory)
    }

    pub fn creator_policy(&self) -> &DirectoryPolicy {
        &self.default_directory
    }
}

/// Creates a protection domain owning `resources`, with `directory` entries
/// and `creator` as its request fallback (a `creator` argument overrides a
/// creator already set on `directory`).
pub fn new_pd(
    sys: &mut System,
    resources: &BTreeSet<ResourceId>,
    directory: ResourceDirectory,
    creator: Option<&PdId>,
) -> Result<PdId> {
    let id = reserve_pd_id(sys);
    new_pd_with_id(sys, id, resources, directory, creator, None)
}

/// [`new_pd`] under a caller-chosen id, with an optional label.
pub fn new_pd_with_id(
    sys: &mut System,
    id: impl Into<PdId>,
    resources: &BTreeSet<ResourceId>,
    directory: ResourceDirectory,
    creator: Option<&PdId>,
    label: Option<String>,
) -> Result<PdId> {
    let id = id.into();
    for r in resources {
        if !sys.contains_resource(r) {
            return Err(Error::UnknownResource(r.clone()));
        }
    }
    for provider in directory.entries.values() {
        if !sys.contains_pd(provider) {
            return Err(Error::UnknownPd(provider.clone()));
        }
    }
    let creator = creator.cloned().or(directory.creator.clone());
    if let Some(c) = &creator {
        if !sys.contains_pd(c) {
            return Err(Error::UnknownPd(c.clone()));
        }
    }

    let id = sys.add_pd_with_id(id, label)?;
    for r in resources {
        sys.assign_resource(&id, r).expect("resource checked above");
    }
    for (kind, provider) in &directory.entries {
        sys.set_directory_entry(&id, kind.clone(), provider)
            .expect("provider checked above");
    }
    if let Some(c) = &creator {
        sys.set_creator(&id, c).expect("creator checked above");
    }
    Ok(id)
}

/// Carves a fresh virtual resource of `kind` out of `parent` for `owner`.
/// `parent` must be owned by `owner` or by a domain its directory reaches.
pub fn allocate_from(
    sys: &mut System,
    owner: &PdId,
    parent: &ResourceId,
    kind: impl Into<String>,
) -> Result<AllocationReceipt> {
    let id = reserve_resource_id(sys);
    allocate_from_with_id(sys, id, owner, parent, kind)
}

/// [`allocate_from`] under a caller-chosen id for the fresh resource.
pub fn allocate_from_with_id(
    sys: &mut System,
    id: impl Into<ResourceId>,
    owner: &PdId,
    parent: &ResourceId,
    kind: impl Into<String>,
) -> Result<AllocationReceipt> {
    let id = id.into();
    if !sys.contains_pd(owner) {
        return Err(Error::UnknownPd(owner.clone()));
    }
    if !sys.contains_resource(parent) {
        return Err(Error::UnknownResource(parent.clone()));
    }
    if !can_reach_resource(sys, owner, parent) {
        return Err(Error::PermissionDenied {
            pd: owner.clone(),
            resource: parent.clone(),
        });
    }
    let new_resource = sys.add_resource_with_id(id, kind, ResourceClass::Virtual, None)?;
    sys.assign_resource(owner, &new_resource)
        .expect("owner checked above");
    sys.add_edge(&new_resource, parent, RelationKind::Allocation)
        .expect("endpoints exist and differ");
    Ok(AllocationReceipt {
        new_resource: new_resource.clone(),
        parent: parent.clone(),
        edge: Edge {
            from: new_resource,
            to: parent.clone(),
            kind: RelationKind::Allocation,
        },
    })
}

/// Splits `parent` into `parts` fresh children of the parent's kind, each
/// carved from it. The parent stays in place: the model never deletes.
pub fn partition(
    sys: &mut System,
    owner: &PdId,
    parent: &ResourceId,
    parts: usize,
) -> Result<Vec<AllocationReceipt>> {
    if parts == 0 {
        return Err(Error::ZeroParts);
    }
    let ids: Vec<ResourceId> = (0..parts).map(|_| reserve_resource_id(sys)).collect();
    partition_with_ids(sys, owner, parent, &ids)
}

/// [`partition`] under caller-chosen child ids; `ids` must be non-empty.
pub fn partition_with_ids(
    sys: &mut System,
    owner: &PdId,
    parent: &ResourceId,
    ids: &[ResourceId],
) -> Result<Vec<AllocationReceipt>> {
    if ids.is_empty() {
        return Err(Error::ZeroParts);
    }
    let kind = sys
        .resource(parent)
        .ok_or_else(|| Error::UnknownResource(parent.clone()))?
        .kind
        .clone();
    // Check everything up front so a bad child id cannot half-apply.
    for id in ids {
        if sys.contains_resource(id) {
            return Err(Error::DuplicateResource(id.clone()));
        }
    }
    let mut unique = BTreeSet::new();
    for id in ids {
        if !unique.insert(id) {
            return Err(Error::DuplicateResource(id.clone()));
        }
    }
    ids.iter()
        .map(|id| allocate_from_with_id(sys, id.clone(), owner, parent, kind.clone()))
        .collect()
}

/// Asks `requester`'s directory for a resource of `kind`.
///
/// Resolution: an explicit entry for the kind names the provider outright;
/// otherwise the request falls through to the creator, then the creator's
/// creator, until a domain with an entry is found or the chain ends, in
/// which case the last domain handles the request itself. Each domain
/// is visited at most once, so creator cycles resolve to "no provider".
///
/// The provider serves the request by carving a fresh resource of `kind`
/// from an owned resource of that kind, or of the kind registered as
/// backing it (the smallest-id candidate, for determinism). The fresh
/// resource belongs to the requester.
pub fn request_resource(
    sys: &mut System,
    requester: &PdId,
    kind: impl Into<String>,
) -> Result<AllocationReceipt> {
    let id = reserve_resource_id(sys);
    request_resource_with_id(sys, id, requester, kind)
}

/// [`request_resource`] under a caller-chosen id for the fresh resource.
pub fn request_resource_with_id(
    sys: &mut System,
    id: impl Into<ResourceId>,
    requester: &PdId,
    kind: impl Into<String>,
) -> Result<AllocationReceipt> {
    let kind = kind.into();
    let provider = resolve_provider(sys, requester, &kind)?;
    let backing = pick_backing(sys, &provider, &kind)?;
    let receipt = allocate_from_with_id(sys, id, &provider, &backing, kind)?;
    // The provider allocated on the requester's behalf; hand the fresh
    // resource over (sharing with the provider is not implied).
    if provider != *requester {
        let pd = sys.pds.get_mut(&provider).expect("provider exists");
        pd.resources.remove(&receipt.new_resource);
        sys.assign_resource(requester, &receipt.new_resource)
            .expect("requester checked in resolve_provider");
    }
    Ok(receipt)
}

/// Records that virtual resource `virtual_res` is backed by `target` (a
/// page-table style fact). The provider must be able to reach `target`;
/// the mapped resource must be virtual. Idempotent.
pub fn map_resource(
    sys: &mut System,
    provider: &PdId,
    virtual_res: &ResourceId,
    target: &ResourceId,
) -> Result<()> {
    if !sys.contains_pd(provider) {
        return Err(Error::UnknownPd(provider.clone()));
    }
    let v = sys
        .resource(virtual_res)
        .ok_or_else(|| Error::UnknownResource(virtual_res.clone()))?;
    if v.class != ResourceClass::Virtual {
        return Err(Error::NotVirtual(virtual_res.clone()));
    }
    if !sys.contains_resource(target) {
        return Err(Error::UnknownResource(target.clone()));
    }
    if !can_reach_resource(sys, provider, target) {
        return Err(Error::PermissionDenied {
            pd: provider.clone(),
            resource: target.clone(),
        });
    }
    sys.add_edge(virtual_res, target, RelationKind::Mapping)
}

/// Clones `source` under an isolation policy and returns the clone's id.
/// The source is never modified.
pub fn clone_pd(sys: &mut System, source: &PdId, policy: &IsolationFunction) -> Result<PdId> {
    let id = reserve_pd_id(sys);
    clone_pd_with_id(sys, id, source, policy)
}

/// [`clone_pd`] under a caller-chosen id for the clone.
pub fn clone_pd_with_id(
    sys: &mut System,
    id: impl Into<PdId>,
    source: &PdId,
    policy: &IsolationFunction,
) -> Result<PdId> {
    let id = id.into();
    let src = sys
        .pd(source)
        .ok_or_else(|| Error::UnknownPd(source.clone()))?
        .clone();
    if sys.contains_pd(&id) {
        return Err(Error::DuplicatePd(id));
    }

    // Work out the whole plan before mutating anything.
    let mut shared: BTreeSet<ResourceId> = BTreeSet::new();
    let mut to_copy: BTreeSet<ResourceId> = BTreeSet::new();
    for r in &src.resources {
        let kind = &sys.resource(r).expect("owned resources exist").kind;
        match policy.resource_policy_for(kind) {
            ResourcePolicy::Share => {
                shared.insert(r.clone());
            }
            ResourcePolicy::Copy => {
                to_copy.insert(r.clone());
            }
            ResourcePolicy::Exclude => {}
        }
    }

    let mut directory = ResourceDirectory::new();
    for (kind, provider) in &src.directory.entries {
        match policy.directory_policy_for(kind) {
            DirectoryPolicy::Keep => {
                directory.entries.insert(kind.clone(), provider.clone());
            }
            DirectoryPolicy::Retarget(target) => {
                if !sys.contains_pd(target) {
                    return Err(Error::UnknownPd(target.clone()));
                }
                directory.entries.insert(kind.clone(), target.clone());
            }
            DirectoryPolicy::Drop => {}
        }
    }
    let creator = match policy.creator_policy() {
        DirectoryPolicy::Keep => src.directory.creator.clone(),
        DirectoryPolicy::Retarget(target) => {
            if !sys.contains_pd(target) {
                return Err(Error::UnknownPd(target.clone()));
            }
            Some(target.clone())
        }
        DirectoryPolicy::Drop => None,
    };

    // Copy parents-first so copied children hang off copied parents and the
    // dependency shape repeats. A parent outside the copy set stays the
    // parent of the copy (fresh sibling); allocation cycles between copied
    // resources fall back to original parents rather than recursing.
    let alloc_parent: BTreeMap<ResourceId, ResourceId> = {
        let mut m = BTreeMap::new();
        for e in sys.edges() {
            if e.kind == RelationKind::Allocation {
                m.entry(e.from.clone())
                    .and_modify(|t: &mut ResourceId| {
                        if e.to < *t {
                            *t = e.to.clone();
                        }
                    })
                    .or_insert_with(|| e.to.clone());
            }
        }
        m
    };
    let mut copies: BTreeMap<ResourceId, ResourceId> = BTreeMap::new();
    let mut pending: Vec<ResourceId> = to_copy.iter().cloned().collect();
    while !pending.is_empty() {
        let mut progressed = false;
        let mut still_pending = Vec::new();
        for orig in pending {
            let parent = alloc_parent.get(&orig);
            let parent_copied = parent.is_some_and(|p| to_copy.contains(p));
            if parent_copied && !copies.contains_key(parent.expect("checked")) {
                still_pending.push(orig);
                continue;
            }
            let resource = sys.resource(&orig).expect("owned resources exist").clone();
            let copy_id = sys
                .add_resource(resource.kind, ResourceClass::Virtual, resource.label)
                .expect("kind already validated on the original");
            if let Some(p) = parent {
                let effective = copies.get(p).unwrap_or(p);
                sys.add_edge(&copy_id, &effective.clone(), RelationKind::Allocation)
                    .expect("fresh id differs from any parent");
            }
            copies.insert(orig, copy_id);
            progressed = true;
        }
        pending = still_pending;
        if !progressed && !pending.is_empty() {
            // Allocation cycle among copied resources: carve the rest from
            // their original parents.
            for orig in pending.drain(..) {
                let resource = sys.resource(&orig).expect("owned resources exist").clone();
                let copy_id = sys
                    .add_resource(resource.kind, ResourceClass::Virtual, resource.label)
                    .expect("kind already validated on the original");
                if let Some(p) = alloc_parent.get(&orig) {
                    sys.add_edge(&copy_id, p, RelationKind::Allocation)
                        .expect("fresh id differs from any parent");
                }
                copies.insert(orig, copy_id);
            }
        }
    }

    let mut clone_resources = shared;
    clone_resources.extend(copies.into_values());
    new_pd_with_id(sys, id, &clone_resources, directory, creator.as_ref(), None)
}

// --- shared helpers ---------------------------------------------------------

/// True when `pd` owns `resource` or some domain reachable through its
/// directory (entries and creator fallbacks, transitively) owns it.
fn can_reach_resource(sys: &System, pd: &PdId, resource: &ResourceId) -> bool {
    let mut visited = BTreeSet::new();
    let mut queue = vec![pd.clone()];
    visited.insert(pd.clone());
    while let Some(p) = queue.pop() {
        if let Some(domain) = sys.pd(&p) {
            if domain.resources.contains(resource) {
                return true;
            }
            for provider in domain.directory.providers() {
                if visited.insert(provider.clone()) {
                    queue.push(provider);
                }
            }
        }
    }
    false
}

fn resolve_provider(sys: &System, requester: &PdId, kind: &str) -> Result<PdId> {
    if !sys.contains_pd(requester) {
        return Err(Error::UnknownPd(requester.clone()));
    }
    let mut visited: BTreeSet<PdId> = BTreeSet::new();
    let mut current = requester.clone();
    visited.insert(current.clone());
    loop {
        let pd = sys.pd(&current).expect("walk stays inside the system");
        if let Some(provider) = pd.directory.entries.get(kind) {
            if !sys.contains_pd(provider) {
                return Err(Error::UnknownPd(provider.clone()));
            }
            return Ok(provider.clone());
        }
        match &pd.directory.creator {
            Some(creator) if !visited.contains(creator) => {
                visited.insert(creator.clone());
                current = creator.clone();
            }
            Some(_) => {
                // Creator cycle with no entry anywhere on it.
                return Err(Error::NoProvider {
                    pd: requester.clone(),
                    kind: kind.to_owned(),
                });
            }
            None => {
                if current != *requester {
                    // The end of the creator chain handles the request.
                    return Ok(current);
                }
                return Err(Error::NoProvider {
                    pd: requester.clone(),
                    kind: kind.to_owned(),
                });
            }
        }
    }
}

fn pick_backing(sys: &System, provider: &PdId, kind: &str) -> Result<ResourceId> {
    let pd = sys
        .pd(provider)
        .ok_or_else(|| Error::UnknownPd(provider.clone()))?;
    let of_kind = |k: &str| {
        pd.resources
            .iter()
            .find(|r| sys.resource(r).map(|res| res.kind == k).unwrap_or(false))
            .cloned()
    };
    if let Some(r) = of_kind(kind) {
        return Ok(r);
    }
    if let Some(backing) = sys.backing_kind(kind) {
        if let Some(r) = of_kind(backing) {
            return Ok(r);
        }
    }
    Err(Error::Exhausted {
        provider: provider.clone(),
        kind: kind.to_owned(),
    })
}

fn reserve_resource_id(sys: &mut System) -> ResourceId {
    sys.fresh_resource_id()
}

fn reserve_pd_id(sys: &mut System) -> PdId {
    sys.fresh_pd_id()
}
