//! Hop-bounded closure queries that quantify how isolated two protection
//! domains are.
//!
//! All queries run against a [`Snapshot`], an immutable index built from a
//! sealed [`System`]. A snapshot owns its data, so it can be cloned and read
//! from any number of threads while the originating system keeps mutating;
//! queries made against it answer for the moment it was taken.
//!
//! The central notions:
//!
//! * the n-hop closure of a resource set: every resource reachable by
//!   following at most `n` dependency edges (hop 0 is the set itself);
//! * the n-hop closure of a domain: the closure of its owned resources,
//!   unioned with the closure of each directory provider computed at one
//!   hop less (asking a provider costs a hop, and what a provider can reach
//!   is what it could hand out);
//! * the isolation level of a domain pair: the smallest hop count at which
//!   the two closures start overlapping outside an agreed exclusion set.
//!   Level 0 means they already share resources outright; the further out
//!   the overlap starts, the stronger the mechanism separating them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::ser::{Serialize, SerializeMap, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::model::{PdId, ResourceId, System};

/// A hop budget: a concrete bound or "as far as edges go".
///
/// `Unbounded` behaves exactly like a bound at which every closure in the
/// system has stopped growing. Resource-to-resource steps visit each
/// resource at most once and directory steps visit each domain at most
/// once, so the resource count plus the domain count always suffices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopCount {
    Finite(usize),
    Unbounded,
}

impl HopCount {
    pub(crate) fn budget(self, saturation: usize) -> usize {
        match self {
            HopCount::Finite(n) => n,
            HopCount::Unbounded => saturation,
        }
    }
}

impl From<usize> for HopCount {
    fn from(n: usize) -> Self {
        HopCount::Finite(n)
    }
}

impl fmt::Display for HopCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HopCount::Finite(n) => write!(f, "{n}"),
            HopCount::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for HopCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "inf" | "unbounded" => Ok(HopCount::Unbounded),
            _ => s
                .parse::<usize>()
                .map(HopCount::Finite)
                .map_err(|_| format!("`{s}` is not a hop count (expected an integer or `inf`)")),
        }
    }
}

impl Serialize for HopCount {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HopCount::Finite(n) => serializer.serialize_u64(*n as u64),
            HopCount::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

/// Resources two domains are allowed to share without counting against
/// their isolation: deliberately shared pages, read-only code, and so on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSet(BTreeSet<ResourceId>);

impl ExclusionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an exclusion set, verifying every id against the system.
    pub fn resolve(sys: &System, ids: impl IntoIterator<Item = ResourceId>) -> Result<Self> {
        let mut out = BTreeSet::new();
        for id in ids {
            if !sys.contains_resource(&id) {
                return Err(Error::UnknownResource(id));
            }
            out.insert(id);
        }
        Ok(Self(out))
    }

    /// Builds an exclusion set from ids already known to be valid.
    pub fn from_ids(ids: impl IntoIterator<Item = ResourceId>) -> Self {
        Self(ids.into_iter().collect())
    }

    pub fn contains(&self, id: &ResourceId) -> bool {
        self.0.contains(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ResourceId> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The first configuration at which two domains were seen sharing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub n1: usize,
    pub n2: usize,
    /// Everything the two closures share at `(n1, n2)`.
    pub shared: BTreeSet<ResourceId>,
}

/// Outcome of [`Snapshot::isolation_level`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IsolationVerdict {
    /// Sharing starts at `level` hops from one of the two domains; the
    /// witness pins down the minimal hop pair and what is shared there.
    SharedAt { level: usize, witness: Witness },
    /// No sharing outside the exclusion set at any bounded hop pair.
    FullyIsolated,
}

impl IsolationVerdict {
    pub fn level(&self) -> Option<usize> {
        match self {
            IsolationVerdict::SharedAt { level, .. } => Some(*level),
            IsolationVerdict::FullyIsolated => None,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            IsolationVerdict::SharedAt { witness, .. } => Some(witness),
            IsolationVerdict::FullyIsolated => None,
        }
    }

    pub fn is_fully_isolated(&self) -> bool {
        matches!(self, IsolationVerdict::FullyIsolated)
    }
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Witness", 3)?;
        s.serialize_field("n1", &self.n1)?;
        s.serialize_field("n2", &self.n2)?;
        s.serialize_field("shared", &self.shared)?;
        s.end()
    }
}

impl Serialize for IsolationVerdict {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            IsolationVerdict::FullyIsolated => serializer.serialize_str("isolated"),
            IsolationVerdict::SharedAt { level, witness } => {
                let mut m = serializer.serialize_map(Some(2))?;
                m.serialize_entry("level", level)?;
                m.serialize_entry("witness", witness)?;
                m.end()
            }
        }
    }
}

/// Reference closure: the literal fixed-budget relational join.
///
/// Runs `n` rounds of "add every out-neighbor of the current set" over the
/// raw edge list, with no reachability machinery at all. It is deliberately
/// slow and deliberately independent of [`Snapshot::n_hop_resources`], so
/// the two can be checked against each other.
pub fn oracle_closure(
    sys: &System,
    n: HopCount,
    seed: &BTreeSet<ResourceId>,
) -> Result<BTreeSet<ResourceId>> {
    if !sys.is_sealed() {
        return Err(Error::NotSealed);
    }
    for id in seed {
        if !sys.contains_resource(id) {
            return Err(Error::UnknownResource(id.clone()));
        }
    }
    let mut current = seed.clone();
    for _ in 0..n.budget(sys.resource_count()) {
        let mut next = current.clone();
        for edge in sys.edges() {
            if current.contains(&edge.from) {
                next.insert(edge.to.clone());
            }
        }
        current = next;
    }
    Ok(current)
}

/// An immutable, thread-shareable index of a sealed system, sized for
/// running many queries against the same state.
#[derive(Debug, Clone)]
pub struct Snapshot {
    resource_ids: Vec<ResourceId>,
    pd_ids: Vec<PdId>,
    /// Resource adjacency (indices into `resource_ids`), all edge kinds
    /// merged: a dependency is a dependency regardless of why it exists.
    out: Vec<Vec<u32>>,
    pd_owned: Vec<Vec<u32>>,
    pd_providers: Vec<Vec<u32>>,
}

impl Snapshot {
    /// Indexes a sealed system. Fails on an unsealed one: queries answer
    /// about a machine whose hardware facts are fixed.
    pub fn of(sys: &System) -> Result<Self> {
        if !sys.is_sealed() {
            return Err(Error::NotSealed);
        }
        let resource_ids: Vec<ResourceId> = sys.resources().map(|r| r.id.clone()).collect();
        let pd_ids: Vec<PdId> = sys.pds().map(|p| p.id.clone()).collect();
        let res_index: BTreeMap<&ResourceId, u32> = resource_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id, i as u32))
            .collect();
        let pd_index: BTreeMap<&PdId, u32> = pd_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id, i as u32))
            .collect();

        let mut out = vec![Vec::new(); resource_ids.len()];
        for edge in sys.edges() {
            out[res_index[&edge.from] as usize].push(res_index[&edge.to]);
        }
        for adj in &mut out {
            adj.sort_unstable();
            adj.dedup();
        }

        let mut pd_owned = Vec::with_capacity(pd_ids.len());
        let mut pd_providers = Vec::with_capacity(pd_ids.len());
        for pd in sys.pds() {
            pd_owned.push(pd.resources.iter().map(|r| res_index[r]).collect());
            pd_providers.push(
                pd.directory
                    .providers()
                    .iter()
                    .map(|p| pd_index[p])
                    .collect(),
            );
        }

        Ok(Self {
            resource_ids,
            pd_ids,
            out,
            pd_owned,
            pd_providers,
        })
    }

    pub fn resource_count(&self) -> usize {
        self.resource_ids.len()
    }

    pub fn resource_ids(&self) -> impl Iterator<Item = &ResourceId> {
        self.resource_ids.iter()
    }

    pub fn pd_ids(&self) -> impl Iterator<Item = &PdId> {
        self.pd_ids.iter()
    }

    /// A budget at which every closure has saturated. Raw resource
    /// closures stop growing at the resource count; domain closures pay
    /// extra hops for directory indirection, at most one per domain.
    fn saturation_bound(&self) -> usize {
        self.resource_ids.len() + self.pd_ids.len()
    }

    // --- public queries ---------------------------------------------------

    /// Everything reachable from `seed` in at most `n` dependency hops.
    /// Hop 0 is the seed itself.
    pub fn n_hop_resources(
        &self,
        n: HopCount,
        seed: &BTreeSet<ResourceId>,
    ) -> Result<BTreeSet<ResourceId>> {
        let seeds = seed
            .iter()
            .map(|id| self.res_idx(id))
            .collect::<Result<Vec<_>>>()?;
        let budget = n.budget(self.saturation_bound());
        Ok(self.collect_ids(&self.resource_closure(budget, &seeds)))
    }

    /// Everything a domain can reach in at most `n` hops: its own resources'
    /// closure, plus each directory provider's closure one hop shallower
    /// (recursively, so a provider's providers cost two hops, and so on).
    pub fn n_hop_resources_of_pd(&self, n: HopCount, pd: &PdId) -> Result<BTreeSet<ResourceId>> {
        let pd = self.pd_idx(pd)?;
        let budget = n.budget(self.saturation_bound());
        let costs = self.pd_costs(pd);
        let members = (0..self.resource_count())
            .filter(|&r| costs[r] <= budget)
            .collect::<Vec<_>>();
        Ok(members.iter().map(|&r| self.resource_ids[r].clone()).collect())
    }

    /// The overlap of two domains' closures at possibly different budgets.
    pub fn n_hop_shared(
        &self,
        n1: HopCount,
        n2: HopCount,
        pd1: &PdId,
        pd2: &PdId,
    ) -> Result<BTreeSet<ResourceId>> {
        let (c1, c2) = (self.pd_costs(self.pd_idx(pd1)?), self.pd_costs(self.pd_idx(pd2)?));
        let (b1, b2) = (
            n1.budget(self.saturation_bound()),
            n2.budget(self.saturation_bound()),
        );
        Ok((0..self.resource_count())
            .filter(|&r| c1[r] <= b1 && c2[r] <= b2)
            .map(|r| self.resource_ids[r].clone())
            .collect())
    }

    /// True when everything the two domains share at `(n1, n2)` hops is
    /// covered by the exclusion set.
    pub fn n_hop_isolated(
        &self,
        n1: HopCount,
        n2: HopCount,
        delta: &ExclusionSet,
        pd1: &PdId,
        pd2: &PdId,
    ) -> Result<bool> {
        Ok(self
            .n_hop_shared(n1, n2, pd1, pd2)?
            .iter()
            .all(|r| delta.contains(r)))
    }

    /// True when `pd` is isolated from every other domain in the system at
    /// `(n, n)` hops, modulo the exclusion set.
    pub fn pd_isolated_in_system(
        &self,
        n: HopCount,
        delta: &ExclusionSet,
        pd: &PdId,
    ) -> Result<bool> {
        self.pd_idx(pd)?;
        for other in &self.pd_ids {
            if other != pd && !self.n_hop_isolated(n, n, delta, pd, other)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The smallest hop count at which the two domains share anything
    /// outside the exclusion set.
    ///
    /// Let `N` be the saturation bound, the budget at which closures have
    /// stopped growing. Scanning `k` upward, the level is the first `k`
    /// where the pair `(k, N)` or `(N, k)` shares outside the exclusion
    /// set; nothing below can share, because closures only grow with their
    /// budget. The probe's `N` side is then walked down to its own minimum
    /// so the witness reports the genuinely minimal pair. No violation up
    /// to `(N, N)` means no violation anywhere.
    pub fn isolation_level(
        &self,
        pd1: &PdId,
        pd2: &PdId,
        delta: &ExclusionSet,
    ) -> Result<IsolationVerdict> {
        let c1 = self.pd_costs(self.pd_idx(pd1)?);
        let c2 = self.pd_costs(self.pd_idx(pd2)?);
        let resources = self.resource_count();
        let n = self.saturation_bound();

        let violates = |b1: usize, b2: usize| -> bool {
            (0..resources).any(|r| {
                c1[r] <= b1 && c2[r] <= b2 && !delta.contains(&self.resource_ids[r])
            })
        };
        let shared_at = |b1: usize, b2: usize| -> BTreeSet<ResourceId> {
            (0..resources)
                .filter(|&r| c1[r] <= b1 && c2[r] <= b2)
                .map(|r| self.resource_ids[r].clone())
                .collect()
        };

        for k in 0..=n {
            if violates(k, n) {
                let m = (0..=n).find(|&m| violates(k, m)).expect("violates(k, n) held");
                return Ok(IsolationVerdict::SharedAt {
                    level: k,
                    witness: Witness {
                        n1: k,
                        n2: m,
                        shared: shared_at(k, m),
                    },
                });
            }
            if violates(n, k) {
                let m = (0..=n).find(|&m| violates(m, k)).expect("violates(n, k) held");
                return Ok(IsolationVerdict::SharedAt {
                    level: k,
                    witness: Witness {
                        n1: m,
                        n2: k,
                        shared: shared_at(m, k),
                    },
                });
            }
        }
        Ok(IsolationVerdict::FullyIsolated)
    }

    // --- internals ----------------------------------------------------------

    fn res_idx(&self, id: &ResourceId) -> Result<usize> {
        self.resource_ids
            .binary_search(id)
            .map_err(|_| Error::UnknownResource(id.clone()))
    }

    fn pd_idx(&self, id: &PdId) -> Result<usize> {
        self.pd_ids
            .binary_search(id)
            .map_err(|_| Error::UnknownPd(id.clone()))
    }

    fn collect_ids(&self, members: &[bool]) -> BTreeSet<ResourceId> {
        members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(r, _)| self.resource_ids[r].clone())
            .collect()
    }

    /// Frontier BFS, bounded by `budget` hops.
    fn resource_closure(&self, budget: usize, seeds: &[usize]) -> Vec<bool> {
        let mut inside = vec![false; self.resource_count()];
        let mut frontier = Vec::with_capacity(seeds.len());
        for &s in seeds {
            if !inside[s] {
                inside[s] = true;
                frontier.push(s);
            }
        }
        for _ in 0..budget {
            if frontier.is_empty() {
                break;
            }
            let mut next = Vec::new();
            for u in frontier {
                for &v in &self.out[u] {
                    if !inside[v as usize] {
                        inside[v as usize] = true;
                        next.push(v as usize);
                    }
                }
            }
            frontier = next;
        }
        inside
    }

    /// For every resource, the least hop budget at which `pd`'s closure
    /// contains it (`usize::MAX` when it never does).
    ///
    /// A resource costs `d + e` hops when it sits `e` dependency edges from
    /// the owned set of a provider `d` directory hops away; the closure at
    /// budget `n` is exactly the resources with cost at most `n`. Directory
    /// distance is a plain BFS over the provider graph (which handles
    /// provider cycles and self-entries: revisiting a domain never lowers
    /// its distance), and the edge phase is a bucketed multi-source BFS
    /// seeded with those distances.
    fn pd_costs(&self, pd: usize) -> Vec<usize> {
        let mut pd_dist = vec![usize::MAX; self.pd_ids.len()];
        let mut queue = VecDeque::new();
        pd_dist[pd] = 0;
        queue.push_back(pd);
        while let Some(p) = queue.pop_front() {
            for &q in &self.pd_providers[p] {
                if pd_dist[q as usize] == usize::MAX {
                    pd_dist[q as usize] = pd_dist[p] + 1;
                    queue.push_back(q as usize);
                }
            }
        }

        let max_dist = self.pd_ids.len() + self.resource_count() + 1;
        let mut cost = vec![usize::MAX; self.resource_count()];
        let mut buckets = vec![Vec::new(); max_dist + 1];
        for (p, &d) in pd_dist.iter().enumerate() {
            if d == usize::MAX {
                continue;
            }
            for &r in &self.pd_owned[p] {
                if d < cost[r as usize] {
                    cost[r as usize] = d;
                    buckets[d].push(r as usize);
                }
            }
        }
        for d in 0..=max_dist {
            while let Some(r) = buckets[d].pop() {
                if cost[r] != d {
                    continue;
                }
                for &v in &self.out[r] {
                    if d + 1 < cost[v as usize] {
                        cost[v as usize] = d + 1;
                        buckets[d + 1].push(v as usize);
                    }
                }
            }
        }
        cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RelationKind, ResourceClass};

    fn rid(s: &str) -> ResourceId {
        ResourceId::from(s)
    }

    fn set(ids: &[&str]) -> BTreeSet<ResourceId> {
        ids.iter().map(|s| rid(s)).collect()
    }

    /// a -> b -> c -> d, plus x off to the side.
    fn chain() -> System {
        let mut sys = System::new();
        for id in ["a", "b", "c", "d", "x"] {
            sys.add_resource_with_id(id, "page", ResourceClass::Virtual, None)
                .unwrap();
        }
        sys.add_edge(&rid("a"), &rid("b"), RelationKind::Allocation).unwrap();
        sys.add_edge(&rid("b"), &rid("c"), RelationKind::Mapping).unwrap();
        sys.add_edge(&rid("c"), &rid("d"), RelationKind::Topology).unwrap();
        sys.seal();
        sys
    }

    #[test]
    fn zero_hops_is_the_seed_itself() {
        let sys = chain();
        let snap = Snapshot::of(&sys).unwrap();
        let seed = set(&["a", "x"]);
        assert_eq!(snap.n_hop_resources(0.into(), &seed).unwrap(), seed);
    }

    #[test]
    fn hops_walk_the_chain_one_edge_at_a_time() {
        let sys = chain();
        let snap = Snapshot::of(&sys).unwrap();
        let seed = set(&["a"]);
        assert_eq!(snap.n_hop_resources(1.into(), &seed).unwrap(), set(&["a", "b"]));
        assert_eq!(
            snap.n_hop_resources(2.into(), &seed).unwrap(),
            set(&["a", "b", "c"])
        );
        assert_eq!(
            snap.n_hop_resources(HopCount::Unbounded, &seed).unwrap(),
            set(&["a", "b", "c", "d"])
        );
        // Saturated well before the budget runs out.
        assert_eq!(
            snap.n_hop_resources(100.into(), &seed).unwrap(),
            set(&["a", "b", "c", "d"])
        );
    }

    #[test]
    fn unknown_seed_is_reported_by_id() {
        let sys = chain();
        let snap = Snapshot::of(&sys).unwrap();
        let err = snap.n_hop_resources(1.into(), &set(&["ghost"])).unwrap_err();
        assert_eq!(err, Error::UnknownResource(rid("ghost")));
    }

    #[test]
    fn unsealed_systems_cannot_be_queried() {
        let sys = System::new();
        assert_eq!(Snapshot::of(&sys).unwrap_err(), Error::NotSealed);
        assert_eq!(
            oracle_closure(&sys, 0.into(), &BTreeSet::new()).unwrap_err(),
            Error::NotSealed
        );
    }

    #[test]
    fn oracle_matches_hand_values_on_the_chain() {
        let sys = chain();
        assert_eq!(oracle_closure(&sys, 0.into(), &set(&["a"])).unwrap(), set(&["a"]));
        assert_eq!(
            oracle_closure(&sys, 2.into(), &set(&["a"])).unwrap(),
            set(&["a", "b", "c"])
        );
        assert_eq!(
            oracle_closure(&sys, HopCount::Unbounded, &set(&["a"])).unwrap(),
            set(&["a", "b", "c", "d"])
        );
        assert_eq!(
            oracle_closure(&sys, 3.into(), &BTreeSet::new()).unwrap(),
            BTreeSet::new()
        );
    }

    /// pd0 owns x (and y one edge below it); pd1 owns a and asks pd0 for
    /// everything else. The directory hop must cost exactly one.
    fn two_pds() -> System {
        let mut sys = System::new();
        for id in ["a", "x", "y"] {
            sys.add_resource_with_id(id, "page", ResourceClass::Virtual, None)
                .unwrap();
        }
        sys.add_edge(&rid("x"), &rid("y"), RelationKind::Allocation).unwrap();
        sys.add_pd_with_id("pd0", None).unwrap();
        sys.add_pd_with_id("pd1", None).unwrap();
        sys.assign_resource(&"pd0".into(), &rid("x")).unwrap();
        sys.assign_resource(&"pd1".into(), &rid("a")).unwrap();
        sys.set_creator(&"pd1".into(), &"pd0".into()).unwrap();
        sys.seal();
        sys
    }

    #[test]
    fn pd_closure_at_zero_hops_is_its_resource_set() {
        let sys = two_pds();
        let snap = Snapshot::of(&sys).unwrap();
        assert_eq!(
            snap.n_hop_resources_of_pd(0.into(), &"pd1".into()).unwrap(),
            set(&["a"])
        );
    }

    #[test]
    fn directory_hop_costs_one() {
        let sys = two_pds();
        let snap = Snapshot::of(&sys).unwrap();
        // One hop reaches the provider's owned set but not below it.
        assert_eq!(
            snap.n_hop_resources_of_pd(1.into(), &"pd1".into()).unwrap(),
            set(&["a", "x"])
        );
        assert_eq!(
            snap.n_hop_resources_of_pd(2.into(), &"pd1".into()).unwrap(),
            set(&["a", "x", "y"])
        );
    }

    #[test]
    fn directory_cycles_and_self_entries_terminate() {
        let mut sys = System::new();
        sys.add_resource_with_id("a", "page", ResourceClass::Virtual, None).unwrap();
        sys.add_pd_with_id("p", None).unwrap();
        sys.add_pd_with_id("q", None).unwrap();
        sys.assign_resource(&"q".into(), &rid("a")).unwrap();
        // p -> q -> p cycle plus a self-entry on p.
        sys.set_creator(&"p".into(), &"q".into()).unwrap();
        sys.set_creator(&"q".into(), &"p".into()).unwrap();
        sys.set_directory_entry(&"p".into(), "vas", &"p".into()).unwrap();
        sys.seal();
        let snap = Snapshot::of(&sys).unwrap();
        assert_eq!(
            snap.n_hop_resources_of_pd(HopCount::Unbounded, &"p".into()).unwrap(),
            set(&["a"])
        );
        assert_eq!(
            snap.n_hop_resources_of_pd(0.into(), &"p".into()).unwrap(),
            BTreeSet::new()
        );
    }

    #[test]
    fn shared_set_is_symmetric_under_swap() {
        let sys = two_pds();
        let snap = Snapshot::of(&sys).unwrap();
        let ab = snap
            .n_hop_shared(2.into(), 1.into(), &"pd1".into(), &"pd0".into())
            .unwrap();
        let ba = snap
            .n_hop_shared(1.into(), 2.into(), &"pd0".into(), &"pd1".into())
            .unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab, set(&["x", "y"]));
    }

    #[test]
    fn excluding_every_shared_resource_yields_isolation() {
        let sys = two_pds();
        let snap = Snapshot::of(&sys).unwrap();
        let all = ExclusionSet::resolve(&sys, sys.resources().map(|r| r.id.clone())).unwrap();
        assert!(snap
            .n_hop_isolated(
                HopCount::Unbounded,
                HopCount::Unbounded,
                &all,
                &"pd0".into(),
                &"pd1".into()
            )
            .unwrap());
        assert!(!snap
            .n_hop_isolated(
                HopCount::Unbounded,
                HopCount::Unbounded,
                &ExclusionSet::empty(),
                &"pd0".into(),
                &"pd1".into()
            )
            .unwrap());
    }

    #[test]
    fn exclusion_sets_verify_their_members() {
        let sys = two_pds();
        assert_eq!(
            ExclusionSet::resolve(&sys, [rid("ghost")]).unwrap_err(),
            Error::UnknownResource(rid("ghost"))
        );
    }

    #[test]
    fn a_pd_shares_everything_with_itself() {
        let sys = two_pds();
        let snap = Snapshot::of(&sys).unwrap();
        let verdict = snap
            .isolation_level(&"pd0".into(), &"pd0".into(), &ExclusionSet::empty())
            .unwrap();
        assert_eq!(verdict.level(), Some(0));
    }

    #[test]
    fn disconnected_pds_are_fully_isolated() {
        let mut sys = System::new();
        sys.add_resource_with_id("a", "page", ResourceClass::Virtual, None).unwrap();
        sys.add_resource_with_id("b", "page", ResourceClass::Virtual, None).unwrap();
        sys.add_pd_with_id("p", None).unwrap();
        sys.add_pd_with_id("q", None).unwrap();
        sys.assign_resource(&"p".into(), &rid("a")).unwrap();
        sys.assign_resource(&"q".into(), &rid("b")).unwrap();
        sys.seal();
        let snap = Snapshot::of(&sys).unwrap();
        let verdict = snap
            .isolation_level(&"p".into(), &"q".into(), &ExclusionSet::empty())
            .unwrap();
        assert_eq!(verdict, IsolationVerdict::FullyIsolated);
        assert!(snap
            .pd_isolated_in_system(HopCount::Unbounded, &ExclusionSet::empty(), &"p".into())
            .unwrap());
    }

    /// p owns a with a -> s; q owns b with b -> c -> s. Sharing starts at
    /// min(1, 2), and the witness must carry the reduced pair, not the
    /// saturation bound the probe used.
    #[test]
    fn witness_reports_the_minimal_pair() {
        let mut sys = System::new();
        for id in ["a", "b", "c", "s"] {
            sys.add_resource_with_id(id, "page", ResourceClass::Virtual, None).unwrap();
        }
        sys.add_edge(&rid("a"), &rid("s"), RelationKind::Mapping).unwrap();
        sys.add_edge(&rid("b"), &rid("c"), RelationKind::Allocation).unwrap();
        sys.add_edge(&rid("c"), &rid("s"), RelationKind::Mapping).unwrap();
        sys.add_pd_with_id("p", None).unwrap();
        sys.add_pd_with_id("q", None).unwrap();
        sys.assign_resource(&"p".into(), &rid("a")).unwrap();
        sys.assign_resource(&"q".into(), &rid("b")).unwrap();
        sys.seal();
        let snap = Snapshot::of(&sys).unwrap();
        let verdict = snap
            .isolation_level(&"p".into(), &"q".into(), &ExclusionSet::empty())
            .unwrap();
        match verdict {
            IsolationVerdict::SharedAt { level, witness } => {
                assert_eq!(level, 1);
                assert_eq!((witness.n1, witness.n2), (1, 2));
                assert_eq!(witness.shared, set(&["s"]));
            }
            IsolationVerdict::FullyIsolated => panic!("expected sharing"),
        }
    }

    #[test]
    fn snapshots_answer_concurrent_readers() {
        let sys = two_pds();
        let snap = Snapshot::of(&sys).unwrap();
        std::thread::scope(|scope| {
            for _ in 0..4 {
                scope.spawn(|| {
                    for n in 0..4usize {
                        let c = snap
                            .n_hop_resources_of_pd(n.into(), &"pd1".into())
                            .unwrap();
                        assert!(c.contains(&rid("a")));
                    }
                });
            }
        });
    }

    #[test]
    fn implementation_agrees_with_oracle_on_random_systems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x05_30_51);
        for _ in 0..64 {
            let mut sys = System::new();
            let n_res = rng.gen_range(1..=12);
            let ids: Vec<ResourceId> = (0..n_res)
                .map(|i| {
                    sys.add_resource_with_id(
                        format!("n{i}"),
                        "page",
                        ResourceClass::Virtual,
                        None,
                    )
                    .unwrap()
                })
                .collect();
            for _ in 0..rng.gen_range(0..=30) {
                let a = &ids[rng.gen_range(0..n_res)];
                let b = &ids[rng.gen_range(0..n_res)];
                if a != b {
                    sys.add_edge(a, b, RelationKind::Mapping).unwrap();
                }
            }
            sys.seal();
            let snap = Snapshot::of(&sys).unwrap();
            let seed: BTreeSet<ResourceId> = (0..rng.gen_range(1..=3))
                .map(|_| ids[rng.gen_range(0..n_res)].clone())
                .collect();
            for n in 0..=8usize {
                assert_eq!(
                    snap.n_hop_resources(n.into(), &seed).unwrap(),
                    oracle_closure(&sys, n.into(), &seed).unwrap()
                );
            }
        }
    }
}
