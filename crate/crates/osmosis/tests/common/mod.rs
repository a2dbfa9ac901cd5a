//! Shared generators for the integration suites.
//!
//! Everything here is seed-driven and deterministic: the same seed always
//! produces the same system, so failures reported by the differential and
//! property suites can be replayed by hand.

#![allow(dead_code)] // not every suite uses every helper

use std::collections::BTreeSet;

use osmosis::{PdId, RelationKind, ResourceClass, ResourceId, System};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Resource kinds the generators draw from. Deliberately small so that
/// kind-based lookups (directories, backing declarations) collide often.
pub const KINDS: &[&str] = &[
    "vas", "stack", "heap", "kheap", "pmem", "pcpu", "cache", "code",
];

/// A sealed random system with at most 25 resources and 60 edge draws,
/// the shape the differential closure suite runs against.
pub fn random_system(seed: u64) -> System {
    random_system_sized(seed, 25, 60)
}

/// A sealed random system. `max_edges` counts draws, not edges: self-loop
/// draws are discarded and duplicate draws coalesce, so the resulting
/// graph can be sparser than the bound.
pub fn random_system_sized(seed: u64, max_res: usize, max_edges: usize) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sys = System::new();

    let n_res = rng.gen_range(1..=max_res.max(1));
    let mut resources = Vec::with_capacity(n_res);
    for i in 0..n_res {
        let kind = KINDS[rng.gen_range(0..KINDS.len())];
        let class = if rng.gen_bool(0.3) {
            ResourceClass::Physical
        } else {
            ResourceClass::Virtual
        };
        let id = sys
            .add_resource_with_id(format!("x{i}"), kind, class, None)
            .expect("generated ids are fresh and well-formed");
        resources.push(id);
    }

    let n_pds = rng.gen_range(1..=4);
    let mut pds = Vec::with_capacity(n_pds);
    for i in 0..n_pds {
        let id = sys
            .add_pd_with_id(format!("d{i}"), None)
            .expect("generated ids are fresh and well-formed");
        pds.push(id);
    }

    // Ownership is deliberately lax: a resource may be unowned or held by
    // several domains at once, both of which are legal configurations.
    for r in &resources {
        for _ in 0..rng.gen_range(0..=2) {
            let pd = &pds[rng.gen_range(0..pds.len())];
            sys.assign_resource(pd, r).expect("resource and pd exist");
        }
    }

    for pd in &pds {
        for _ in 0..rng.gen_range(0..=2) {
            let kind = KINDS[rng.gen_range(0..KINDS.len())];
            let provider = &pds[rng.gen_range(0..pds.len())];
            sys.set_directory_entry(pd, kind, provider)
                .expect("provider exists");
        }
        if rng.gen_bool(0.6) {
            let creator = &pds[rng.gen_range(0..pds.len())];
            sys.set_creator(pd, creator).expect("creator exists");
        }
    }

    if resources.len() >= 2 {
        for _ in 0..rng.gen_range(0..=max_edges) {
            let from = &resources[rng.gen_range(0..resources.len())];
            let to = &resources[rng.gen_range(0..resources.len())];
            if from == to {
                continue;
            }
            let kind = match rng.gen_range(0..3) {
                0 => RelationKind::Topology,
                1 => RelationKind::Mapping,
                _ => RelationKind::Allocation,
            };
            sys.add_edge(from, to, kind).expect("endpoints exist");
        }
    }

    sys.seal();
    sys
}

/// Picks a deterministic non-empty seed set from the system's resources.
pub fn pick_resources(sys: &System, seed: u64, max: usize) -> BTreeSet<ResourceId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let all: Vec<&ResourceId> = sys.resources().map(|r| &r.id).collect();
    let take = rng.gen_range(1..=max.min(all.len()).max(1));
    let mut picked = BTreeSet::new();
    while picked.len() < take {
        picked.insert(all[rng.gen_range(0..all.len())].clone());
    }
    picked
}

/// Picks a possibly empty resource subset to act as a permitted-sharing set.
pub fn pick_delta(sys: &System, seed: u64) -> BTreeSet<ResourceId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xde17a);
    sys.resources()
        .filter(|_| rng.gen_bool(0.3))
        .map(|r| r.id.clone())
        .collect()
}

/// All protection-domain ids of a system, in order.
pub fn pd_ids(sys: &System) -> Vec<PdId> {
    sys.pds().map(|pd| pd.id.clone()).collect()
}

/// Two domain ids drawn from the system (they may coincide in a
/// one-domain system, which the queries accept).
pub fn pick_pd_pair(sys: &System, seed: u64) -> (PdId, PdId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9d9d);
    let pds = pd_ids(sys);
    let a = pds[rng.gen_range(0..pds.len())].clone();
    let b = pds[rng.gen_range(0..pds.len())].clone();
    (a, b)
}
