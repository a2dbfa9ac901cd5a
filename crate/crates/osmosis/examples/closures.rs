//! Walks the closure queries on the processes scenario: raw resource
//! closures hop by hop, domain closures that account for directory
//! indirection, and the shared set of two domains.
//!
//! Run with `cargo run --example closures`.

use std::collections::BTreeSet;

use osmosis::{CanonicalScenario, HopCount, PdId, ResourceId, Snapshot};

fn list(ids: &BTreeSet<ResourceId>) -> String {
    ids.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn main() -> osmosis::Result<()> {
    let sys = CanonicalScenario::Processes.build();
    let snap = Snapshot::of(&sys)?;

    // Raw closure: start from one stack and widen the budget until the
    // set stops growing.
    let stack: BTreeSet<ResourceId> = [ResourceId::new("stack_p1")].into();
    println!("resource closure from stack_p1:");
    let mut previous = BTreeSet::new();
    for hops in 0.. {
        let reach = snap.n_hop_resources(HopCount::Finite(hops), &stack)?;
        if reach == previous {
            println!("  (saturated after {} hops)", hops - 1);
            break;
        }
        println!("  {hops} hops: {}", list(&reach));
        previous = reach;
    }

    // Domain closure: what process 1 can touch, counting one extra hop
    // for each directory lookup on the way.
    let p1 = PdId::new("p1");
    println!();
    println!("domain closure of p1:");
    for hops in [0usize, 1, 2, 3] {
        let reach = snap.n_hop_resources_of_pd(HopCount::Finite(hops), &p1)?;
        println!("  {hops} hops: {}", list(&reach));
    }

    // Shared set: where the two processes overlap, per-side budgets.
    let p2 = PdId::new("p2");
    println!();
    println!("shared between p1 and p2:");
    for (n1, n2) in [(0usize, 0usize), (1, 1), (2, 2), (3, 3)] {
        let shared = snap.n_hop_shared(HopCount::Finite(n1), HopCount::Finite(n2), &p1, &p2)?;
        let rendering = if shared.is_empty() {
            "nothing".to_owned()
        } else {
            list(&shared)
        };
        println!("  ({n1}, {n2}): {rendering}");
    }
    Ok(())
}
