//! Builds a small system from scratch with the model API: declare
//! resources and domains, wire up dependencies, seal, and ask what a
//! domain can reach.
//!
//! Run with `cargo run --example build_a_system`.

use std::collections::BTreeSet;

use osmosis::{HopCount, RelationKind, ResourceClass, ResourceId, Snapshot, System};

fn list(ids: &BTreeSet<ResourceId>) -> String {
    ids.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn main() -> osmosis::Result<()> {
    let mut sys = System::new();

    // Hardware facts first: physical memory and a CPU.
    let pmem = sys.add_resource_with_id("pmem0", "pmem", ResourceClass::Physical, None)?;
    let cpu = sys.add_resource_with_id("cpu0", "pcpu", ResourceClass::Physical, None)?;

    // Software constructions on top: a kernel heap mapped onto the
    // physical memory, and an address space carved out of the heap.
    let kheap = sys.add_resource_with_id(
        "kheap0",
        "kheap",
        ResourceClass::Virtual,
        Some("kernel heap".to_owned()),
    )?;
    let vas = sys.add_resource_with_id("vas0", "vas", ResourceClass::Virtual, None)?;
    sys.add_edge(&kheap, &pmem, RelationKind::Mapping)?;
    sys.add_edge(&vas, &kheap, RelationKind::Allocation)?;

    // One domain holds everything; a second holds only the address space.
    let kernel = sys.add_pd_with_id("kernel", Some("the kernel".to_owned()))?;
    for r in [&pmem, &cpu, &kheap] {
        sys.assign_resource(&kernel, r)?;
    }
    let app = sys.add_pd_with_id("app", None)?;
    sys.assign_resource(&app, &vas)?;
    sys.set_creator(&app, &kernel)?;

    // Sealing freezes the hardware facts (physical resources and topology
    // edges); everything else stays mutable, and queries become available.
    sys.seal();
    let violations = sys.validate();
    println!(
        "system: {} resources, {} domains, {} edges, {} violations",
        sys.resource_count(),
        sys.pd_count(),
        sys.edge_count(),
        violations.len()
    );

    let snap = Snapshot::of(&sys)?;
    for hops in [0usize, 1, 2] {
        let reach = snap.n_hop_resources_of_pd(HopCount::Finite(hops), &app)?;
        println!("app reaches at budget {hops}: {}", list(&reach));
    }
    let all = snap.n_hop_resources_of_pd(HopCount::Unbounded, &app)?;
    println!("app reaches in total:    {}", list(&all));
    Ok(())
}
