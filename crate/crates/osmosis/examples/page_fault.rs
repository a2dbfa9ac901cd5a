//! Plays through a demand-style allocation: a domain with empty hands
//! requests memory, the request resolves through its creator, the
//! provider carves the resource out of a declared backing kind and hands
//! it over. Requests for a kind nobody can back fail cleanly.
//!
//! Run with `cargo run --example page_fault`.

use std::collections::BTreeSet;

use osmosis::{
    allocate_from, map_resource, new_pd, request_resource, ResourceClass, ResourceDirectory,
    System,
};

fn main() -> osmosis::Result<()> {
    let mut sys = System::new();
    let pmem = sys.add_resource_with_id("pmem0", "pmem", ResourceClass::Physical, None)?;
    let kheap = sys.add_resource_with_id("kheap0", "kheap", ResourceClass::Virtual, None)?;
    let kernel = sys.add_pd_with_id("kernel", Some("host kernel".to_owned()))?;
    sys.assign_resource(&kernel, &pmem)?;
    sys.assign_resource(&kernel, &kheap)?;

    // Address spaces are carved out of kernel heaps: requests for a `vas`
    // can be served from an owned `kheap`.
    sys.declare_backing_kind("vas", "kheap")?;
    sys.seal();

    // A fresh process owns nothing; its creator is the kernel, so
    // requests it cannot answer from its own directory fall through.
    let process = new_pd(
        &mut sys,
        &BTreeSet::new(),
        ResourceDirectory::new(),
        Some(&kernel),
    )?;
    println!("created {process} (owns nothing, creator: kernel)");

    let receipt = request_resource(&mut sys, &process, "vas")?;
    println!(
        "request vas -> kernel carved {} out of {} and handed it over",
        receipt.new_resource, receipt.parent
    );
    let owned: Vec<String> = sys
        .pd(&process)
        .expect("process exists")
        .resources
        .iter()
        .map(ToString::to_string)
        .collect();
    println!("{process} now owns: {}", owned.join(", "));

    // The kernel still owns the heap itself, so it can keep carving:
    // requests are served from the parent, not from the pieces.
    let second = request_resource(&mut sys, &process, "vas")?;
    println!(
        "second request works too: {} (also carved from {})",
        second.new_resource, second.parent
    );

    // A kind the kernel neither owns nor knows a backing for cannot be
    // served at all.
    match request_resource(&mut sys, &process, "gpu") {
        Err(e) => println!("request gpu fails: {e}"),
        Ok(_) => unreachable!("nothing in the system can back a gpu"),
    }

    // From here the process serves itself: carve a heap out of its own
    // address space, and ask the kernel to back the space with real
    // memory.
    let vas = receipt.new_resource;
    let heap = allocate_from(&mut sys, &process, &vas, "heap")?;
    println!("self-service: allocated {} from {}", heap.new_resource, vas);

    map_resource(&mut sys, &kernel, &vas, &pmem)?;
    println!("kernel mapped {vas} onto {pmem}");

    println!(
        "final state: {} resources, {} edges, {} violations",
        sys.resource_count(),
        sys.edge_count(),
        sys.validate().len()
    );
    Ok(())
}
