//! Reads a system from scenario text, runs the queries named inside it,
//! and shows that emitting and re-parsing the document is a fixed point.
//!
//! Run with `cargo run --example scenario_roundtrip`.

use osmosis::{emit_scenario, parse_scenario, IsolationVerdict, QueryOutcome};

const SCENARIO: &str = "\
# Two tenants on one box, meeting only in the kernel heap.
resource kheap kind=kheap class=virtual label=\"kernel heap\"
resource vas_a kind=vas class=virtual
resource vas_b kind=vas class=virtual
pd tenant_a
pd tenant_b
owns tenant_a vas_a
owns tenant_b vas_b
edge allocation vas_a kheap
edge allocation vas_b kheap

# The heap is managed sharing; anything else in common is a leak.
delta managed kheap
query leak level tenant_a tenant_b delta=managed
query contact shared 1 1 tenant_a tenant_b
";

fn main() -> osmosis::Result<()> {
    let doc = parse_scenario(SCENARIO).expect("the embedded scenario is well-formed");
    println!(
        "parsed: {} resources, {} domains, {} named queries",
        doc.system.resource_count(),
        doc.system.pd_count(),
        doc.queries.len()
    );

    for name in doc.queries.keys() {
        let outcome = doc.run_query(name)?;
        let rendered = match outcome {
            QueryOutcome::Set(ids) => ids
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", "),
            QueryOutcome::Bool(b) => (if b { "isolated" } else { "not isolated" }).to_owned(),
            QueryOutcome::Verdict(IsolationVerdict::FullyIsolated) => "isolated".to_owned(),
            QueryOutcome::Verdict(IsolationVerdict::SharedAt { level, witness }) => {
                format!("level {level} (witness {}, {})", witness.n1, witness.n2)
            }
        };
        println!("query {name}: {rendered}");
    }

    // Comments are not part of the document, but everything that matters
    // survives, deltas and queries included: emit, parse, emit again, and
    // the text stabilizes.
    let emitted = doc.emit();
    let reparsed = parse_scenario(&emitted).expect("emitted text always parses");
    assert_eq!(reparsed.emit(), emitted);
    assert_eq!(emit_scenario(&reparsed.system), emit_scenario(&doc.system));
    println!();
    println!("canonical form ({} bytes, stable under re-parsing):", emitted.len());
    print!("{emitted}");
    Ok(())
}
