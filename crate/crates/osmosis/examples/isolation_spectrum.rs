//! Measures the five built-in scenarios against each other: the same
//! two-domain question ("when do you first share something?") asked of
//! threads, isolated stacks, processes, a unikernel, and a full VM.
//!
//! Run with `cargo run --example isolation_spectrum`.

use osmosis::{CanonicalScenario, ExclusionSet, IsolationVerdict, Snapshot};

fn main() -> osmosis::Result<()> {
    println!("{:<16} {:<28} {:<8} witness", "scenario", "pair", "level");

    for scenario in CanonicalScenario::ALL {
        let sys = scenario.build();
        let snap = Snapshot::of(&sys)?;
        let (a, b) = scenario.designated_pair();
        let verdict = snap.isolation_level(&a, &b, &ExclusionSet::empty())?;

        let (level, witness) = match &verdict {
            IsolationVerdict::FullyIsolated => ("inf".to_owned(), "-".to_owned()),
            IsolationVerdict::SharedAt { level, witness } => (
                level.to_string(),
                format!(
                    "({}, {}) sharing {}",
                    witness.n1,
                    witness.n2,
                    witness
                        .shared
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ),
        };
        println!(
            "{:<16} {:<28} {:<8} {witness}",
            scenario.name(),
            format!("{a} / {b}"),
            level
        );
    }

    println!();
    println!("Higher levels mean the first shared resource sits further away:");
    println!("threads share their stacks outright, processes only meet in the");
    println!("kernel, and a VM pushes the meeting point out to the host heap.");
    Ok(())
}
