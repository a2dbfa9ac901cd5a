//! Clones a process under three isolation policies and measures how far
//! the clone ends up from its source: share everything (no isolation),
//! copy everything (still meets at the shared address space), exclude
//! everything (fully isolated).
//!
//! Run with `cargo run --example clone_policies`.

use osmosis::{
    clone_pd, CanonicalScenario, DirectoryPolicy, ExclusionSet, IsolationFunction,
    IsolationVerdict, PdId, ResourcePolicy, Snapshot,
};

fn describe(verdict: &IsolationVerdict) -> String {
    match verdict {
        IsolationVerdict::FullyIsolated => "fully isolated".to_owned(),
        IsolationVerdict::SharedAt { level, witness } => format!(
            "level {level}: first meet at ({}, {}) hops over {}",
            witness.n1,
            witness.n2,
            witness
                .shared
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn main() -> osmosis::Result<()> {
    let p1 = PdId::new("p1");
    let policies: [(&str, IsolationFunction); 3] = [
        ("share everything", IsolationFunction::share_all()),
        (
            "copy everything",
            IsolationFunction::new(ResourcePolicy::Copy, DirectoryPolicy::Keep),
        ),
        (
            "exclude everything",
            IsolationFunction::new(ResourcePolicy::Exclude, DirectoryPolicy::Drop),
        ),
    ];

    for (name, policy) in policies {
        // Fresh system each round; cloning never mutates the source, but
        // the rounds should not see each other's clones either.
        let mut sys = CanonicalScenario::Processes.build();
        let twin = clone_pd(&mut sys, &p1, &policy)?;

        let snap = Snapshot::of(&sys)?;
        let verdict = snap.isolation_level(&p1, &twin, &ExclusionSet::empty())?;
        println!("{name:<20} -> {}", describe(&verdict));
    }

    println!();
    println!("A fork-style clone shares the text segment but copies the rest:");
    let mut sys = CanonicalScenario::Processes.build();
    let policy = IsolationFunction::new(ResourcePolicy::Copy, DirectoryPolicy::Keep)
        .resource("code", ResourcePolicy::Share);
    let child = clone_pd(&mut sys, &p1, &policy)?;

    let owned: Vec<String> = sys
        .pd(&child)
        .expect("the clone was just created")
        .resources
        .iter()
        .map(ToString::to_string)
        .collect();
    println!("child owns: {}", owned.join(", "));

    let snap = Snapshot::of(&sys)?;
    let verdict = snap.isolation_level(&p1, &child, &ExclusionSet::empty())?;
    println!("parent vs child: {}", describe(&verdict));
    Ok(())
}
