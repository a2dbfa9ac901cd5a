//! Renders a scenario as Graphviz DOT on stdout: domains become
//! clusters, resources become nodes (boxes for physical, ellipses for
//! virtual), and dependency edges are labeled with their relation.
//!
//! Run with `cargo run --example export_graph`, or render directly:
//!
//! ```text
//! cargo run --example export_graph | dot -Tsvg > vm.svg
//! ```
//!
//! The same rendering is available for scenario files via
//! `osmosis export FILE --format dot`.

use osmosis::{render_dot, CanonicalScenario};

fn main() {
    let sys = CanonicalScenario::Vm.build();
    print!("{}", render_dot(&sys));
}
