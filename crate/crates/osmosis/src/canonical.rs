//! Five built-in reference systems, one per classic isolation mechanism,
//! ordered from "everything shared" to "separated by a whole machine
//! abstraction". They anchor the test suite and give the examples and CLI
//! something real to chew on.
//!
//! Each builder returns a sealed, valid [`System`] together with a
//! designated pair of domains whose isolation level tells the mechanism's
//! story:
//!
//! | scenario          | designated pair             | level |
//! |-------------------|-----------------------------|-------|
//! | `threads`         | `t1`, `t2`                  | 0     |
//! | `isolated-stacks` | `t1`, `t2`                  | 1     |
//! | `processes`       | `p1`, `p2`                  | 2     |
//! | `unikernel`       | `uni`, `native`             | 2     |
//! | `vm`              | `vm_process`, `native_process` | 2  |
//!
//! Two threads own each other's stacks, so they collide at hop 0. Giving
//! each thread only its own stack pushes the collision to the common
//! address space, one hop out. Processes with separate address spaces
//! first meet at the kernel heap and the shared cache, two hops out. The
//! unikernel and the virtual machine also level out at 2 (the *level* is
//! the smaller side's hop count), but their witnesses differ: the
//! unikernel reaches the host kernel heap in 3 hops, a process inside a
//! VM needs 4 (stack, guest address space, guest-physical memory, host
//! grant, host heap), which is the long chain behind `min(4, 2) = 2`.
//!
//! The unikernel's depth (one abstraction level above a process, one
//! below a VM) is this crate's reading of "extra levels of indirection";
//! the exact chain length is a modeling choice, not a law.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{PdId, RelationKind, ResourceClass, ResourceId, System};

/// The five reference mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CanonicalScenario {
    Threads,
    IsolatedStacks,
    Processes,
    Unikernel,
    Vm,
}

impl CanonicalScenario {
    /// All scenarios, in spectrum order (most shared first).
    pub const ALL: [CanonicalScenario; 5] = [
        CanonicalScenario::Threads,
        CanonicalScenario::IsolatedStacks,
        CanonicalScenario::Processes,
        CanonicalScenario::Unikernel,
        CanonicalScenario::Vm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalScenario::Threads => "threads",
            CanonicalScenario::IsolatedStacks => "isolated-stacks",
            CanonicalScenario::Processes => "processes",
            CanonicalScenario::Unikernel => "unikernel",
            CanonicalScenario::Vm => "vm",
        }
    }

    /// The pair of domains whose isolation level characterizes the
    /// mechanism.
    pub fn designated_pair(self) -> (PdId, PdId) {
        let (a, b) = match self {
            CanonicalScenario::Threads | CanonicalScenario::IsolatedStacks => ("t1", "t2"),
            CanonicalScenario::Processes => ("p1", "p2"),
            CanonicalScenario::Unikernel => ("uni", "native"),
            CanonicalScenario::Vm => ("vm_process", "native_process"),
        };
        (PdId::from(a), PdId::from(b))
    }

    /// Builds the scenario's system, sealed and ready to query.
    pub fn build(self) -> System {
        match self {
            CanonicalScenario::Threads => threads(true),
            CanonicalScenario::IsolatedStacks => threads(false),
            CanonicalScenario::Processes => processes(),
            CanonicalScenario::Unikernel => unikernel(),
            CanonicalScenario::Vm => vm(),
        }
    }
}

impl fmt::Display for CanonicalScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonicalScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CanonicalScenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_owned()))
    }
}

/// [`CanonicalScenario::build`] by name.
pub fn build_canonical(name: &str) -> Result<System> {
    Ok(name.parse::<CanonicalScenario>()?.build())
}

// --- the builders -------------------------------------------------------------
//
// A note on who owns what: the application-facing scenarios (processes,
// unikernel, vm) leave kernel- and hypervisor-managed resources unowned
// on purpose. A domain's closure starts from everything its directory
// providers own, so a host OS that *owned* the kernel heap would drag it
// into every client's 1-hop closure and flatten the spectrum; the heap's
// real users reach it through allocation chains instead, at the depth
// their mechanism implies. In the thread scenarios the host owns its
// resources, because hop-0/hop-1 sharing is exactly the story there.

fn base() -> System {
    System::new()
}

fn res(sys: &mut System, id: &str, kind: &str, class: ResourceClass) {
    sys.add_resource_with_id(id, kind, class, None)
        .expect("builder ids are unique and valid");
}

fn pd(sys: &mut System, id: &str, label: &str, owns: &[&str]) {
    sys.add_pd_with_id(id, Some(label.to_owned()))
        .expect("builder ids are unique and valid");
    for r in owns {
        sys.assign_resource(&PdId::from(id), &ResourceId::from(*r))
            .expect("builder resources are declared before use");
    }
}

fn edge(sys: &mut System, kind: RelationKind, from: &str, to: &str) {
    sys.add_edge(&ResourceId::from(from), &ResourceId::from(to), kind)
        .expect("builder edges reference declared resources");
}

fn dir(sys: &mut System, pd: &str, kind: &str, provider: &str) {
    sys.set_directory_entry(&PdId::from(pd), kind, &PdId::from(provider))
        .expect("builder directories reference declared domains");
}

fn creator(sys: &mut System, pd: &str, of: &str) {
    sys.set_creator(&PdId::from(pd), &PdId::from(of))
        .expect("builder creators reference declared domains");
}

/// Two threads in one address space. With `shared_stacks` both domains
/// own both stacks (level 0); without, each owns its own and they first
/// meet at the address space (level 1).
fn threads(shared_stacks: bool) -> System {
    let mut sys = base();
    res(&mut sys, "cache", "cache", ResourceClass::Physical);
    res(&mut sys, "kheap", "kheap", ResourceClass::Virtual);
    res(&mut sys, "pmem", "pmem", ResourceClass::Physical);
    res(&mut sys, "stack_a", "stack", ResourceClass::Virtual);
    res(&mut sys, "stack_b", "stack", ResourceClass::Virtual);
    res(&mut sys, "vas_app", "vas", ResourceClass::Virtual);

    edge(&mut sys, RelationKind::Allocation, "stack_a", "vas_app");
    edge(&mut sys, RelationKind::Allocation, "stack_b", "vas_app");
    edge(&mut sys, RelationKind::Allocation, "vas_app", "kheap");
    edge(&mut sys, RelationKind::Topology, "vas_app", "cache");
    edge(&mut sys, RelationKind::Mapping, "vas_app", "pmem");
    edge(&mut sys, RelationKind::Mapping, "kheap", "pmem");

    pd(&mut sys, "pd0", "host OS", &["cache", "kheap", "pmem", "vas_app"]);
    let stacks: &[&str] = &["stack_a", "stack_b"];
    for (t, own) in [
        ("t1", if shared_stacks { stacks } else { &stacks[..1] }),
        ("t2", if shared_stacks { stacks } else { &stacks[1..] }),
    ] {
        pd(&mut sys, t, if t == "t1" { "thread 1" } else { "thread 2" }, own);
        dir(&mut sys, t, "pmem", "pd0");
        dir(&mut sys, t, "vmem", "pd0");
        creator(&mut sys, t, "pd0");
    }

    sys.seal();
    sys
}

/// Two processes with separate address spaces that converge on the kernel
/// heap and the cache two hops out.
fn processes() -> System {
    let mut sys = base();
    res(&mut sys, "cache", "cache", ResourceClass::Physical);
    res(&mut sys, "kheap", "kheap", ResourceClass::Virtual);
    res(&mut sys, "pmem", "pmem", ResourceClass::Physical);
    for p in ["p1", "p2"] {
        res(&mut sys, &format!("code_{p}"), "code", ResourceClass::Virtual);
        res(&mut sys, &format!("heap_{p}"), "heap", ResourceClass::Virtual);
        res(&mut sys, &format!("stack_{p}"), "stack", ResourceClass::Virtual);
        res(&mut sys, &format!("vas_{p}"), "vas", ResourceClass::Virtual);
        res(&mut sys, &format!("ppages_{p}"), "pmem", ResourceClass::Physical);

        edge(&mut sys, RelationKind::Allocation, &format!("code_{p}"), &format!("vas_{p}"));
        edge(&mut sys, RelationKind::Allocation, &format!("heap_{p}"), &format!("vas_{p}"));
        edge(&mut sys, RelationKind::Allocation, &format!("stack_{p}"), &format!("vas_{p}"));
        edge(&mut sys, RelationKind::Allocation, &format!("vas_{p}"), "kheap");
        edge(&mut sys, RelationKind::Topology, &format!("vas_{p}"), "cache");
        edge(&mut sys, RelationKind::Mapping, &format!("vas_{p}"), &format!("ppages_{p}"));
    }
    edge(&mut sys, RelationKind::Mapping, "kheap", "pmem");

    pd(&mut sys, "pd0", "host OS", &[]);
    for (p, label) in [("p1", "process 1"), ("p2", "process 2")] {
        pd(
            &mut sys,
            p,
            label,
            &[&format!("code_{p}"), &format!("heap_{p}"), &format!("stack_{p}")]
                .map(|s| s.as_str()),
        );
        dir(&mut sys, p, "pmem", "pd0");
        dir(&mut sys, p, "vmem", "pd0");
        creator(&mut sys, p, "pd0");
    }

    sys.seal();
    sys
}

/// A unikernel managing its own address spaces above a hypervisor,
/// next to a native process on the host.
fn unikernel() -> System {
    let mut sys = base();
    res(&mut sys, "gpm_u", "gpmem", ResourceClass::Virtual);
    res(&mut sys, "hgm_u", "hgmem", ResourceClass::Virtual);
    res(&mut sys, "kheap_host", "kheap", ResourceClass::Virtual);
    res(&mut sys, "pmem", "pmem", ResourceClass::Physical);
    res(&mut sys, "stack_n", "stack", ResourceClass::Virtual);
    res(&mut sys, "stack_u", "stack", ResourceClass::Virtual);
    res(&mut sys, "vas_n", "vas", ResourceClass::Virtual);
    res(&mut sys, "vas_u", "vas", ResourceClass::Virtual);

    edge(&mut sys, RelationKind::Allocation, "stack_u", "vas_u");
    edge(&mut sys, RelationKind::Allocation, "vas_u", "gpm_u");
    edge(&mut sys, RelationKind::Allocation, "gpm_u", "hgm_u");
    edge(&mut sys, RelationKind::Allocation, "hgm_u", "kheap_host");
    edge(&mut sys, RelationKind::Allocation, "stack_n", "vas_n");
    edge(&mut sys, RelationKind::Allocation, "vas_n", "kheap_host");
    edge(&mut sys, RelationKind::Mapping, "kheap_host", "pmem");

    pd(&mut sys, "pd0", "host OS", &[]);
    pd(&mut sys, "hyp", "hypervisor", &["gpm_u"]);
    creator(&mut sys, "hyp", "pd0");
    // The unikernel is its own memory manager: address-space kinds point
    // back at itself.
    pd(&mut sys, "uni", "unikernel", &["stack_u", "vas_u"]);
    dir(&mut sys, "uni", "vas", "uni");
    dir(&mut sys, "uni", "vmem", "uni");
    creator(&mut sys, "uni", "hyp");
    pd(&mut sys, "native", "native process", &["stack_n"]);
    dir(&mut sys, "native", "pmem", "pd0");
    dir(&mut sys, "native", "vmem", "pd0");
    creator(&mut sys, "native", "pd0");

    sys.seal();
    sys
}

/// A process inside a virtual machine (four hops from the host kernel
/// heap) next to a native process (two hops from it).
fn vm() -> System {
    let mut sys = base();
    res(&mut sys, "gpm", "gpmem", ResourceClass::Virtual);
    res(&mut sys, "hgm", "hgmem", ResourceClass::Virtual);
    res(&mut sys, "kheap_host", "kheap", ResourceClass::Virtual);
    res(&mut sys, "pmem", "pmem", ResourceClass::Physical);
    res(&mut sys, "stack_n", "stack", ResourceClass::Virtual);
    res(&mut sys, "stack_v", "stack", ResourceClass::Virtual);
    res(&mut sys, "vas_g", "vas", ResourceClass::Virtual);
    res(&mut sys, "vas_n", "vas", ResourceClass::Virtual);

    edge(&mut sys, RelationKind::Allocation, "stack_v", "vas_g");
    edge(&mut sys, RelationKind::Allocation, "vas_g", "gpm");
    edge(&mut sys, RelationKind::Allocation, "gpm", "hgm");
    edge(&mut sys, RelationKind::Allocation, "hgm", "kheap_host");
    edge(&mut sys, RelationKind::Allocation, "stack_n", "vas_n");
    edge(&mut sys, RelationKind::Allocation, "vas_n", "kheap_host");
    edge(&mut sys, RelationKind::Mapping, "kheap_host", "pmem");

    pd(&mut sys, "pd0", "host OS", &[]);
    pd(&mut sys, "hyp", "hypervisor", &["gpm"]);
    creator(&mut sys, "hyp", "pd0");
    pd(&mut sys, "guest_os", "guest OS", &["vas_g"]);
    dir(&mut sys, "guest_os", "gpmem", "hyp");
    creator(&mut sys, "guest_os", "hyp");
    pd(&mut sys, "vm_process", "process in the VM", &["stack_v"]);
    dir(&mut sys, "vm_process", "vmem", "guest_os");
    creator(&mut sys, "vm_process", "guest_os");
    pd(&mut sys, "native_process", "native process", &["stack_n"]);
    dir(&mut sys, "native_process", "pmem", "pd0");
    dir(&mut sys, "native_process", "vmem", "pd0");
    creator(&mut sys, "native_process", "pd0");

    sys.seal();
    sys
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queries::{ExclusionSet, HopCount, IsolationVerdict, Snapshot};
    use std::collections::BTreeSet;

    fn ids(names: &[&str]) -> BTreeSet<ResourceId> {
        names.iter().map(|s| ResourceId::from(*s)).collect()
    }

    fn level_of(scn: CanonicalScenario) -> IsolationVerdict {
        let sys = scn.build();
        let (a, b) = scn.designated_pair();
        Snapshot::of(&sys)
            .unwrap()
            .isolation_level(&a, &b, &ExclusionSet::empty())
            .unwrap()
    }

    #[test]
    fn every_scenario_is_sealed_valid_and_parses_by_name() {
        for scn in CanonicalScenario::ALL {
            let sys = scn.build();
            assert!(sys.is_sealed(), "{scn} must arrive sealed");
            assert!(sys.validate().is_empty(), "{scn} must validate clean");
            assert_eq!(scn.name().parse::<CanonicalScenario>().unwrap(), scn);
            let (a, b) = scn.designated_pair();
            assert!(sys.contains_pd(&a) && sys.contains_pd(&b));
        }
        assert!(matches!(
            "chroot".parse::<CanonicalScenario>(),
            Err(Error::UnknownScenario(_))
        ));
        assert!(build_canonical("vm").is_ok());
    }

    #[test]
    fn threads_collide_at_hop_zero_on_the_stacks() {
        match level_of(CanonicalScenario::Threads) {
            IsolationVerdict::SharedAt { level, witness } => {
                assert_eq!(level, 0);
                assert_eq!((witness.n1, witness.n2), (0, 0));
                assert_eq!(witness.shared, ids(&["stack_a", "stack_b"]));
            }
            v => panic!("threads must share, got {v:?}"),
        }
    }

    #[test]
    fn isolated_stacks_first_meet_at_the_address_space() {
        match level_of(CanonicalScenario::IsolatedStacks) {
            IsolationVerdict::SharedAt { level, witness } => {
                assert_eq!(level, 1);
                assert_eq!((witness.n1, witness.n2), (1, 1));
                assert_eq!(witness.shared, ids(&["cache", "kheap", "pmem", "vas_app"]));
            }
            v => panic!("isolated stacks must share, got {v:?}"),
        }
    }

    #[test]
    fn processes_first_meet_at_the_kernel_two_hops_out() {
        match level_of(CanonicalScenario::Processes) {
            IsolationVerdict::SharedAt { level, witness } => {
                assert_eq!(level, 2);
                assert_eq!((witness.n1, witness.n2), (2, 2));
                assert_eq!(witness.shared, ids(&["cache", "kheap"]));
            }
            v => panic!("processes must share, got {v:?}"),
        }
    }

    #[test]
    fn the_unikernel_needs_three_hops_to_the_host_heap() {
        match level_of(CanonicalScenario::Unikernel) {
            IsolationVerdict::SharedAt { level, witness } => {
                assert_eq!(level, 2);
                assert_eq!((witness.n1, witness.n2), (3, 2));
                assert_eq!(witness.shared, ids(&["kheap_host"]));
            }
            v => panic!("unikernel must share, got {v:?}"),
        }
    }

    #[test]
    fn the_vm_needs_four_hops_and_levels_out_at_two() {
        match level_of(CanonicalScenario::Vm) {
            IsolationVerdict::SharedAt { level, witness } => {
                assert_eq!(level, 2);
                assert_eq!((witness.n1, witness.n2), (4, 2));
                assert_eq!(witness.shared, ids(&["kheap_host"]));
            }
            v => panic!("vm must share, got {v:?}"),
        }
    }

    #[test]
    fn a_threads_domain_sees_the_whole_host_at_one_hop() {
        let sys = CanonicalScenario::Threads.build();
        let snap = Snapshot::of(&sys).unwrap();
        let hop1 = snap
            .n_hop_resources_of_pd(HopCount::Finite(1), &PdId::from("t1"))
            .unwrap();
        assert_eq!(
            hop1,
            ids(&["cache", "kheap", "pmem", "stack_a", "stack_b", "vas_app"]),
            "own and sibling stacks, their address space, and everything the host owns"
        );
    }

    #[test]
    fn a_process_stack_reaches_only_its_vas_in_one_hop() {
        let sys = CanonicalScenario::Processes.build();
        let snap = Snapshot::of(&sys).unwrap();
        let seed = ids(&["stack_p1"]);
        let hop1 = snap.n_hop_resources(HopCount::Finite(1), &seed).unwrap();
        assert_eq!(hop1, ids(&["stack_p1", "vas_p1"]));

        let hop2 = snap.n_hop_resources(HopCount::Finite(2), &seed).unwrap();
        for further in ["kheap", "cache", "ppages_p1"] {
            assert!(hop2.contains(&ResourceId::from(further)), "hop 2 reaches {further}");
        }
    }

    #[test]
    fn processes_share_nothing_at_hop_zero() {
        let sys = CanonicalScenario::Processes.build();
        let snap = Snapshot::of(&sys).unwrap();
        let shared = snap
            .n_hop_shared(
                HopCount::Finite(0),
                HopCount::Finite(0),
                &PdId::from("p1"),
                &PdId::from("p2"),
            )
            .unwrap();
        assert!(shared.is_empty(), "separate address spaces, separate everything at hop 0");
    }

    #[test]
    fn the_spectrum_is_ordered() {
        let levels: Vec<usize> = CanonicalScenario::ALL
            .into_iter()
            .map(|scn| level_of(scn).level().expect("every pair eventually shares"))
            .collect();
        assert_eq!(levels, [0, 1, 2, 2, 2]);
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
    }
}
