//! Black-box tests of the `osmosis` binary: exit codes, pinned output
//! strings, and agreement with the golden files under `tests/golden/`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn golden_str(name: &str) -> String {
    std::fs::read_to_string(golden(name)).expect("golden files ship with the tests")
}

fn osmosis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osmosis"))
        .args(args)
        .output()
        .expect("the osmosis binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("osmosis prints UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("osmosis prints UTF-8")
}

fn write_temp(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).expect("temp dir is writable");
    path
}

#[test]
fn scenario_subcommand_matches_the_golden_files() {
    for name in ["threads", "isolated-stacks", "processes", "unikernel", "vm"] {
        let out = osmosis(&["scenario", name]);
        assert_eq!(out.status.code(), Some(0), "scenario {name}");
        assert_eq!(
            stdout_of(&out),
            golden_str(&format!("{name}.scn")),
            "scenario {name} drifted from its golden file"
        );
    }
}

#[test]
fn unknown_scenario_names_are_usage_errors() {
    let out = osmosis(&["scenario", "microkernel"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_of(&out).contains("unknown scenario"));
}

#[test]
fn validate_prints_ok_for_well_formed_scenarios() {
    let out = osmosis(&["validate", golden("vm.scn").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "ok\n");
}

#[test]
fn level_query_prints_the_level_and_minimal_witness() {
    let vm = golden("vm.scn");
    let out = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "level",
        "vm_process",
        "native_process",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "2 (witness n1=4 n2=2)\n");
}

#[test]
fn excluding_everything_reads_as_isolated() {
    let vm = golden("vm.scn");
    let out = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "level",
        "vm_process",
        "native_process",
        "--exclude",
        "all",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "isolated\n");
}

#[test]
fn assert_isolated_gates_the_exit_code() {
    let vm = golden("vm.scn");
    let sharing = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "level",
        "vm_process",
        "native_process",
        "--assert-isolated",
    ]);
    assert_eq!(sharing.status.code(), Some(1));
    assert_eq!(stdout_of(&sharing), "2 (witness n1=4 n2=2)\n");

    // Excusing the kernel heap alone is not enough: the physical memory
    // behind it still leaks one hop further out.
    let excused = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "level",
        "vm_process",
        "native_process",
        "--exclude",
        "kheap_host",
        "--exclude",
        "pmem",
        "--assert-isolated",
    ]);
    assert_eq!(excused.status.code(), Some(0));
    assert_eq!(stdout_of(&excused), "isolated\n");
}

#[test]
fn set_queries_print_one_id_per_line() {
    let processes = golden("processes.scn");
    let out = osmosis(&[
        "query",
        processes.to_str().unwrap(),
        "nhop",
        "--n",
        "1",
        "stack_p1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "stack_p1\nvas_p1\n");
}

#[test]
fn hop_budgets_default_to_unbounded() {
    let processes = golden("processes.scn");
    let bounded = osmosis(&[
        "query",
        processes.to_str().unwrap(),
        "pd-nhop",
        "p1",
        "--n",
        "inf",
    ]);
    let default = osmosis(&["query", processes.to_str().unwrap(), "pd-nhop", "p1"]);
    assert_eq!(default.status.code(), Some(0));
    assert_eq!(stdout_of(&default), stdout_of(&bounded));
    assert!(stdout_of(&default).contains("kheap\n"));
}

#[test]
fn shared_sets_respect_per_side_budgets() {
    let processes = golden("processes.scn");
    let out = osmosis(&[
        "query",
        processes.to_str().unwrap(),
        "shared",
        "p1",
        "p2",
        "--n1",
        "2",
        "--n2",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "cache\nkheap\n");
}

#[test]
fn exclusions_cover_isolation_checks() {
    let processes = golden("processes.scn");
    let base: &[&str] = &[
        "query",
        processes.to_str().unwrap(),
        "isolated",
        "p1",
        "p2",
        "--n1",
        "2",
        "--n2",
        "2",
    ];

    let leaking = osmosis(base);
    assert_eq!(leaking.status.code(), Some(0));
    assert_eq!(stdout_of(&leaking), "not isolated\n");

    let mut excused = base.to_vec();
    excused.extend(["--exclude", "kheap", "--exclude", "cache"]);
    let excused = osmosis(&excused);
    assert_eq!(excused.status.code(), Some(0));
    assert_eq!(stdout_of(&excused), "isolated\n");
}

#[test]
fn exclude_expands_kinds_to_every_member() {
    let threads = golden("threads.scn");
    // Excluding the `stack` kind excuses both shared stacks, so the first
    // leak moves out to the address space one hop away.
    let by_kind = osmosis(&[
        "query",
        threads.to_str().unwrap(),
        "level",
        "t1",
        "t2",
        "--exclude",
        "stack",
    ]);
    assert_eq!(by_kind.status.code(), Some(0));
    assert_eq!(stdout_of(&by_kind), "1 (witness n1=1 n2=1)\n");

    // Excluding a single stack by id leaves the other one shared at zero
    // hops.
    let by_id = osmosis(&[
        "query",
        threads.to_str().unwrap(),
        "level",
        "t1",
        "t2",
        "--exclude",
        "stack_a",
    ]);
    assert_eq!(by_id.status.code(), Some(0));
    assert_eq!(stdout_of(&by_id), "0 (witness n1=0 n2=0)\n");
}

#[test]
fn json_reports_carry_a_scenario_fingerprint() {
    let vm = golden("vm.scn");
    let out = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "--json",
        "level",
        "vm_process",
        "native_process",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&stdout_of(&out)).expect("reports are valid JSON");

    assert_eq!(report["query"], "level");
    let fingerprint = report["scenario"].as_str().unwrap();
    assert!(fingerprint.starts_with("sha256:"));
    assert_eq!(fingerprint.len(), "sha256:".len() + 64);
    assert_eq!(report["inputs"]["pds"][0], "vm_process");
    assert_eq!(report["result"]["level"], 2);
    assert_eq!(report["result"]["witness"]["n1"], 4);
    assert_eq!(report["result"]["witness"]["n2"], 2);
    assert_eq!(report["result"]["witness"]["shared"][0], "kheap_host");
}

#[test]
fn fully_isolated_serializes_as_the_word_isolated() {
    let vm = golden("vm.scn");
    let out = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "--json",
        "level",
        "vm_process",
        "native_process",
        "--exclude",
        "all",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&stdout_of(&out)).expect("reports are valid JSON");
    assert_eq!(report["result"], "isolated");
}

#[test]
fn named_queries_run_from_the_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(
        &dir,
        "named.scn",
        "resource a kind=vas class=virtual\n\
         resource b kind=stack class=virtual\n\
         pd p label=\"left\"\n\
         pd q label=\"right\"\n\
         owns p a\n\
         owns q b\n\
         edge allocation b a\n\
         delta din a\n\
         query leak level p q delta=din\n\
         query reach nhop 1 b\n",
    );

    let leak = osmosis(&[
        "query",
        file.to_str().unwrap(),
        "named",
        "leak",
        "--assert-isolated",
    ]);
    assert_eq!(leak.status.code(), Some(0));
    assert_eq!(stdout_of(&leak), "isolated\n");

    let reach = osmosis(&["query", file.to_str().unwrap(), "named", "reach"]);
    assert_eq!(reach.status.code(), Some(0));
    assert_eq!(stdout_of(&reach), "a\nb\n");

    let missing = osmosis(&["query", file.to_str().unwrap(), "named", "absent"]);
    assert_eq!(missing.status.code(), Some(4));
    assert!(stderr_of(&missing).contains("unknown query"));
}

#[test]
fn malformed_scenarios_are_content_errors() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(&dir, "broken.scn", "resource ???\n");
    let out = osmosis(&["validate", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("line 1"));

    let forward = write_temp(&dir, "forward.scn", "owns p a\n");
    let out = osmosis(&["validate", forward.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("resource `a` does not exist"));
}

#[test]
fn missing_files_are_io_errors() {
    let out = osmosis(&["validate", "/nonexistent/system.scn"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("cannot read"));
}

#[test]
fn bad_invocations_are_usage_errors() {
    let vm = golden("vm.scn");

    let unknown_pd = osmosis(&["query", vm.to_str().unwrap(), "pd-nhop", "nope"]);
    assert_eq!(unknown_pd.status.code(), Some(4));
    assert!(stderr_of(&unknown_pd).contains("unknown protection domain `nope`"));

    let bad_hops = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "pd-nhop",
        "hyp",
        "--n",
        "lots",
    ]);
    assert_eq!(bad_hops.status.code(), Some(4));

    let unknown_subcommand = osmosis(&["defragment"]);
    assert_eq!(unknown_subcommand.status.code(), Some(4));

    let assert_on_set = osmosis(&[
        "query",
        vm.to_str().unwrap(),
        "nhop",
        "pmem",
        "--assert-isolated",
    ]);
    assert_eq!(assert_on_set.status.code(), Some(4));
}

#[test]
fn help_and_version_exit_cleanly() {
    let help = osmosis(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout_of(&help).contains("Usage"));

    let version = osmosis(&["--version"]);
    assert_eq!(version.status.code(), Some(0));
    assert!(stdout_of(&version).starts_with("osmosis"));
}

#[test]
fn simulate_applies_scripts_and_emits_the_result() {
    let out = osmosis(&[
        "simulate",
        golden("host.scn").to_str().unwrap(),
        golden("listing2.sim").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let emitted = stdout_of(&out);
    assert!(emitted.contains("pd p1 label=\"process 1\"\n"));
    assert!(emitted.contains("owns p1 code1 heap1 stack1 vcpu1\n"));
    assert!(emitted.contains("edge allocation vas1 kheap0\n"));
    assert!(emitted.contains("dir p1 vmem pd0\n"));
    assert!(emitted.contains("creator p1 pd0\n"));
}

#[test]
fn simulate_trace_lists_each_new_edge() {
    let out = osmosis(&[
        "simulate",
        golden("host.scn").to_str().unwrap(),
        golden("listing2.sim").to_str().unwrap(),
        "--trace",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace = stderr_of(&out);
    assert!(trace.contains("edge allocation vas1 kheap0"));
    assert!(trace.contains("edge allocation stack1 vas1"));
    assert!(trace.contains("edge allocation vcpu1 cpu0"));
}

#[test]
fn simulate_failures_name_the_script_line() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_temp(
        &dir,
        "bad.sim",
        "alloc vas1 pd0 kheap0 vas\nalloc oops pd0 missing heap\n",
    );
    let out = osmosis(&[
        "simulate",
        golden("host.scn").to_str().unwrap(),
        script.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("line 2"));
    assert!(err.contains("missing"));
}

#[test]
fn export_dot_matches_the_golden_rendering() {
    let out = osmosis(&[
        "export",
        golden("threads.scn").to_str().unwrap(),
        "--format",
        "dot",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden_str("threads.dot"));
}

#[test]
fn export_dot_of_an_empty_system_is_the_bare_digraph() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(&dir, "empty.scn", "");
    let out = osmosis(&["export", file.to_str().unwrap(), "--format", "dot"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "digraph osmosis {\n}\n");
}

#[test]
fn export_json_lists_the_whole_system() {
    let out = osmosis(&[
        "export",
        golden("vm.scn").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let view: serde_json::Value =
        serde_json::from_str(&stdout_of(&out)).expect("exports are valid JSON");
    assert_eq!(view["resources"].as_array().unwrap().len(), 8);
    assert_eq!(view["pds"].as_array().unwrap().len(), 5);
    assert_eq!(view["edges"].as_array().unwrap().len(), 7);
    assert_eq!(view["resources"][3]["id"], "pmem");
    assert_eq!(view["resources"][3]["class"], "physical");
}

#[test]
fn parse_then_emit_is_a_fixed_point_through_the_cli() {
    // simulate with an empty script parses and re-emits a scenario, so a
    // canonical file must come back byte-identical.
    let dir = tempfile::tempdir().unwrap();
    let noop = write_temp(&dir, "noop.sim", "# nothing to do\n");
    for name in ["threads", "isolated-stacks", "processes", "unikernel", "vm"] {
        let file = golden(&format!("{name}.scn"));
        let out = osmosis(&["simulate", file.to_str().unwrap(), noop.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "simulate {name}");
        assert_eq!(
            stdout_of(&out),
            golden_str(&format!("{name}.scn")),
            "round-trip of {name} changed the text"
        );
    }
}
