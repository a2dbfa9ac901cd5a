//! The `osmosis` command line: validate scenario files, run queries,
//! grow systems from operation scripts, and export graphs.
//!
//! Exit codes: `0` success, `1` a `--assert-isolated` check failed, `2`
//! the input file is invalid (parse error, structural violation, failing
//! script operation), `3` I/O failure, `4` command-line usage error.
//!
//! Every output is byte-deterministic for a fixed input: iteration is
//! sorted everywhere and reports embed no timestamps. Output is plain
//! UTF-8 with no color, so `NO_COLOR` is honored by construction.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::canonical::CanonicalScenario;
use crate::framework::{
    allocate_from_with_id, clone_pd_with_id, map_resource, new_pd_with_id, partition_with_ids,
    request_resource_with_id, DirectoryPolicy, IsolationFunction, ResourcePolicy,
};
use crate::model::{
    Edge, PdId, ProtectionDomain, Resource, ResourceClass, ResourceDirectory, ResourceId, System,
};
use crate::queries::{ExclusionSet, HopCount, IsolationVerdict, Snapshot};
use crate::scenario::{emit_scenario, parse_scenario, QueryExpr, QueryOutcome, ScenarioDoc, Tok};

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write_stdout(&err.to_string())
                }
                _ => {
                    eprint!("{err}");
                    4
                }
            };
        }
    };
    match execute(cli) {
        Ok((out, code)) => {
            let write_code = write_stdout(&out);
            if write_code != 0 {
                write_code
            } else {
                code
            }
        }
        Err(failure) => {
            eprintln!("osmosis: {failure}");
            failure.code()
        }
    }
}

/// Writes a command's entire stdout payload in one go. A closed pipe
/// (e.g. the output was fed to `head`) is not an error; any other write
/// failure is reported as an I/O failure.
fn write_stdout(out: &str) -> i32 {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(out.as_bytes()).and_then(|()| stdout.flush()) {
        Ok(()) => 0,
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("osmosis: cannot write output: {e}");
            Failure::Io(String::new()).code()
        }
    }
}

#[derive(Parser)]
#[command(
    name = "osmosis",
    version,
    about = "Model OS isolation as resource dependency graphs and measure it with hop-bounded closure queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print `ok` if it is structurally sound.
    Validate { file: PathBuf },

    /// Run a closure or isolation query against a scenario file.
    Query {
        file: PathBuf,

        #[command(subcommand)]
        query: QueryCommand,

        /// Emit a JSON report instead of the human-readable form.
        #[arg(long, global = true)]
        json: bool,
    },

    /// Apply a script of runtime operations to a scenario and print the
    /// grown scenario in canonical form.
    Simulate {
        file: PathBuf,
        script: PathBuf,

        /// Log every dependency edge the script adds, one line per edge,
        /// to standard error.
        #[arg(long)]
        trace: bool,
    },

    /// Export a scenario as a Graphviz digraph or a JSON document.
    Export {
        file: PathBuf,

        #[arg(long, value_enum, default_value_t = ExportFormat::Dot)]
        format: ExportFormat,
    },

    /// Print a built-in scenario (threads, isolated-stacks, processes,
    /// unikernel, vm) in canonical form.
    Scenario { name: String },
}

#[derive(Subcommand)]
enum QueryCommand {
    /// Everything a set of resources depends on within a hop budget.
    Nhop {
        /// Hop budget: an integer or `inf`.
        #[arg(long, default_value = "inf", value_parser = parse_hops)]
        n: HopCount,

        /// Seed resource ids.
        #[arg(required = true)]
        resources: Vec<String>,
    },

    /// Everything a protection domain depends on within a hop budget,
    /// including what it can obtain through its directory.
    PdNhop {
        /// Hop budget: an integer or `inf`.
        #[arg(long, default_value = "inf", value_parser = parse_hops)]
        n: HopCount,

        pd: String,
    },

    /// Resources both domains reach within their respective budgets.
    Shared {
        /// First domain's hop budget.
        #[arg(long, default_value = "inf", value_parser = parse_hops)]
        n1: HopCount,

        /// Second domain's hop budget.
        #[arg(long, default_value = "inf", value_parser = parse_hops)]
        n2: HopCount,

        pd1: String,
        pd2: String,
    },

    /// Whether two domains share nothing outside the excluded resources.
    Isolated {
        #[arg(long, default_value = "inf", value_parser = parse_hops)]
        n1: HopCount,

        #[arg(long, default_value = "inf", value_parser = parse_hops)]
        n2: HopCount,

        pd1: String,
        pd2: String,

        /// Accepted sharing: a resource id, a kind (all resources of that
        /// kind), or `all`. Repeatable.
        #[arg(long)]
        exclude: Vec<String>,

        /// Exit 1 instead of 0 when the answer is "not isolated".
        #[arg(long)]
        assert_isolated: bool,
    },

    /// Whether a domain is isolated from every other domain at once.
    PdIsolated {
        #[arg(long, default_value = "inf", value_parser = parse_hops)]
        n: HopCount,

        pd: String,

        /// Accepted sharing: a resource id, a kind, or `all`. Repeatable.
        #[arg(long)]
        exclude: Vec<String>,

        /// Exit 1 instead of 0 when the answer is "not isolated".
        #[arg(long)]
        assert_isolated: bool,
    },

    /// The smallest hop depth at which two domains share anything
    /// outside the excluded resources.
    Level {
        pd1: String,
        pd2: String,

        /// Accepted sharing: a resource id, a kind, or `all`. Repeatable.
        #[arg(long)]
        exclude: Vec<String>,

        /// Exit 1 instead of 0 unless the domains are fully isolated.
        #[arg(long)]
        assert_isolated: bool,
    },

    /// Run a `query` stanza declared in the scenario file.
    Named {
        name: String,

        /// Exit 1 instead of 0 unless the named query answers "isolated".
        #[arg(long)]
        assert_isolated: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
}

fn parse_hops(s: &str) -> Result<HopCount, String> {
    s.parse()
}

/// A command failure: what to tell the user and which exit code fits.
#[derive(Debug)]
enum Failure {
    /// Bad names or flags on the command line.
    Usage(String),
    /// The file parsed or applied cleanly up to a point, then didn't.
    Content(String),
    /// The file could not be read at all.
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 4,
            Failure::Content(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Content(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

/// Runs one subcommand, returning its stdout payload and exit code.
/// Output is returned rather than printed so that `run` can write it
/// atomically and treat a closed pipe gracefully.
fn execute(cli: Cli) -> Result<(String, i32), Failure> {
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Query { file, query, json } => cmd_query(&file, query, json),
        Command::Simulate { file, script, trace } => cmd_simulate(&file, &script, trace),
        Command::Export { file, format } => cmd_export(&file, format),
        Command::Scenario { name } => cmd_scenario(&name),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read `{}`: {e}", path.display())))
}

fn load_doc(path: &Path) -> Result<ScenarioDoc, Failure> {
    let text = read_file(path)?;
    parse_scenario(&text).map_err(|e| Failure::Content(format!("`{}`: {e}", path.display())))
}

// --- validate -----------------------------------------------------------------

fn cmd_validate(file: &Path) -> Result<(String, i32), Failure> {
    let doc = load_doc(file)?;
    let violations = doc.system.validate();
    if violations.is_empty() {
        Ok(("ok\n".to_owned(), 0))
    } else {
        for v in &violations {
            eprintln!("{v}");
        }
        Ok((String::new(), 2))
    }
}

// --- query ---------------------------------------------------------------------

/// What went into a query, echoed back in reports.
#[derive(Serialize, Default)]
struct ReportInputs {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pds: Vec<String>,
    #[serde(skip_serializing_if = "BTreeSet::is_empty")]
    resources: BTreeSet<ResourceId>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    hops: Vec<HopCount>,
    #[serde(skip_serializing_if = "BTreeSet::is_empty")]
    delta: BTreeSet<ResourceId>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ReportResult {
    Set(BTreeSet<ResourceId>),
    Bool(bool),
    Verdict(IsolationVerdict),
}

/// One query answer, reproducible byte-for-byte: the scenario field is a
/// content hash of the file's canonical form, so a drifted fixture shows
/// up as a changed report.
#[derive(Serialize)]
struct QueryReport {
    query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    scenario: String,
    inputs: ReportInputs,
    result: ReportResult,
}

fn fingerprint(doc: &ScenarioDoc) -> String {
    let digest = Sha256::digest(doc.emit().as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

fn pd_ref(sys: &System, name: &str) -> Result<PdId, Failure> {
    let id = PdId::from(name);
    if sys.contains_pd(&id) {
        Ok(id)
    } else {
        Err(Failure::Usage(format!("unknown protection domain `{name}`")))
    }
}

fn res_ref(sys: &System, name: &str) -> Result<ResourceId, Failure> {
    let id = ResourceId::from(name);
    if sys.contains_resource(&id) {
        Ok(id)
    } else {
        Err(Failure::Usage(format!("unknown resource `{name}`")))
    }
}

/// Expands `--exclude` specs: an exact resource id wins, otherwise a kind
/// expands to every resource of that kind, and `all` means everything.
fn resolve_exclude(sys: &System, specs: &[String]) -> Result<ExclusionSet, Failure> {
    let mut ids: BTreeSet<ResourceId> = BTreeSet::new();
    for spec in specs {
        if spec == "all" {
            ids.extend(sys.resources().map(|r| r.id.clone()));
            continue;
        }
        let as_id = ResourceId::from(spec.as_str());
        if sys.contains_resource(&as_id) {
            ids.insert(as_id);
            continue;
        }
        let of_kind: Vec<ResourceId> = sys
            .resources()
            .filter(|r| r.kind == *spec)
            .map(|r| r.id.clone())
            .collect();
        if of_kind.is_empty() {
            return Err(Failure::Usage(format!(
                "--exclude `{spec}` names no resource id or kind in this scenario"
            )));
        }
        ids.extend(of_kind);
    }
    Ok(ExclusionSet::from_ids(ids))
}

fn cmd_query(file: &Path, query: QueryCommand, json: bool) -> Result<(String, i32), Failure> {
    let doc = load_doc(file)?;
    let sys = &doc.system;
    let snapshot = Snapshot::of(sys).expect("parsed scenarios are sealed");
    let internal = |e: crate::Error| Failure::Content(format!("query failed: {e}"));

    let mut stanza: Option<String> = None;
    let mut assert_isolated = false;
    let (form, inputs, outcome) = match query {
        QueryCommand::Nhop { n, resources } => {
            let seeds = resources
                .iter()
                .map(|r| res_ref(sys, r))
                .collect::<Result<BTreeSet<_>, _>>()?;
            let set = snapshot.n_hop_resources(n, &seeds).map_err(internal)?;
            (
                "nhop",
                ReportInputs {
                    resources: seeds,
                    hops: vec![n],
                    ..Default::default()
                },
                QueryOutcome::Set(set),
            )
        }
        QueryCommand::PdNhop { n, pd } => {
            let pd = pd_ref(sys, &pd)?;
            let set = snapshot.n_hop_resources_of_pd(n, &pd).map_err(internal)?;
            (
                "pd-nhop",
                ReportInputs {
                    pds: vec![pd.to_string()],
                    hops: vec![n],
                    ..Default::default()
                },
                QueryOutcome::Set(set),
            )
        }
        QueryCommand::Shared { n1, n2, pd1, pd2 } => {
            let (a, b) = (pd_ref(sys, &pd1)?, pd_ref(sys, &pd2)?);
            let set = snapshot.n_hop_shared(n1, n2, &a, &b).map_err(internal)?;
            (
                "shared",
                ReportInputs {
                    pds: vec![a.to_string(), b.to_string()],
                    hops: vec![n1, n2],
                    ..Default::default()
                },
                QueryOutcome::Set(set),
            )
        }
        QueryCommand::Isolated {
            n1,
            n2,
            pd1,
            pd2,
            exclude,
            assert_isolated: assert_flag,
        } => {
            assert_isolated = assert_flag;
            let (a, b) = (pd_ref(sys, &pd1)?, pd_ref(sys, &pd2)?);
            let delta = resolve_exclude(sys, &exclude)?;
            let verdict = snapshot
                .n_hop_isolated(n1, n2, &delta, &a, &b)
                .map_err(internal)?;
            (
                "isolated",
                ReportInputs {
                    pds: vec![a.to_string(), b.to_string()],
                    hops: vec![n1, n2],
                    delta: delta.ids().cloned().collect(),
                    ..Default::default()
                },
                QueryOutcome::Bool(verdict),
            )
        }
        QueryCommand::PdIsolated {
            n,
            pd,
            exclude,
            assert_isolated: assert_flag,
        } => {
            assert_isolated = assert_flag;
            let pd = pd_ref(sys, &pd)?;
            let delta = resolve_exclude(sys, &exclude)?;
            let verdict = snapshot
                .pd_isolated_in_system(n, &delta, &pd)
                .map_err(internal)?;
            (
                "pd-isolated",
                ReportInputs {
                    pds: vec![pd.to_string()],
                    hops: vec![n],
                    delta: delta.ids().cloned().collect(),
                    ..Default::default()
                },
                QueryOutcome::Bool(verdict),
            )
        }
        QueryCommand::Level {
            pd1,
            pd2,
            exclude,
            assert_isolated: assert_flag,
        } => {
            assert_isolated = assert_flag;
            let (a, b) = (pd_ref(sys, &pd1)?, pd_ref(sys, &pd2)?);
            let delta = resolve_exclude(sys, &exclude)?;
            let verdict = snapshot.isolation_level(&a, &b, &delta).map_err(internal)?;
            (
                "level",
                ReportInputs {
                    pds: vec![a.to_string(), b.to_string()],
                    delta: delta.ids().cloned().collect(),
                    ..Default::default()
                },
                QueryOutcome::Verdict(verdict),
            )
        }
        QueryCommand::Named {
            name,
            assert_isolated: assert_flag,
        } => {
            assert_isolated = assert_flag;
            let expr = doc
                .queries
                .get(&name)
                .ok_or_else(|| Failure::Usage(format!("unknown query `{name}` in this scenario")))?;
            let outcome = expr.evaluate(&snapshot, &doc.deltas).map_err(internal)?;
            let (form, inputs) = describe_expr(expr, &doc);
            stanza = Some(name);
            (form, inputs, outcome)
        }
    };

    if assert_isolated && matches!(outcome, QueryOutcome::Set(_)) {
        return Err(Failure::Usage(
            "--assert-isolated applies to isolated, pd-isolated and level queries".to_owned(),
        ));
    }
    let holds = match &outcome {
        QueryOutcome::Set(_) => true,
        QueryOutcome::Bool(b) => *b,
        QueryOutcome::Verdict(v) => v.is_fully_isolated(),
    };

    let mut out = String::new();
    if json {
        let report = QueryReport {
            query: form.to_owned(),
            name: stanza,
            scenario: fingerprint(&doc),
            inputs,
            result: match outcome {
                QueryOutcome::Set(s) => ReportResult::Set(s),
                QueryOutcome::Bool(b) => ReportResult::Bool(b),
                QueryOutcome::Verdict(v) => ReportResult::Verdict(v),
            },
        };
        out = serde_json::to_string_pretty(&report).expect("reports always serialize");
        out.push('\n');
    } else {
        match &outcome {
            QueryOutcome::Set(set) => {
                for id in set {
                    out.push_str(id.as_str());
                    out.push('\n');
                }
            }
            QueryOutcome::Bool(b) => {
                out.push_str(if *b { "isolated\n" } else { "not isolated\n" });
            }
            QueryOutcome::Verdict(IsolationVerdict::FullyIsolated) => out.push_str("isolated\n"),
            QueryOutcome::Verdict(IsolationVerdict::SharedAt { level, witness }) => {
                use std::fmt::Write;
                writeln!(out, "{level} (witness n1={} n2={})", witness.n1, witness.n2)
                    .expect("writing to a string cannot fail");
            }
        }
    }

    Ok((out, if assert_isolated && !holds { 1 } else { 0 }))
}

/// Report metadata for a named stanza, mirroring what the flag-driven
/// forms record.
fn describe_expr(expr: &QueryExpr, doc: &ScenarioDoc) -> (&'static str, ReportInputs) {
    let delta_ids = |name: &Option<String>| -> BTreeSet<ResourceId> {
        name.as_ref()
            .and_then(|n| doc.deltas.get(n))
            .cloned()
            .unwrap_or_default()
    };
    match expr {
        QueryExpr::NHop { n, seeds } => (
            "nhop",
            ReportInputs {
                resources: seeds.clone(),
                hops: vec![*n],
                ..Default::default()
            },
        ),
        QueryExpr::PdNHop { n, pd } => (
            "pd-nhop",
            ReportInputs {
                pds: vec![pd.to_string()],
                hops: vec![*n],
                ..Default::default()
            },
        ),
        QueryExpr::Shared { n1, n2, a, b } => (
            "shared",
            ReportInputs {
                pds: vec![a.to_string(), b.to_string()],
                hops: vec![*n1, *n2],
                ..Default::default()
            },
        ),
        QueryExpr::Isolated { n1, n2, a, b, delta } => (
            "isolated",
            ReportInputs {
                pds: vec![a.to_string(), b.to_string()],
                hops: vec![*n1, *n2],
                delta: delta_ids(delta),
                ..Default::default()
            },
        ),
        QueryExpr::PdIsolated { n, pd, delta } => (
            "pd-isolated",
            ReportInputs {
                pds: vec![pd.to_string()],
                hops: vec![*n],
                delta: delta_ids(delta),
                ..Default::default()
            },
        ),
        QueryExpr::Level { a, b, delta } => (
            "level",
            ReportInputs {
                pds: vec![a.to_string(), b.to_string()],
                delta: delta_ids(delta),
                ..Default::default()
            },
        ),
    }
}

// --- simulate ------------------------------------------------------------------

fn cmd_simulate(file: &Path, script: &Path, trace: bool) -> Result<(String, i32), Failure> {
    let doc = load_doc(file)?;
    let mut sys = doc.system;
    let text = read_file(script)?;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = crate::scenario::tokenize(raw, line)
            .map_err(|e| Failure::Content(format!("`{}`: {e}", script.display())))?;
        let before: BTreeSet<Edge> = if trace {
            sys.edges().cloned().collect()
        } else {
            BTreeSet::new()
        };
        apply_script_op(&mut sys, &toks).map_err(|msg| {
            Failure::Content(format!("`{}`: line {line}: {msg}", script.display()))
        })?;
        if trace {
            for e in sys.edges() {
                if !before.contains(e) {
                    eprintln!("edge {} {} {}", e.kind, e.from, e.to);
                }
            }
        }
    }

    Ok((emit_scenario(&sys), 0))
}

/// One script line. Verbs mirror the runtime operations:
///
/// ```text
/// alloc NEW OWNER PARENT KIND
/// partition OWNER PARENT NEW...
/// request NEW REQUESTER KIND
/// map PROVIDER VIRTUAL TARGET
/// backing KIND BACKING_KIND
/// newpd ID [creator=PD] [label="..."] [dir=KIND:PD]... [RESOURCE]...
/// clone NEW SOURCE [res-default=POLICY] [dir-default=POLICY]
///       [res=KIND:POLICY]... [dir=KIND:POLICY]...
///         with resource POLICY one of share|copy|exclude
///         and directory POLICY one of keep|drop|retarget:PD
/// ```
fn apply_script_op(sys: &mut System, toks: &[(usize, Tok)]) -> Result<(), String> {
    let words: Vec<&str> = toks
        .iter()
        .filter_map(|(_, t)| match t {
            Tok::Word(w) => Some(w.as_str()),
            _ => None,
        })
        .collect();
    let verb = *words.first().ok_or("empty operation")?;
    let plain = |expected: usize| -> Result<(), String> {
        if toks.len() != words.len() {
            return Err(format!("`{verb}` takes no key=value arguments"));
        }
        if words.len() != expected + 1 {
            return Err(format!("`{verb}` takes exactly {expected} arguments"));
        }
        Ok(())
    };
    match verb {
        "alloc" => {
            plain(4)?;
            allocate_from_with_id(
                sys,
                words[1],
                &PdId::from(words[2]),
                &ResourceId::from(words[3]),
                words[4],
            )
            .map_err(|e| e.to_string())?;
        }
        "partition" => {
            if toks.len() != words.len() {
                return Err("`partition` takes no key=value arguments".to_owned());
            }
            if words.len() < 4 {
                return Err("`partition` needs an owner, a parent and at least one child id".to_owned());
            }
            let ids: Vec<ResourceId> = words[3..].iter().map(|w| ResourceId::from(*w)).collect();
            partition_with_ids(sys, &PdId::from(words[1]), &ResourceId::from(words[2]), &ids)
                .map_err(|e| e.to_string())?;
        }
        "request" => {
            plain(3)?;
            request_resource_with_id(sys, words[1], &PdId::from(words[2]), words[3])
                .map_err(|e| e.to_string())?;
        }
        "map" => {
            plain(3)?;
            map_resource(
                sys,
                &PdId::from(words[1]),
                &ResourceId::from(words[2]),
                &ResourceId::from(words[3]),
            )
            .map_err(|e| e.to_string())?;
        }
        "backing" => {
            plain(2)?;
            sys.declare_backing_kind(words[1], words[2])
                .map_err(|e| e.to_string())?;
        }
        "newpd" => script_newpd(sys, toks)?,
        "clone" => script_clone(sys, toks)?,
        other => return Err(format!("unknown operation `{other}`")),
    }
    Ok(())
}

fn script_newpd(sys: &mut System, toks: &[(usize, Tok)]) -> Result<(), String> {
    let mut id: Option<&str> = None;
    let mut resources: BTreeSet<ResourceId> = BTreeSet::new();
    let mut directory = ResourceDirectory::new();
    let mut creator: Option<PdId> = None;
    let mut label: Option<String> = None;
    for (_, tok) in &toks[1..] {
        match tok {
            Tok::Word(w) => {
                if id.is_none() {
                    id = Some(w);
                } else {
                    resources.insert(ResourceId::from(w.as_str()));
                }
            }
            Tok::Attr(k, v) if k == "creator" => creator = Some(PdId::from(v.as_str())),
            Tok::Attr(k, v) if k == "dir" => {
                let (kind, provider) = v
                    .split_once(':')
                    .ok_or_else(|| format!("dir={v}: expected dir=KIND:PD"))?;
                directory = directory.with_entry(kind, provider);
            }
            Tok::AttrStr(k, v) | Tok::Attr(k, v) if k == "label" => label = Some(v.clone()),
            other => return Err(format!("unexpected {} in newpd", other.describe())),
        }
    }
    let id = id.ok_or("newpd needs an id")?;
    new_pd_with_id(sys, id, &resources, directory, creator.as_ref(), label)
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn script_clone(sys: &mut System, toks: &[(usize, Tok)]) -> Result<(), String> {
    let mut words: Vec<&str> = Vec::new();
    let mut res_default: Option<ResourcePolicy> = None;
    let mut dir_default: Option<DirectoryPolicy> = None;
    let mut per_kind: Vec<(bool, String, String)> = Vec::new();
    for (_, tok) in &toks[1..] {
        match tok {
            Tok::Word(w) => words.push(w),
            Tok::Attr(k, v) if k == "res" => {
                let (kind, pol) = v
                    .split_once(':')
                    .ok_or_else(|| format!("res={v}: expected res=KIND:POLICY"))?;
                per_kind.push((true, kind.to_owned(), pol.to_owned()));
            }
            Tok::Attr(k, v) if k == "dir" => {
                let (kind, pol) = v
                    .split_once(':')
                    .ok_or_else(|| format!("dir={v}: expected dir=KIND:POLICY"))?;
                per_kind.push((false, kind.to_owned(), pol.to_owned()));
            }
            Tok::Attr(k, v) if k == "res-default" => res_default = Some(parse_res_policy(v)?),
            Tok::Attr(k, v) if k == "dir-default" => dir_default = Some(parse_dir_policy(v)?),
            other => return Err(format!("unexpected {} in clone", other.describe())),
        }
    }
    if words.len() != 2 {
        return Err("clone needs exactly a new id and a source id".to_owned());
    }
    let mut policy = IsolationFunction::new(
        res_default.unwrap_or(ResourcePolicy::Share),
        dir_default.unwrap_or(DirectoryPolicy::Keep),
    );
    for (is_res, kind, pol) in per_kind {
        if is_res {
            policy = policy.resource(kind, parse_res_policy(&pol)?);
        } else {
            policy = policy.directory(kind, parse_dir_policy(&pol)?);
        }
    }
    clone_pd_with_id(sys, words[0], &PdId::from(words[1]), &policy).map_err(|e| e.to_string())?;
    Ok(())
}

fn parse_res_policy(s: &str) -> Result<ResourcePolicy, String> {
    match s {
        "share" => Ok(ResourcePolicy::Share),
        "copy" => Ok(ResourcePolicy::Copy),
        "exclude" => Ok(ResourcePolicy::Exclude),
        other => Err(format!("`{other}` is not a resource policy (share, copy or exclude)")),
    }
}

fn parse_dir_policy(s: &str) -> Result<DirectoryPolicy, String> {
    match s {
        "keep" => Ok(DirectoryPolicy::Keep),
        "drop" => Ok(DirectoryPolicy::Drop),
        other => match other.split_once(':') {
            Some(("retarget", pd)) if !pd.is_empty() => {
                Ok(DirectoryPolicy::Retarget(PdId::from(pd)))
            }
            _ => Err(format!(
                "`{other}` is not a directory policy (keep, drop or retarget:PD)"
            )),
        },
    }
}

// --- export --------------------------------------------------------------------

/// The JSON view of a system: arrays sorted by id, the backing table as an
/// object, no derived data.
#[derive(Serialize)]
struct SystemExport<'a> {
    resources: Vec<&'a Resource>,
    pds: Vec<&'a ProtectionDomain>,
    edges: Vec<&'a Edge>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    backing: BTreeMap<&'a str, &'a str>,
}

fn cmd_export(file: &Path, format: ExportFormat) -> Result<(String, i32), Failure> {
    let doc = load_doc(file)?;
    let out = match format {
        ExportFormat::Dot => render_dot(&doc.system),
        ExportFormat::Json => {
            let view = SystemExport {
                resources: doc.system.resources().collect(),
                pds: doc.system.pds().collect(),
                edges: doc.system.edges().collect(),
                backing: doc.system.backing_kinds().collect(),
            };
            let mut text =
                serde_json::to_string_pretty(&view).expect("systems always serialize");
            text.push('\n');
            text
        }
    };
    Ok((out, 0))
}

fn dot_escape(s: &str) -> String {
    s.chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            '\n' => vec!['\\', 'n'],
            c => vec![c],
        })
        .collect()
}

/// Graphviz rendering: protection domains become clusters anchored by a
/// 3-D box, resources become nodes (boxes for physical, ellipses for
/// virtual) placed in their alphabetically first owner's cluster, with
/// dotted `owns` arrows for any additional owners. Dependency edges carry
/// their relation kind; directory entries and creators are dashed arrows
/// between the domain anchors.
pub fn render_dot(sys: &System) -> String {
    let mut out = String::from("digraph osmosis {\n");
    if sys.resource_count() == 0 && sys.pd_count() == 0 {
        out.push_str("}\n");
        return out;
    }
    out.push_str("  rankdir=LR;\n");

    let mut primary_owner: BTreeMap<&ResourceId, &PdId> = BTreeMap::new();
    let mut extra_owns: Vec<(&PdId, &ResourceId)> = Vec::new();
    for pd in sys.pds() {
        for r in &pd.resources {
            match primary_owner.get(r) {
                None => {
                    primary_owner.insert(r, &pd.id);
                }
                Some(_) => extra_owns.push((&pd.id, r)),
            }
        }
    }

    let node_line = |r: &Resource| -> String {
        let shape = match r.class {
            ResourceClass::Physical => "box",
            ResourceClass::Virtual => "ellipse",
        };
        let mut label = format!("{}\n({})", r.id, r.kind);
        if let Some(l) = &r.label {
            label.push('\n');
            label.push_str(l);
        }
        format!(
            "\"r_{}\" [label=\"{}\", shape={shape}];\n",
            r.id,
            dot_escape(&label)
        )
    };

    for pd in sys.pds() {
        out.push_str(&format!("  subgraph \"cluster_{}\" {{\n", pd.id));
        let cluster_label = match &pd.label {
            Some(l) => format!("{} ({l})", pd.id),
            None => pd.id.to_string(),
        };
        out.push_str(&format!("    label=\"{}\";\n", dot_escape(&cluster_label)));
        out.push_str(&format!(
            "    \"pd_{}\" [label=\"{}\", shape=box3d];\n",
            pd.id, pd.id
        ));
        for r in &pd.resources {
            if primary_owner.get(r) == Some(&&pd.id) {
                out.push_str("    ");
                out.push_str(&node_line(sys.resource(r).expect("owned resources exist")));
            }
        }
        out.push_str("  }\n");
    }

    for r in sys.resources() {
        if !primary_owner.contains_key(&r.id) {
            out.push_str("  ");
            out.push_str(&node_line(r));
        }
    }

    for e in sys.edges() {
        out.push_str(&format!(
            "  \"r_{}\" -> \"r_{}\" [label=\"{}\"];\n",
            e.from, e.to, e.kind
        ));
    }
    for (pd, r) in extra_owns {
        out.push_str(&format!(
            "  \"pd_{pd}\" -> \"r_{r}\" [style=dotted, label=\"owns\"];\n"
        ));
    }
    for pd in sys.pds() {
        for (kind, provider) in &pd.directory.entries {
            out.push_str(&format!(
                "  \"pd_{}\" -> \"pd_{provider}\" [style=dashed, label=\"dir {kind}\"];\n",
                pd.id
            ));
        }
    }
    for pd in sys.pds() {
        if let Some(creator) = &pd.directory.creator {
            out.push_str(&format!(
                "  \"pd_{}\" -> \"pd_{creator}\" [style=dashed, label=\"creator\"];\n",
                pd.id
            ));
        }
    }
    out.push_str("}\n");
    out
}

// --- scenario ------------------------------------------------------------------

fn cmd_scenario(name: &str) -> Result<(String, i32), Failure> {
    let scn = name
        .parse::<CanonicalScenario>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((emit_scenario(&scn.build()), 0))
}
