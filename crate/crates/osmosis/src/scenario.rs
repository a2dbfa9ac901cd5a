//! A line-oriented text format for describing systems, plus named
//! exclusion sets and named queries that travel with them.
//!
//! The format is deliberately flat so golden files diff well:
//!
//! ```text
//! # a stack carved from an address space
//! resource vas0 kind=vas class=virtual label="host address space"
//! resource stk0 kind=stack class=virtual
//! pd p0 label="the process"
//! owns p0 stk0
//! edge allocation stk0 vas0
//! dir p0 vmem p0
//! creator p0 p0
//! backing vmem vas
//! delta accepted vas0
//! query q0 level p0 p0 delta=accepted
//! ```
//!
//! Rules: one declaration per line; `#` starts a full-line comment; blank
//! lines are ignored; every name must be declared before it is referenced;
//! re-declaring a name is an error (except `owns`, which is idempotent).
//! Identifiers and kind words use `[A-Za-z0-9_.-]+`. Labels are
//! double-quoted with `\\`, `\"` and `\n` escapes.
//!
//! [`parse_scenario`] returns a **sealed** system: scenario files describe
//! systems at rest, ready to be queried or grown through the runtime
//! operations. [`emit_scenario`] writes the canonical form: groups in a
//! fixed order, each group sorted, so parse-then-emit is a fixed point and
//! emitted text is byte-stable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{valid_word, PdId, RelationKind, ResourceClass, ResourceId, System};
use crate::queries::{ExclusionSet, HopCount, IsolationVerdict, Snapshot};

/// A parsed scenario: the sealed system plus its named exclusion sets and
/// named queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioDoc {
    pub system: System,
    pub deltas: BTreeMap<String, BTreeSet<ResourceId>>,
    pub queries: BTreeMap<String, QueryExpr>,
}

/// One query stanza: what to ask of the system, with hop bounds and an
/// optional reference to a named exclusion set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryExpr {
    NHop {
        n: HopCount,
        seeds: BTreeSet<ResourceId>,
    },
    PdNHop {
        n: HopCount,
        pd: PdId,
    },
    Shared {
        n1: HopCount,
        n2: HopCount,
        a: PdId,
        b: PdId,
    },
    Isolated {
        n1: HopCount,
        n2: HopCount,
        a: PdId,
        b: PdId,
        delta: Option<String>,
    },
    PdIsolated {
        n: HopCount,
        pd: PdId,
        delta: Option<String>,
    },
    Level {
        a: PdId,
        b: PdId,
        delta: Option<String>,
    },
}

/// What a query evaluates to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryOutcome {
    Set(BTreeSet<ResourceId>),
    Bool(bool),
    Verdict(IsolationVerdict),
}

/// A diagnostic pointing at the offending line and column (both 1-based).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            col,
            message: message.into(),
        }
    }
}

impl ScenarioDoc {
    /// Canonical text for the whole document: the system, then `delta`
    /// lines, then `query` lines.
    pub fn emit(&self) -> String {
        let mut out = emit_scenario(&self.system);
        for (name, ids) in &self.deltas {
            out.push_str(&format!("delta {name} {}\n", join_ids(ids)));
        }
        for (name, query) in &self.queries {
            out.push_str(&format!("query {name} {query}\n"));
        }
        out
    }

    /// Runs a named query against the document's own system.
    pub fn run_query(&self, name: &str) -> crate::Result<QueryOutcome> {
        let query = self
            .queries
            .get(name)
            .ok_or_else(|| crate::Error::UnknownQuery(name.to_owned()))?;
        let snapshot = Snapshot::of(&self.system)?;
        query.evaluate(&snapshot, &self.deltas)
    }
}

impl QueryExpr {
    /// Evaluates the query on a snapshot, resolving any named exclusion
    /// set against `deltas`.
    pub fn evaluate(
        &self,
        snapshot: &Snapshot,
        deltas: &BTreeMap<String, BTreeSet<ResourceId>>,
    ) -> crate::Result<QueryOutcome> {
        let resolve = |name: &Option<String>| -> crate::Result<ExclusionSet> {
            match name {
                None => Ok(ExclusionSet::empty()),
                Some(n) => {
                    let ids = deltas
                        .get(n)
                        .ok_or_else(|| crate::Error::UnknownDelta(n.clone()))?;
                    Ok(ExclusionSet::from_ids(ids.iter().cloned()))
                }
            }
        };
        Ok(match self {
            QueryExpr::NHop { n, seeds } => {
                QueryOutcome::Set(snapshot.n_hop_resources(*n, seeds)?)
            }
            QueryExpr::PdNHop { n, pd } => {
                QueryOutcome::Set(snapshot.n_hop_resources_of_pd(*n, pd)?)
            }
            QueryExpr::Shared { n1, n2, a, b } => {
                QueryOutcome::Set(snapshot.n_hop_shared(*n1, *n2, a, b)?)
            }
            QueryExpr::Isolated { n1, n2, a, b, delta } => {
                QueryOutcome::Bool(snapshot.n_hop_isolated(*n1, *n2, &resolve(delta)?, a, b)?)
            }
            QueryExpr::PdIsolated { n, pd, delta } => {
                QueryOutcome::Bool(snapshot.pd_isolated_in_system(*n, &resolve(delta)?, pd)?)
            }
            QueryExpr::Level { a, b, delta } => {
                QueryOutcome::Verdict(snapshot.isolation_level(a, b, &resolve(delta)?)?)
            }
        })
    }
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let delta_suffix = |d: &Option<String>| match d {
            Some(name) => format!(" delta={name}"),
            None => String::new(),
        };
        match self {
            QueryExpr::NHop { n, seeds } => write!(f, "nhop {n} {}", join_ids(seeds)),
            QueryExpr::PdNHop { n, pd } => write!(f, "pd-nhop {n} {pd}"),
            QueryExpr::Shared { n1, n2, a, b } => write!(f, "shared {n1} {n2} {a} {b}"),
            QueryExpr::Isolated { n1, n2, a, b, delta } => {
                write!(f, "isolated {n1} {n2} {a} {b}{}", delta_suffix(delta))
            }
            QueryExpr::PdIsolated { n, pd, delta } => {
                write!(f, "pd-isolated {n} {pd}{}", delta_suffix(delta))
            }
            QueryExpr::Level { a, b, delta } => {
                write!(f, "level {a} {b}{}", delta_suffix(delta))
            }
        }
    }
}

// --- parsing -----------------------------------------------------------------

/// One token with the 1-based column it starts at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// A bare word.
    Word(String),
    /// `key=value` with a bare-word value.
    Attr(String, String),
    /// `key="value"` with the escapes already decoded.
    AttrStr(String, String),
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Attr(k, v) => format!("`{k}={v}`"),
            Tok::AttrStr(k, _) => format!("`{k}=\"...\"`"),
        }
    }
}

pub(crate) fn tokenize(raw: &str, line: usize) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let col = start + 1;
        let mut word = String::new();
        let mut attr: Option<(String, Tok)> = None;
        while i < chars.len() && !chars[i].is_whitespace() {
            if chars[i] == '=' {
                let key = std::mem::take(&mut word);
                if key.is_empty() {
                    return Err(ParseError::new(line, col, "attribute with empty key"));
                }
                i += 1;
                if i < chars.len() && chars[i] == '"' {
                    i += 1;
                    let mut value = String::new();
                    loop {
                        match chars.get(i) {
                            None => {
                                return Err(ParseError::new(
                                    line,
                                    col,
                                    "unterminated string literal",
                                ))
                            }
                            Some('"') => {
                                i += 1;
                                break;
                            }
                            Some('\\') => {
                                i += 1;
                                match chars.get(i) {
                                    Some('\\') => value.push('\\'),
                                    Some('"') => value.push('"'),
                                    Some('n') => value.push('\n'),
                                    other => {
                                        return Err(ParseError::new(
                                            line,
                                            col,
                                            format!(
                                                "unknown escape `\\{}`",
                                                other.map(|c| c.to_string()).unwrap_or_default()
                                            ),
                                        ))
                                    }
                                }
                                i += 1;
                            }
                            Some(c) => {
                                value.push(*c);
                                i += 1;
                            }
                        }
                    }
                    if i < chars.len() && !chars[i].is_whitespace() {
                        return Err(ParseError::new(
                            line,
                            col,
                            "text after closing quote",
                        ));
                    }
                    attr = Some((key.clone(), Tok::AttrStr(key, value)));
                } else {
                    let mut value = String::new();
                    while i < chars.len() && !chars[i].is_whitespace() {
                        value.push(chars[i]);
                        i += 1;
                    }
                    attr = Some((key.clone(), Tok::Attr(key, value)));
                }
                break;
            }
            word.push(chars[i]);
            i += 1;
        }
        match attr {
            Some((_, tok)) => toks.push((col, tok)),
            None => toks.push((col, Tok::Word(word))),
        }
    }
    Ok(toks)
}

/// Incremental parser state; each declaration line updates it.
struct Parser {
    sys: System,
    deltas: BTreeMap<String, BTreeSet<ResourceId>>,
    queries: BTreeMap<String, QueryExpr>,
}

/// Parses scenario text into a sealed system plus named deltas and queries.
pub fn parse_scenario(text: &str) -> Result<ScenarioDoc, ParseError> {
    let mut p = Parser {
        sys: System::new(),
        deltas: BTreeMap::new(),
        queries: BTreeMap::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks = tokenize(raw, line)?;
        p.declaration(line, &toks)?;
    }
    p.sys.seal();
    Ok(ScenarioDoc {
        system: p.sys,
        deltas: p.deltas,
        queries: p.queries,
    })
}

impl Parser {
    fn declaration(&mut self, line: usize, toks: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (col, keyword) = match &toks[0] {
            (c, Tok::Word(w)) => (*c, w.as_str()),
            (c, t) => return Err(ParseError::new(line, *c, format!("expected a declaration keyword, found {}", t.describe()))),
        };
        match keyword {
            "resource" => self.resource(line, &toks[1..]),
            "pd" => self.pd(line, &toks[1..]),
            "owns" => self.owns(line, &toks[1..]),
            "edge" => self.edge(line, &toks[1..]),
            "dir" => self.dir(line, &toks[1..]),
            "creator" => self.creator(line, &toks[1..]),
            "backing" => self.backing(line, &toks[1..]),
            "delta" => self.delta(line, &toks[1..]),
            "query" => self.query(line, &toks[1..]),
            other => Err(ParseError::new(
                line,
                col,
                format!("unknown declaration keyword `{other}`"),
            )),
        }
    }

    fn resource(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (id_col, id) = expect_word(line, rest, 0, "resource id")?;
        let mut kind: Option<String> = None;
        let mut class: Option<ResourceClass> = None;
        let mut label: Option<String> = None;
        for (col, tok) in &rest[1..] {
            match tok {
                Tok::Attr(k, v) if k == "kind" => set_once(line, *col, &mut kind, v.clone())?,
                Tok::Attr(k, v) if k == "class" => {
                    let parsed = match v.as_str() {
                        "physical" => ResourceClass::Physical,
                        "virtual" => ResourceClass::Virtual,
                        other => {
                            return Err(ParseError::new(
                                line,
                                *col,
                                format!("class must be `physical` or `virtual`, found `{other}`"),
                            ))
                        }
                    };
                    set_once(line, *col, &mut class, parsed)?;
                }
                Tok::AttrStr(k, v) | Tok::Attr(k, v) if k == "label" => {
                    set_once(line, *col, &mut label, v.clone())?
                }
                other => {
                    return Err(ParseError::new(
                        line,
                        *col,
                        format!("unexpected {} in resource declaration", other.describe()),
                    ))
                }
            }
        }
        let kind =
            kind.ok_or_else(|| ParseError::new(line, id_col, "resource needs a kind= attribute"))?;
        let class = class
            .ok_or_else(|| ParseError::new(line, id_col, "resource needs a class= attribute"))?;
        self.sys
            .add_resource_with_id(id, kind, class, label)
            .map_err(|e| ParseError::new(line, id_col, e.to_string()))?;
        Ok(())
    }

    fn pd(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (id_col, id) = expect_word(line, rest, 0, "protection domain id")?;
        let mut label: Option<String> = None;
        for (col, tok) in &rest[1..] {
            match tok {
                Tok::AttrStr(k, v) | Tok::Attr(k, v) if k == "label" => {
                    set_once(line, *col, &mut label, v.clone())?
                }
                other => {
                    return Err(ParseError::new(
                        line,
                        *col,
                        format!("unexpected {} in pd declaration", other.describe()),
                    ))
                }
            }
        }
        self.sys
            .add_pd_with_id(id, label)
            .map_err(|e| ParseError::new(line, id_col, e.to_string()))?;
        Ok(())
    }

    fn owns(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (_, pd) = expect_word(line, rest, 0, "protection domain id")?;
        let pd = PdId::from(pd);
        if rest.len() < 2 {
            return Err(ParseError::new(line, 1, "owns needs at least one resource id"));
        }
        for i in 1..rest.len() {
            let (col, res) = expect_word(line, rest, i, "resource id")?;
            self.sys
                .assign_resource(&pd, &ResourceId::from(res))
                .map_err(|e| ParseError::new(line, col, format!("owns {pd}: {e}")))?;
        }
        Ok(())
    }

    fn edge(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (kind_col, kind) = expect_word(line, rest, 0, "relation kind")?;
        let kind = match kind {
            "topology" => RelationKind::Topology,
            "mapping" => RelationKind::Mapping,
            "allocation" => RelationKind::Allocation,
            other => {
                return Err(ParseError::new(
                    line,
                    kind_col,
                    format!("relation kind must be topology, mapping or allocation, found `{other}`"),
                ))
            }
        };
        let (from_col, from) = expect_word(line, rest, 1, "source resource id")?;
        let (_, to) = expect_word(line, rest, 2, "target resource id")?;
        expect_end(line, rest, 3)?;
        self.sys
            .add_edge(&ResourceId::from(from), &ResourceId::from(to), kind)
            .map_err(|e| ParseError::new(line, from_col, e.to_string()))?;
        Ok(())
    }

    fn dir(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (pd_col, pd) = expect_word(line, rest, 0, "protection domain id")?;
        let (kind_col, kind) = expect_word(line, rest, 1, "resource kind")?;
        let (_, provider) = expect_word(line, rest, 2, "provider domain id")?;
        expect_end(line, rest, 3)?;
        let pd = PdId::from(pd);
        if let Some(domain) = self.sys.pd(&pd) {
            if domain.directory.entries.contains_key(kind) {
                return Err(ParseError::new(
                    line,
                    kind_col,
                    format!("duplicate dir entry for kind `{kind}` on `{pd}`"),
                ));
            }
        }
        self.sys
            .set_directory_entry(&pd, kind, &PdId::from(provider))
            .map_err(|e| ParseError::new(line, pd_col, e.to_string()))?;
        Ok(())
    }

    fn creator(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (pd_col, pd) = expect_word(line, rest, 0, "protection domain id")?;
        let (_, creator) = expect_word(line, rest, 1, "creator domain id")?;
        expect_end(line, rest, 2)?;
        let pd = PdId::from(pd);
        if let Some(domain) = self.sys.pd(&pd) {
            if domain.directory.creator.is_some() {
                return Err(ParseError::new(
                    line,
                    pd_col,
                    format!("duplicate creator declaration for `{pd}`"),
                ));
            }
        }
        self.sys
            .set_creator(&pd, &PdId::from(creator))
            .map_err(|e| ParseError::new(line, pd_col, e.to_string()))?;
        Ok(())
    }

    fn backing(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (kind_col, kind) = expect_word(line, rest, 0, "request kind")?;
        let (_, backing) = expect_word(line, rest, 1, "backing kind")?;
        expect_end(line, rest, 2)?;
        if self.sys.backing_kind(kind).is_some() {
            return Err(ParseError::new(
                line,
                kind_col,
                format!("duplicate backing declaration for kind `{kind}`"),
            ));
        }
        self.sys
            .declare_backing_kind(kind, backing)
            .map_err(|e| ParseError::new(line, kind_col, e.to_string()))?;
        Ok(())
    }

    fn delta(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (name_col, name) = expect_word(line, rest, 0, "delta name")?;
        if !valid_word(name) {
            return Err(ParseError::new(line, name_col, format!("invalid name `{name}`")));
        }
        if self.deltas.contains_key(name) {
            return Err(ParseError::new(
                line,
                name_col,
                format!("duplicate delta `{name}`"),
            ));
        }
        if rest.len() < 2 {
            return Err(ParseError::new(line, 1, "delta needs at least one resource id"));
        }
        let mut ids = BTreeSet::new();
        for i in 1..rest.len() {
            let (col, res) = expect_word(line, rest, i, "resource id")?;
            let id = ResourceId::from(res);
            if !self.sys.contains_resource(&id) {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("unknown resource `{id}` (declare it before referencing it)"),
                ));
            }
            ids.insert(id);
        }
        self.deltas.insert(name.to_owned(), ids);
        Ok(())
    }

    fn query(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<(), ParseError> {
        let (name_col, name) = expect_word(line, rest, 0, "query name")?;
        if !valid_word(name) {
            return Err(ParseError::new(line, name_col, format!("invalid name `{name}`")));
        }
        if self.queries.contains_key(name) {
            return Err(ParseError::new(
                line,
                name_col,
                format!("duplicate query `{name}`"),
            ));
        }
        let expr = self.query_expr(line, &rest[1..])?;
        self.queries.insert(name.to_owned(), expr);
        Ok(())
    }

    fn query_expr(&mut self, line: usize, rest: &[(usize, Tok)]) -> Result<QueryExpr, ParseError> {
        let (form_col, form) = expect_word(line, rest, 0, "query form")?;
        let hops = |i: usize| -> Result<HopCount, ParseError> {
            let (col, word) = expect_word(line, rest, i, "hop count")?;
            word.parse::<HopCount>()
                .map_err(|e| ParseError::new(line, col, e))
        };
        let pd_at = |i: usize| -> Result<PdId, ParseError> {
            let (col, word) = expect_word(line, rest, i, "protection domain id")?;
            let id = PdId::from(word);
            if !self.sys.contains_pd(&id) {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("unknown protection domain `{id}` (declare it before referencing it)"),
                ));
            }
            Ok(id)
        };
        let delta_at = |i: usize| -> Result<Option<String>, ParseError> {
            match rest.get(i) {
                None => Ok(None),
                Some((col, Tok::Attr(k, v))) if k == "delta" => {
                    if !self.deltas.contains_key(v) {
                        return Err(ParseError::new(
                            line,
                            *col,
                            format!("unknown delta `{v}` (declare it before referencing it)"),
                        ));
                    }
                    Ok(Some(v.clone()))
                }
                Some((col, t)) => Err(ParseError::new(
                    line,
                    *col,
                    format!("expected delta=NAME or end of line, found {}", t.describe()),
                )),
            }
        };
        match form {
            "nhop" => {
                let n = hops(1)?;
                if rest.len() < 3 {
                    return Err(ParseError::new(line, form_col, "nhop needs at least one seed resource"));
                }
                let mut seeds = BTreeSet::new();
                for i in 2..rest.len() {
                    let (col, word) = expect_word(line, rest, i, "resource id")?;
                    let id = ResourceId::from(word);
                    if !self.sys.contains_resource(&id) {
                        return Err(ParseError::new(
                            line,
                            col,
                            format!("unknown resource `{id}` (declare it before referencing it)"),
                        ));
                    }
                    seeds.insert(id);
                }
                Ok(QueryExpr::NHop { n, seeds })
            }
            "pd-nhop" => {
                let expr = QueryExpr::PdNHop {
                    n: hops(1)?,
                    pd: pd_at(2)?,
                };
                expect_end(line, rest, 3)?;
                Ok(expr)
            }
            "shared" => {
                let expr = QueryExpr::Shared {
                    n1: hops(1)?,
                    n2: hops(2)?,
                    a: pd_at(3)?,
                    b: pd_at(4)?,
                };
                expect_end(line, rest, 5)?;
                Ok(expr)
            }
            "isolated" => {
                let expr = QueryExpr::Isolated {
                    n1: hops(1)?,
                    n2: hops(2)?,
                    a: pd_at(3)?,
                    b: pd_at(4)?,
                    delta: delta_at(5)?,
                };
                expect_end(line, rest, 6)?;
                Ok(expr)
            }
            "pd-isolated" => {
                let expr = QueryExpr::PdIsolated {
                    n: hops(1)?,
                    pd: pd_at(2)?,
                    delta: delta_at(3)?,
                };
                expect_end(line, rest, 4)?;
                Ok(expr)
            }
            "level" => {
                let expr = QueryExpr::Level {
                    a: pd_at(1)?,
                    b: pd_at(2)?,
                    delta: delta_at(3)?,
                };
                expect_end(line, rest, 4)?;
                Ok(expr)
            }
            other => Err(ParseError::new(
                line,
                form_col,
                format!("unknown query form `{other}`"),
            )),
        }
    }
}

fn expect_word<'t>(
    line: usize,
    toks: &'t [(usize, Tok)],
    i: usize,
    what: &str,
) -> Result<(usize, &'t str), ParseError> {
    match toks.get(i) {
        Some((col, Tok::Word(w))) => Ok((*col, w.as_str())),
        Some((col, t)) => Err(ParseError::new(
            line,
            *col,
            format!("expected {what}, found {}", t.describe()),
        )),
        None => Err(ParseError::new(line, 1, format!("missing {what}"))),
    }
}

fn expect_end(line: usize, toks: &[(usize, Tok)], i: usize) -> Result<(), ParseError> {
    match toks.get(i) {
        None => Ok(()),
        Some((col, t)) => Err(ParseError::new(
            line,
            *col,
            format!("unexpected trailing {}", t.describe()),
        )),
    }
}

fn set_once<T>(line: usize, col: usize, slot: &mut Option<T>, value: T) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(ParseError::new(line, col, "duplicate attribute"));
    }
    *slot = Some(value);
    Ok(())
}

// --- emission ----------------------------------------------------------------

/// Canonical text for a system: groups in declaration order (resources,
/// pds, owns, edges, dir, creator, backing), each sorted by id, one
/// declaration per line. Emitting an empty system yields an empty string.
pub fn emit_scenario(sys: &System) -> String {
    let mut out = String::new();
    for r in sys.resources() {
        out.push_str(&format!("resource {} kind={} class={}", r.id, r.kind, r.class));
        if let Some(label) = &r.label {
            out.push_str(&format!(" label=\"{}\"", escape(label)));
        }
        out.push('\n');
    }
    for pd in sys.pds() {
        out.push_str(&format!("pd {}", pd.id));
        if let Some(label) = &pd.label {
            out.push_str(&format!(" label=\"{}\"", escape(label)));
        }
        out.push('\n');
    }
    for pd in sys.pds() {
        if !pd.resources.is_empty() {
            out.push_str(&format!("owns {} {}\n", pd.id, join_ids(&pd.resources)));
        }
    }
    for e in sys.edges() {
        out.push_str(&format!("edge {} {} {}\n", e.kind, e.from, e.to));
    }
    for pd in sys.pds() {
        for (kind, provider) in &pd.directory.entries {
            out.push_str(&format!("dir {} {kind} {provider}\n", pd.id));
        }
    }
    for pd in sys.pds() {
        if let Some(creator) = &pd.directory.creator {
            out.push_str(&format!("creator {} {creator}\n", pd.id));
        }
    }
    for (kind, backing) in sys.backing_kinds() {
        out.push_str(&format!("backing {kind} {backing}\n"));
    }
    out
}

fn join_ids<'a>(ids: impl IntoIterator<Item = &'a ResourceId>) -> String {
    ids.into_iter()
        .map(|r| r.as_str().to_owned())
        .collect::<Vec<_>>()
        .join(" ")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            other => out.push(other),
        }
    }
    out
}
