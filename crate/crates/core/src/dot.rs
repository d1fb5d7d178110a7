//! GraphViz DOT emission, plus a parser for the restricted subset this tool
//! emits (node lines and `->` edges with optional `dir=none` / `dir=both`).

use std::collections::BTreeMap;

use crate::graphs::{Dag, EdgeState, MixedGraph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotEdgeKind {
    Directed,
    Undirected,
    Bidirected,
}

/// Parsed structure: vertex names in declaration order, edges by vertex index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DotGraph {
    pub names: Vec<String>,
    pub edges: Vec<(usize, usize, DotEdgeKind)>,
}

fn is_bare_ident(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn quote(name: &str) -> String {
    if is_bare_ident(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\\\""))
    }
}

fn emit(names: &[String], edges: &[(usize, usize, DotEdgeKind)]) -> String {
    let mut out = String::from("digraph G {\n");
    for name in names {
        out.push_str("  ");
        out.push_str(&quote(name));
        out.push_str(";\n");
    }
    for &(from, to, kind) in edges {
        out.push_str("  ");
        out.push_str(&quote(&names[from]));
        out.push_str(" -> ");
        out.push_str(&quote(&names[to]));
        match kind {
            DotEdgeKind::Directed => {}
            DotEdgeKind::Undirected => out.push_str(" [dir=none]"),
            DotEdgeKind::Bidirected => out.push_str(" [dir=both]"),
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

/// DOT text for a DAG; edges sorted by (parent, child).
pub fn dag_to_dot(d: &Dag, names: &[String]) -> String {
    let edges: Vec<_> =
        d.edges().into_iter().map(|(p, c)| (p, c, DotEdgeKind::Directed)).collect();
    emit(names, &edges)
}

/// DOT text for a mixed graph; pairs lexicographic, undirected and
/// bidirected edges written low -> high with a `dir` attribute.
pub fn mixed_to_dot(g: &MixedGraph, names: &[String]) -> String {
    let edges: Vec<_> = g
        .edges()
        .into_iter()
        .map(|(a, b, state)| match state {
            EdgeState::Directed { from, to } => (from, to, DotEdgeKind::Directed),
            EdgeState::Undirected => (a, b, DotEdgeKind::Undirected),
            EdgeState::Bidirected => (a, b, DotEdgeKind::Bidirected),
            EdgeState::Absent => unreachable!("edges() yields present edges only"),
        })
        .collect();
    emit(names, &edges)
}

fn unquote(token: &str) -> Result<String> {
    let token = token.trim();
    if token.is_empty() {
        return Err(Error::Format("empty vertex name in DOT".into()));
    }
    if let Some(inner) = token.strip_prefix('"') {
        let inner = inner
            .strip_suffix('"')
            .ok_or_else(|| Error::Format(format!("unterminated quote in {token:?}")))?;
        return Ok(inner.replace("\\\"", "\""));
    }
    if token.contains(|c: char| c.is_whitespace() || "\";[]".contains(c)) {
        return Err(Error::Format(format!("malformed vertex name {token:?}")));
    }
    Ok(token.to_string())
}

/// Parses the subset emitted by [`dag_to_dot`] / [`mixed_to_dot`].
pub fn parse_dot(text: &str) -> Result<DotGraph> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(first) if first.starts_with("digraph") && first.ends_with('{') => {}
        Some(first) => {
            return Err(Error::Format(format!("expected a digraph header, got {first:?}")));
        }
        None => return Err(Error::Format("empty DOT document".into())),
    }

    let mut names: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut intern = move |name: String, names: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(&name) {
            return i;
        }
        let i = names.len();
        index.insert(name.clone(), i);
        names.push(name);
        i
    };
    let mut edges = Vec::new();
    let mut closed = false;

    for line in lines {
        if closed {
            return Err(Error::Format(format!("content after closing brace: {line:?}")));
        }
        if line == "}" {
            closed = true;
            continue;
        }
        let body = line
            .strip_suffix(';')
            .ok_or_else(|| Error::Format(format!("statement missing ';': {line:?}")))?
            .trim();
        if let Some((lhs, rhs)) = body.split_once("->") {
            let from = unquote(lhs)?;
            let rhs = rhs.trim();
            let (to_part, attr) = match rhs.find('[') {
                Some(i) => (&rhs[..i], Some(rhs[i..].trim())),
                None => (rhs, None),
            };
            let to = unquote(to_part)?;
            let kind = match attr {
                None => DotEdgeKind::Directed,
                Some("[dir=none]") => DotEdgeKind::Undirected,
                Some("[dir=both]") => DotEdgeKind::Bidirected,
                Some(other) => {
                    return Err(Error::Format(format!("unsupported edge attribute {other:?}")));
                }
            };
            let fi = intern(from, &mut names);
            let ti = intern(to, &mut names);
            if fi == ti {
                return Err(Error::Format("self-loop in DOT input".into()));
            }
            edges.push((fi, ti, kind));
        } else {
            let name = unquote(body)?;
            intern(name, &mut names);
        }
    }
    if !closed {
        return Err(Error::Format("missing closing '}'".into()));
    }
    Ok(DotGraph { names, edges })
}

/// Interprets a parsed DOT graph as a DAG; every edge must be directed.
pub fn dag_from_dot(dg: &DotGraph) -> Result<Dag> {
    let mut parents = vec![std::collections::BTreeSet::new(); dg.names.len()];
    for &(from, to, kind) in &dg.edges {
        if kind != DotEdgeKind::Directed {
            return Err(Error::Format(format!(
                "edge {} -> {} is not directed; a DAG file cannot contain dir attributes",
                dg.names[from], dg.names[to]
            )));
        }
        parents[to].insert(from);
    }
    Dag::new(parents).map_err(|_| Error::Format("DOT edges contain a directed cycle".into()))
}
