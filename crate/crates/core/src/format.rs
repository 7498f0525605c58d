//! Line-oriented text formats: STS files, configuration families,
//! uniform hypergraphs, plain graphs and gadget headers.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::triples::{Triple, TripleSystem};
use std::fmt::Write as _;

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

/// Non-comment lines with their 1-based line numbers. Enforces the
/// trailing newline.
fn content_lines(text: &str) -> Result<Vec<(usize, &str)>> {
    if !text.is_empty() && !text.ends_with('\n') {
        return perr(text.lines().count(), "missing trailing newline");
    }
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .collect())
}

fn ints(line: usize, s: &str) -> Result<Vec<u64>> {
    s.split_whitespace()
        .map(|w| w.parse::<u64>().or_else(|_| perr(line, format!("not a nonnegative integer: {w:?}"))))
        .collect()
}

fn header(lines: &[(usize, &str)], tag: &str, arity: usize) -> Result<(usize, Vec<u64>)> {
    let Some(&(ln, first)) = lines.first() else {
        return perr(1, format!("empty file, expected `{tag}` header"));
    };
    let mut words = first.split_whitespace();
    if words.next() != Some(tag) {
        return perr(ln, format!("expected `{tag}` header"));
    }
    let rest: Vec<&str> = words.collect();
    let vals = ints(ln, &rest.join(" "))?;
    if vals.len() != arity {
        return perr(ln, format!("`{tag}` header takes {arity} integers"));
    }
    Ok((ln, vals))
}

fn parse_triple(line: usize, s: &str, n: u64) -> Result<Triple> {
    let v = ints(line, s)?;
    if v.len() != 3 {
        return perr(line, "a triple needs exactly three integers");
    }
    if !(v[0] < v[1] && v[1] < v[2]) {
        return perr(line, "triple vertices must be distinct and sorted ascending");
    }
    if v[2] >= n {
        return perr(line, format!("vertex {} out of range [0, {n})", v[2]));
    }
    Ok(Triple::new(v[0] as u32, v[1] as u32, v[2] as u32))
}

pub fn read_sts(text: &str) -> Result<TripleSystem> {
    let lines = content_lines(text)?;
    let (ln, h) = header(&lines, "sts", 2)?;
    let (n, m) = (h[0], h[1]);
    if n > u32::MAX as u64 {
        return perr(ln, "vertex count too large");
    }
    let body = &lines[1..];
    if body.len() as u64 != m {
        return perr(ln, format!("header announces {m} triples, found {}", body.len()));
    }
    let mut sys = TripleSystem::new(n as u32);
    for &(l, s) in body {
        let t = parse_triple(l, s, n)?;
        if !sys.insert(t).map_err(|e| Error::Parse { line: l, msg: e.to_string() })? {
            return perr(l, format!("duplicate triple {t}"));
        }
    }
    Ok(sys)
}

pub fn write_sts(sys: &TripleSystem) -> String {
    write_sts_with(sys.n(), sys.triples().copied(), &[])
}

/// STS text for an explicit triple order, with leading comment lines.
pub fn write_sts_with(n: u32, triples: impl IntoIterator<Item = Triple>, comments: &[String]) -> String {
    let ts: Vec<Triple> = triples.into_iter().collect();
    let mut s = String::new();
    for c in comments {
        let _ = writeln!(s, "# {c}");
    }
    let _ = writeln!(s, "sts {} {}", n, ts.len());
    for t in ts {
        let _ = writeln!(s, "{t}");
    }
    s
}

/// `cfgfam <j> <count>`, one configuration per line, triples separated by `;`.
pub fn read_cfgfam(text: &str) -> Result<(usize, Vec<Vec<Triple>>)> {
    let lines = content_lines(text)?;
    let (ln, h) = header(&lines, "cfgfam", 2)?;
    let (j, count) = (h[0] as usize, h[1]);
    let body = &lines[1..];
    if body.len() as u64 != count {
        return perr(ln, format!("header announces {count} configurations, found {}", body.len()));
    }
    let mut out = Vec::new();
    for &(l, s) in body {
        let mut cfg = Vec::new();
        for part in s.split(';') {
            cfg.push(parse_triple(l, part, u32::MAX as u64)?);
        }
        if j >= 2 && cfg.len() != j - 2 {
            return perr(l, format!("configuration has {} triples, expected {}", cfg.len(), j - 2));
        }
        out.push(cfg);
    }
    Ok((j, out))
}

pub fn write_cfgfam(j: usize, configs: &[Vec<Triple>]) -> String {
    let mut s = format!("cfgfam {} {}\n", j, configs.len());
    for c in configs {
        let parts: Vec<String> = c.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "{}", parts.join(";"));
    }
    s
}

/// `hyp <n> <k> <m>`, one edge per line as k sorted integers.
pub fn read_hyp(text: &str) -> Result<(usize, usize, Vec<Vec<u32>>)> {
    let lines = content_lines(text)?;
    let (ln, h) = header(&lines, "hyp", 3)?;
    let (n, k, m) = (h[0] as usize, h[1] as usize, h[2]);
    let body = &lines[1..];
    if body.len() as u64 != m {
        return perr(ln, format!("header announces {m} edges, found {}", body.len()));
    }
    let mut edges = Vec::new();
    for &(l, s) in body {
        let v = ints(l, s)?;
        if v.len() != k {
            return perr(l, format!("edge needs {k} vertices"));
        }
        if v.windows(2).any(|w| w[0] >= w[1]) || v.iter().any(|&x| x as usize >= n) {
            return perr(l, "edge vertices must be sorted, distinct and in range");
        }
        edges.push(v.into_iter().map(|x| x as u32).collect());
    }
    Ok((n, k, edges))
}

pub fn write_hyp(n: usize, k: usize, edges: &[Vec<u32>]) -> String {
    let mut s = format!("hyp {} {} {}\n", n, k, edges.len());
    for e in edges {
        let parts: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", parts.join(" "));
    }
    s
}

/// `graph <n> <m>`, one edge per line as `u v` with u < v.
pub fn read_graph(text: &str) -> Result<Graph> {
    let lines = content_lines(text)?;
    let (ln, h) = header(&lines, "graph", 2)?;
    let (n, m) = (h[0], h[1]);
    let body = &lines[1..];
    if body.len() as u64 != m {
        return perr(ln, format!("header announces {m} edges, found {}", body.len()));
    }
    let mut g = Graph::new(n as u32);
    for &(l, s) in body {
        let v = ints(l, s)?;
        if v.len() != 2 || v[0] >= v[1] || v[1] >= n {
            return perr(l, "edge must be two sorted distinct in-range vertices");
        }
        if !g.add_edge(v[0] as u32, v[1] as u32) {
            return perr(l, "duplicate edge");
        }
    }
    Ok(g)
}

pub fn write_graph(g: &Graph) -> String {
    let edges = g.edges();
    let mut s = format!("graph {} {}\n", g.n(), edges.len());
    for e in edges {
        let _ = writeln!(s, "{} {}", e.0, e.1);
    }
    s
}

/// First line of a gadget file: `gadget <kind> key=value ...`.
pub fn gadget_header(kind: &str, params: &[(&str, String)]) -> String {
    let mut s = format!("gadget {kind}");
    for (k, v) in params {
        let _ = write!(s, " {k}={v}");
    }
    s.push('\n');
    s
}
