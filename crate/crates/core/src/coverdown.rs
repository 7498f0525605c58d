//! Cover-down machinery: typicality and discrepancy checks, matchings,
//! the reserve graph, internal-edge greedy covering, link graphs with
//! sparsify–delete–match, the per-level pipeline and end-to-end generation.

use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::process::{
    derive_induced_family, run_process, Cutoff, Forbidden, ForbiddenFamily, Outcome, ProcessInput, ProcessOptions,
};
use crate::regularization::{regularize_triangles, TriangleFamily};
use crate::rng::{child_seed, substream};
use crate::triples::{find_erdos_configs, girth, verify_steiner, Edge, Triple, TripleSystem, Vertex};
use petgraph::graph::{NodeIndex, UnGraph};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

// ---------------------------------------------------------------------------
// typicality

/// Largest n for which codegrees are checked over all pairs.
pub const EXHAUSTIVE_LIMIT: u32 = 500;
const SAMPLED_PAIRS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TypicalityReport {
    pub p: f64,
    pub xi: f64,
    /// Edge density 2m / (n(n−1)).
    pub p_hat: f64,
    /// max_v |deg(v) − pn| / pn.
    pub xi_deg: f64,
    /// max over checked pairs of |codeg − p²n| / p²n.
    pub xi_codeg: f64,
    pub pass: bool,
    pub exhaustive: bool,
    pub pairs_checked: usize,
    /// With sampling and no violation seen: one-sided 95% upper bound on
    /// the fraction of violating pairs (rule of three).
    pub violating_fraction_upper95: f64,
    /// Least ξ this graph would pass with at this p.
    pub min_xi: f64,
}

fn rel_dev(x: f64, target: f64) -> f64 {
    if target == 0.0 {
        if x == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((x - target) / target).abs()
    }
}

/// (p, ξ)-typicality: degrees in (1±ξ)pn, codegrees in (1±ξ)p²n.
/// Degrees are always checked exactly; codegrees exactly for
/// n ≤ [`EXHAUSTIVE_LIMIT`], otherwise on a fixed-seed sample of pairs.
pub fn check_typicality(g: &Graph, p: f64, xi: f64) -> TypicalityReport {
    let n = g.n();
    let nf = n as f64;
    let p_hat = if n < 2 { 0.0 } else { 2.0 * g.edge_count() as f64 / (nf * (nf - 1.0)) };
    let xi_deg = (0..n).map(|v| rel_dev(g.degree(v) as f64, p * nf)).fold(0.0, f64::max);
    let target = p * p * nf;
    let mut xi_codeg: f64 = 0.0;
    let mut pairs = 0usize;
    let exhaustive = n <= EXHAUSTIVE_LIMIT;
    if exhaustive {
        let mut mark = vec![false; n as usize];
        for u in 0..n {
            for &x in g.neighbors(u) {
                mark[x as usize] = true;
            }
            for v in u + 1..n {
                let c = g.neighbors(v).iter().filter(|&&x| mark[x as usize]).count();
                xi_codeg = xi_codeg.max(rel_dev(c as f64, target));
                pairs += 1;
            }
            for &x in g.neighbors(u) {
                mark[x as usize] = false;
            }
        }
    } else {
        let mut rng = substream(0, "coverdown/typicality");
        for _ in 0..SAMPLED_PAIRS {
            let u = rng.gen_range(0..n);
            let mut v = rng.gen_range(0..n - 1);
            if v >= u {
                v += 1;
            }
            xi_codeg = xi_codeg.max(rel_dev(g.codegree(u, v) as f64, target));
            pairs += 1;
        }
    }
    let min_xi = xi_deg.max(xi_codeg);
    TypicalityReport {
        p,
        xi,
        p_hat,
        xi_deg,
        xi_codeg,
        pass: min_xi <= xi,
        exhaustive,
        pairs_checked: pairs,
        violating_fraction_upper95: if exhaustive || pairs == 0 { 0.0 } else { 3.0 / pairs as f64 },
        min_xi,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTypicalityReport {
    /// Worst relative deviation of |N(v) ∩ U_i|/|U_i| (and U_{i+1}) from p.
    pub adjacency_dev: f64,
    /// Worst relative deviation of a rooted fraction from p^{|V(Q)|} q^{|Q|}.
    pub rooted_dev: f64,
    /// Number of (level, i*, Q) statistics evaluated.
    pub rooted_checked: usize,
    pub exhaustive: bool,
    pub pass: bool,
    /// First failing statistic, if any.
    pub witness: Option<String>,
}

/// Budget (vertex sets × roots) above which rooted statistics are sampled.
const ROOTED_BUDGET: u64 = 20_000_000;
const ROOTED_SAMPLES: usize = 20_000;

/// (p, q, ξ, h)-iteration-typicality of (G, A) with respect to the
/// descending sequence `levels`. Rooted statistics range over every edge
/// set Q ⊆ G[U_i] spanning at most h vertices, or over a fixed-seed sample
/// of vertex sets when that is too many.
pub fn check_iteration_typicality(
    g: &Graph,
    a: &HashSet<Triple>,
    levels: &[Vec<Vertex>],
    p: f64,
    q: f64,
    xi: f64,
    h: usize,
) -> Result<IterationTypicalityReport> {
    if !(2..=4).contains(&h) {
        return param(format!("h must lie in 2..=4, got {h}"));
    }
    for w in levels.windows(2) {
        let outer: HashSet<Vertex> = w[0].iter().copied().collect();
        if !w[1].iter().all(|v| outer.contains(v)) {
            return param("levels are not descending");
        }
    }
    if levels.iter().flatten().any(|&v| v >= g.n()) {
        return param("level vertex outside the graph");
    }
    let mut rep = IterationTypicalityReport {
        adjacency_dev: 0.0,
        rooted_dev: 0.0,
        rooted_checked: 0,
        exhaustive: true,
        pass: true,
        witness: None,
    };
    let mut rng = substream(0, "coverdown/iteration-typicality");
    for i in 0..levels.len().saturating_sub(1) {
        for star in [i, i + 1] {
            let target = &levels[star];
            for &v in &levels[i] {
                let k = target.iter().filter(|&&u| g.has_edge(v, u)).count();
                let d = rel_dev(k as f64 / target.len() as f64, p);
                rep.adjacency_dev = rep.adjacency_dev.max(d);
                if d > xi && rep.witness.is_none() {
                    rep.witness = Some(format!("vertex {v} sees a fraction {} of U_{star}", k as f64 / target.len() as f64));
                }
            }
        }
        let ui = &levels[i];
        let mut sets: Vec<Vec<Vertex>> = Vec::new();
        for s in 2..=h.min(ui.len()) {
            let total = binom_u64(ui.len() as u64, s as u64);
            let cost = total.saturating_mul(levels[i].len() as u64);
            if cost <= ROOTED_BUDGET {
                subsets(ui, s, &mut |x| sets.push(x.to_vec()));
            } else {
                rep.exhaustive = false;
                for _ in 0..ROOTED_SAMPLES {
                    let mut x: Vec<Vertex> = ui.choose_multiple(&mut rng, s).copied().collect();
                    x.sort_unstable();
                    sets.push(x);
                }
            }
        }
        for set in &sets {
            let pairs: Vec<(Vertex, Vertex)> = pairs_of(set).into_iter().filter(|&(x, y)| g.has_edge(x, y)).collect();
            let e = pairs.len();
            for star in [i, i + 1] {
                let roots = &levels[star];
                let mut hits = vec![0usize; 1 << e];
                for &u in roots {
                    let mut mask = 0usize;
                    for (b, &(x, y)) in pairs.iter().enumerate() {
                        if u != x && u != y && a.contains(&Triple::new(u, x, y)) {
                            mask |= 1 << b;
                        }
                    }
                    // every sub-mask of `mask` is satisfied by u
                    let mut sub = mask;
                    loop {
                        hits[sub] += 1;
                        if sub == 0 {
                            break;
                        }
                        sub = (sub - 1) & mask;
                    }
                }
                for qmask in 1usize..(1 << e) {
                    let mut span: BTreeSet<Vertex> = BTreeSet::new();
                    for (b, &(x, y)) in pairs.iter().enumerate() {
                        if qmask >> b & 1 == 1 {
                            span.insert(x);
                            span.insert(y);
                        }
                    }
                    if span.len() != set.len() {
                        continue;
                    }
                    let expect = p.powi(span.len() as i32) * q.powi(qmask.count_ones() as i32);
                    let frac = hits[qmask] as f64 / roots.len() as f64;
                    let d = rel_dev(frac, expect);
                    rep.rooted_checked += 1;
                    rep.rooted_dev = rep.rooted_dev.max(d);
                    if d > xi && rep.witness.is_none() {
                        let q_edges: Vec<String> = pairs
                            .iter()
                            .enumerate()
                            .filter(|(b, _)| qmask >> b & 1 == 1)
                            .map(|(_, (x, y))| format!("{x}{y}"))
                            .collect();
                        rep.witness = Some(format!(
                            "Q = {{{}}} in U_{i}: fraction {frac} of U_{star}, expected {expect}",
                            q_edges.join(",")
                        ));
                    }
                }
            }
        }
    }
    rep.pass = rep.adjacency_dev <= xi && rep.rooted_dev <= xi;
    Ok(rep)
}

fn binom_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn subsets(items: &[Vertex], k: usize, f: &mut dyn FnMut(&[Vertex])) {
    fn rec(items: &[Vertex], k: usize, start: usize, cur: &mut Vec<Vertex>, f: &mut dyn FnMut(&[Vertex])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    let mut sorted = items.to_vec();
    sorted.sort_unstable();
    rec(&sorted, k, 0, &mut Vec::new(), f);
}

fn pairs_of(set: &[Vertex]) -> Vec<(Vertex, Vertex)> {
    let mut out = Vec::new();
    for (i, &x) in set.iter().enumerate() {
        for &y in &set[i + 1..] {
            out.push((x, y));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// discrepancy

#[derive(Clone, Debug, PartialEq)]
pub struct Discrepancy {
    pub e_st: usize,
    /// |e(S,T) − p|S||T||.
    pub deviation: f64,
    /// 2(ξ^{1/2}pn + √(pn))√(|S||T|).
    pub bound: f64,
    pub violated: bool,
}

/// Edge count between disjoint S and T against the bound implied by
/// (p, ξ)-typicality. A violation means the typicality inputs are wrong.
pub fn discrepancy_check(g: &Graph, s: &[Vertex], t: &[Vertex], p: f64, xi: f64) -> Result<Discrepancy> {
    let n = g.n();
    let mut in_t = vec![false; n as usize];
    for &v in t {
        if v >= n {
            return param(format!("vertex {v} outside the graph"));
        }
        in_t[v as usize] = true;
    }
    let mut seen = HashSet::new();
    for &v in s {
        if v >= n {
            return param(format!("vertex {v} outside the graph"));
        }
        if in_t[v as usize] {
            return param(format!("S and T overlap at {v}"));
        }
        if !seen.insert(v) {
            return param(format!("vertex {v} repeated in S"));
        }
    }
    let e_st: usize = s.iter().map(|&v| g.neighbors(v).iter().filter(|&&u| in_t[u as usize]).count()).sum();
    let (sn, tn) = (s.len() as f64, t.len() as f64);
    let pn = p * n as f64;
    let deviation = (e_st as f64 - p * sn * tn).abs();
    let bound = 2.0 * (xi.sqrt() * pn + pn.sqrt()) * (sn * tn).sqrt();
    Ok(Discrepancy { e_st, deviation, bound, violated: deviation > bound * (1.0 + 1e-12) })
}

// ---------------------------------------------------------------------------
// matchings

/// Bipartite graph with parts X = {0..nx} and Y = {0..ny}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartite {
    nx: usize,
    ny: usize,
    adj: Vec<Vec<u32>>,
}

impl Bipartite {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny, adj: vec![Vec::new(); nx] }
    }

    pub fn from_edges(nx: usize, ny: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut b = Self::new(nx, ny);
        for (x, y) in edges {
            b.add_edge(x, y)?;
        }
        Ok(b)
    }

    pub fn add_edge(&mut self, x: u32, y: u32) -> Result<()> {
        if x as usize >= self.nx || y as usize >= self.ny {
            return param(format!("edge ({x}, {y}) outside the parts"));
        }
        let list = &mut self.adj[x as usize];
        if let Err(i) = list.binary_search(&y) {
            list.insert(i, y);
        }
        Ok(())
    }

    pub fn has_edge(&self, x: u32, y: u32) -> bool {
        (x as usize) < self.nx && self.adj[x as usize].binary_search(&y).is_ok()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn neighbors(&self, x: u32) -> &[u32] {
        &self.adj[x as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HallOutcome {
    /// `mate[x]` is the partner of x.
    Perfect(Vec<u32>),
    /// S ⊆ X with |N(S)| < |S|.
    Deficient { s: Vec<u32>, neighborhood: Vec<u32> },
}

const FREE: u32 = u32::MAX;

/// Maximum matching by Hopcroft–Karp. Returns (mate of x, mate of y).
fn hopcroft_karp(b: &Bipartite) -> (Vec<u32>, Vec<u32>) {
    let (nx, ny) = (b.nx, b.ny);
    let mut mx = vec![FREE; nx];
    let mut my = vec![FREE; ny];
    let mut dist = vec![u32::MAX; nx];
    loop {
        // layered BFS from free X vertices
        let mut queue = std::collections::VecDeque::new();
        for x in 0..nx {
            if mx[x] == FREE {
                dist[x] = 0;
                queue.push_back(x);
            } else {
                dist[x] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(x) = queue.pop_front() {
            for &y in &b.adj[x] {
                let x2 = my[y as usize];
                if x2 == FREE {
                    found = true;
                } else if dist[x2 as usize] == u32::MAX {
                    dist[x2 as usize] = dist[x] + 1;
                    queue.push_back(x2 as usize);
                }
            }
        }
        if !found {
            break;
        }
        fn dfs(x: usize, b: &Bipartite, mx: &mut [u32], my: &mut [u32], dist: &mut [u32]) -> bool {
            for &y in &b.adj[x] {
                let x2 = my[y as usize];
                if x2 == FREE || (dist[x2 as usize] == dist[x] + 1 && dfs(x2 as usize, b, mx, my, dist)) {
                    mx[x] = y;
                    my[y as usize] = x as u32;
                    return true;
                }
            }
            dist[x] = u32::MAX;
            false
        }
        for x in 0..nx {
            if mx[x] == FREE {
                dfs(x, b, &mut mx, &mut my, &mut dist);
            }
        }
    }
    (mx, my)
}

/// Perfect matching of a balanced bipartite graph, or a Hall violation
/// grown by alternating paths from the first unmatched vertex of X.
pub fn hall_matching(b: &Bipartite) -> Result<HallOutcome> {
    if b.nx != b.ny {
        return param(format!("unbalanced parts: |X| = {}, |Y| = {}", b.nx, b.ny));
    }
    let (mx, my) = hopcroft_karp(b);
    if let Some(x0) = mx.iter().position(|&y| y == FREE) {
        let mut s = vec![x0 as u32];
        let mut in_s = vec![false; b.nx];
        let mut in_n = vec![false; b.ny];
        in_s[x0] = true;
        let mut k = 0;
        while k < s.len() {
            let x = s[k] as usize;
            k += 1;
            for &y in &b.adj[x] {
                if !in_n[y as usize] {
                    in_n[y as usize] = true;
                    // maximality: every neighbour reached this way is matched
                    let x2 = my[y as usize];
                    if x2 == FREE {
                        return Err(Error::Invariant("augmenting path left after Hopcroft–Karp".into()));
                    }
                    if !in_s[x2 as usize] {
                        in_s[x2 as usize] = true;
                        s.push(x2);
                    }
                }
            }
        }
        s.sort_unstable();
        let neighborhood: Vec<u32> = (0..b.ny as u32).filter(|&y| in_n[y as usize]).collect();
        debug_assert!(neighborhood.len() < s.len());
        return Ok(HallOutcome::Deficient { s, neighborhood });
    }
    for (x, &y) in mx.iter().enumerate() {
        if !b.has_edge(x as u32, y) || my[y as usize] != x as u32 {
            return Err(Error::Invariant(format!("matching is not a bijection at x = {x}")));
        }
    }
    Ok(HallOutcome::Perfect(mx))
}

/// Maximum matching of a general graph on `n` vertices (vertex ids are
/// positions). Returns the matched pairs (u < v), sorted.
pub fn maximum_matching(n: usize, edges: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let mut g: UnGraph<(), ()> = UnGraph::with_capacity(n, edges.len());
    for _ in 0..n {
        g.add_node(());
    }
    for &(u, v) in edges {
        g.add_edge(NodeIndex::new(u as usize), NodeIndex::new(v as usize), ());
    }
    let m = petgraph::algo::maximum_matching(&g);
    let mut out: Vec<(u32, u32)> = m
        .edges()
        .map(|(a, b)| {
            let (a, b) = (a.index() as u32, b.index() as u32);
            (a.min(b), a.max(b))
        })
        .collect();
    out.sort_unstable();
    out
}

/// Checks that `pairs` is a perfect matching of `n` vertices using only
/// edges of `edges`.
pub fn is_perfect_matching(n: usize, edges: &[(u32, u32)], pairs: &[(u32, u32)]) -> bool {
    let set: HashSet<(u32, u32)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut hit = vec![false; n];
    for &(a, b) in pairs {
        if a == b || a as usize >= n || b as usize >= n || !set.contains(&(a.min(b), a.max(b))) {
            return false;
        }
        for v in [a, b] {
            if std::mem::replace(&mut hit[v as usize], true) {
                return false;
            }
        }
    }
    hit.iter().all(|&h| h)
}

/// Hall violation in the bipartite double cover of a general graph. Its
/// existence certifies that no perfect matching exists.
fn double_cover_witness(n: usize, edges: &[(u32, u32)]) -> Option<(Vec<u32>, Vec<u32>)> {
    let mut b = Bipartite::new(n, n);
    for &(u, v) in edges {
        b.add_edge(u, v).ok()?;
        b.add_edge(v, u).ok()?;
    }
    match hall_matching(&b).ok()? {
        HallOutcome::Deficient { s, neighborhood } => Some((s, neighborhood)),
        HallOutcome::Perfect(_) => None,
    }
}

// ---------------------------------------------------------------------------
// robust matching

#[derive(Clone, Debug, PartialEq)]
pub enum TrialResult {
    Matched { size: usize },
    NoPerfectMatching { matched: usize },
    /// F exceeded the degree cap; the trial was not run.
    CapViolated { max_degree: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustMatchingReport {
    pub p_hat: f64,
    pub keep_prob: f64,
    /// ⌊ξ n^γ⌋.
    pub cap: usize,
    pub trials: Vec<TrialResult>,
    pub successes: usize,
    pub success_rate: f64,
}

/// Deletes as many edges as the cap allows around the vertices of least
/// degree in R, lowest degree first.
pub fn greedy_min_degree_deleter(r: &Graph, cap: usize) -> Vec<Edge> {
    let n = r.n();
    let mut order: Vec<Vertex> = (0..n).collect();
    order.sort_by_key(|&v| (r.degree(v), v));
    let mut fdeg = vec![0usize; n as usize];
    let mut out = Vec::new();
    for v in order {
        for &u in r.neighbors(v) {
            if fdeg[v as usize] < cap && fdeg[u as usize] < cap {
                let e = Edge::new(u, v);
                if !out.contains(&e) {
                    fdeg[u as usize] += 1;
                    fdeg[v as usize] += 1;
                    out.push(e);
                }
            }
        }
    }
    out
}

/// Subsamples R ⊆ G at rate n^γ/(pn), removes the adversary's F (max degree
/// at most ξn^γ) and looks for a perfect matching of R ∖ F.
pub fn robust_matching_experiment(
    g: &Graph,
    gamma: f64,
    xi: f64,
    f_builder: &dyn Fn(&Graph, usize) -> Vec<Edge>,
    trials: usize,
    seed: u64,
) -> Result<RobustMatchingReport> {
    let n = g.n();
    if n % 2 == 1 {
        return param(format!("n = {n} is odd"));
    }
    if !(0.0..=1.0).contains(&gamma) || xi < 0.0 {
        return param("need 0 <= gamma <= 1 and xi >= 0");
    }
    let nf = n as f64;
    let p_hat = if n < 2 { 0.0 } else { 2.0 * g.edge_count() as f64 / (nf * (nf - 1.0)) };
    if p_hat < nf.powf(-1.0 / 3.0) {
        return Err(Error::Hypothesis(format!("density {p_hat} is below n^(-1/3)")));
    }
    let keep_prob = (nf.powf(gamma) / (p_hat * nf)).min(1.0);
    let cap = (xi * nf.powf(gamma)).floor() as usize;
    let mut results = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = substream(child_seed(seed, "robust-matching/trial", trial as u64), "robust-matching/sample");
        let kept: Vec<Edge> = g.edges().into_iter().filter(|_| rng.gen::<f64>() < keep_prob).collect();
        let mut r = Graph::from_edges(n, kept);
        let f = f_builder(&r, cap);
        let mut fdeg = vec![0usize; n as usize];
        for e in &f {
            fdeg[e.0 as usize] += 1;
            fdeg[e.1 as usize] += 1;
        }
        let max_f = fdeg.iter().copied().max().unwrap_or(0);
        if max_f > cap {
            results.push(TrialResult::CapViolated { max_degree: max_f });
            continue;
        }
        for e in &f {
            r.remove_edge(e.0, e.1);
        }
        let edges: Vec<(u32, u32)> = r.edges().iter().map(|e| (e.0, e.1)).collect();
        let m = maximum_matching(n as usize, &edges);
        if 2 * m.len() == n as usize {
            if !is_perfect_matching(n as usize, &edges, &m) {
                return Err(Error::Invariant("matching failed verification".into()));
            }
            results.push(TrialResult::Matched { size: m.len() });
        } else {
            results.push(TrialResult::NoPerfectMatching { matched: m.len() });
        }
    }
    let successes = results.iter().filter(|r| matches!(r, TrialResult::Matched { .. })).count();
    Ok(RobustMatchingReport {
        p_hat,
        keep_prob,
        cap,
        success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        successes,
        trials: results,
    })
}

// ---------------------------------------------------------------------------
// forbidden configurations against a growing chosen set

/// Would adding `t` to `sys` complete a forbidden configuration? `sys` is
/// left unchanged.
pub fn completes_forbidden(sys: &mut TripleSystem, forbidden: &Forbidden, t: &Triple) -> Result<bool> {
    match forbidden {
        Forbidden::None => Ok(false),
        Forbidden::Explicit(f) => Ok(f.containing(t).iter().any(|&ci| {
            f.configs()[ci].iter().all(|x| x == t || sys.contains(x))
        })),
        Forbidden::Erdos { g } => {
            if *g < 6 {
                return Ok(false);
            }
            let fresh = sys.insert(*t)?;
            let hit = !find_erdos_configs(sys, 6, *g as usize, Some(&[*t]))?.is_empty();
            if fresh {
                sys.remove(t);
            }
            Ok(hit)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdditionReport {
    /// Edges covered more than once by prior ∪ added.
    pub edge_collisions: usize,
    /// Forbidden configurations containing an added triple.
    pub completed_forbidden: usize,
    /// Target edges left uncovered by the added triples.
    pub uncovered_targets: usize,
    pub witness: Option<Vec<Triple>>,
}

impl AdditionReport {
    pub fn ok(&self) -> bool {
        self.edge_collisions == 0 && self.completed_forbidden == 0 && self.uncovered_targets == 0
    }
}

/// Post-hoc scan of newly added triples: disjointness against everything
/// chosen before, no forbidden configuration through a new triple, and
/// coverage of `targets`. Independent of the incremental bookkeeping.
pub fn verify_additions(
    n: u32,
    prior: &[Triple],
    added: &[Triple],
    forbidden: &Forbidden,
    targets: &[Edge],
) -> Result<AdditionReport> {
    let mut rep = AdditionReport::default();
    let mut cover: HashMap<Edge, usize> = HashMap::new();
    for t in prior.iter().chain(added) {
        for e in t.edges() {
            *cover.entry(e).or_default() += 1;
        }
    }
    rep.edge_collisions = cover.values().filter(|&&c| c > 1).count();
    let new: HashSet<Edge> = added.iter().flat_map(|t| t.edges()).collect();
    rep.uncovered_targets = targets.iter().filter(|e| !new.contains(e)).count();
    let added_set: HashSet<Triple> = added.iter().copied().collect();
    match forbidden {
        Forbidden::None => {}
        Forbidden::Explicit(f) => {
            let all: HashSet<Triple> = prior.iter().chain(added).copied().collect();
            for c in f.configs() {
                if c.iter().all(|t| all.contains(t)) && c.iter().any(|t| added_set.contains(t)) {
                    rep.completed_forbidden += 1;
                    rep.witness.get_or_insert_with(|| c.clone());
                }
            }
        }
        Forbidden::Erdos { g } if *g >= 6 => {
            let mut all: BTreeSet<Triple> = prior.iter().copied().collect();
            all.extend(added.iter().copied());
            let sys = TripleSystem::from_triples(n, all)?;
            for c in find_erdos_configs(&sys, 6, *g as usize, None)? {
                if c.triples.iter().any(|t| added_set.contains(t)) {
                    rep.completed_forbidden += 1;
                    rep.witness.get_or_insert_with(|| c.triples.clone());
                }
            }
        }
        Forbidden::Erdos { .. } => {}
    }
    Ok(rep)
}

fn ensure_clean(rep: &AdditionReport, what: &str) -> Result<()> {
    if rep.edge_collisions > 0 || rep.completed_forbidden > 0 {
        return Err(Error::Invariant(format!(
            "{what}: {} edge collisions, {} completed configurations (witness {:?})",
            rep.edge_collisions, rep.completed_forbidden, rep.witness
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// reserve graph and internal edges

/// Keeps each edge of G between `u_out` and `u_in` with probability n^{−θ}.
pub fn sample_reserve(g: &Graph, u_out: &[Vertex], u_in: &[Vertex], theta: f64, seed: u64) -> Result<Graph> {
    let n = g.n();
    let mut side = vec![0u8; n as usize];
    for &v in u_in {
        if v >= n {
            return param(format!("vertex {v} outside the graph"));
        }
        side[v as usize] = 2;
    }
    for &v in u_out {
        if v >= n {
            return param(format!("vertex {v} outside the graph"));
        }
        if side[v as usize] == 2 {
            return param(format!("U_out and U_in overlap at {v}"));
        }
        side[v as usize] = 1;
    }
    let prob = if theta.is_infinite() { 0.0 } else { (n as f64).powf(-theta).clamp(0.0, 1.0) };
    let mut rng = substream(seed, "coverdown/reserve");
    let mut r = Graph::new(n);
    for e in g.edges() {
        if side[e.0 as usize] + side[e.1 as usize] == 3 && rng.gen::<f64>() < prob {
            r.add_edge(e.0, e.1);
        }
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq)]
pub enum InternalOutcome {
    Covered(Vec<Triple>),
    /// Edge f_step had fewer than `min_choices` candidates.
    Failed { step: usize, edge: Edge, candidates: usize, partial: Vec<Triple> },
}

/// For each internal edge f_i = uv in order, picks uniformly among the
/// triangles uvw ∈ A whose other edges are unused reserve edges and whose
/// addition completes no forbidden configuration.
pub fn cover_internal_greedy(
    internal: &[Edge],
    r: &Graph,
    a: &HashSet<Triple>,
    forbidden: &Forbidden,
    chosen: &[Triple],
    min_choices: usize,
    seed: u64,
) -> Result<InternalOutcome> {
    let n = r.n();
    let mut sys = TripleSystem::from_triples(n, chosen.iter().copied())?;
    let mut used: HashSet<Edge> = chosen.iter().flat_map(|t| t.edges()).collect();
    let mut seen = HashSet::new();
    for e in internal {
        if used.contains(e) {
            return param(format!("internal edge {e} is already covered"));
        }
        if r.has_edge(e.0, e.1) {
            return param(format!("internal edge {e} is a reserve edge"));
        }
        if !seen.insert(*e) {
            return param(format!("internal edge {e} listed twice"));
        }
    }
    let mut rng = substream(seed, "coverdown/internal");
    let mut out = Vec::new();
    for (i, &f) in internal.iter().enumerate() {
        let mut cands = Vec::new();
        for &w in r.neighbors(f.0) {
            if w == f.1 || !r.has_edge(w, f.1) {
                continue;
            }
            let t = Triple::from_edge(f, w);
            let (e1, e2) = (Edge::new(f.0, w), Edge::new(f.1, w));
            if used.contains(&e1) || used.contains(&e2) || !a.contains(&t) {
                continue;
            }
            if completes_forbidden(&mut sys, forbidden, &t)? {
                continue;
            }
            cands.push(t);
        }
        if cands.is_empty() || cands.len() < min_choices {
            return Ok(InternalOutcome::Failed { step: i, edge: f, candidates: cands.len(), partial: out });
        }
        let t = cands[rng.gen_range(0..cands.len())];
        for e in t.edges() {
            used.insert(e);
        }
        sys.insert(t)?;
        out.push(t);
    }
    let rep = verify_additions(n, chosen, &out, forbidden, internal)?;
    ensure_clean(&rep, "internal greedy")?;
    if rep.uncovered_targets > 0 {
        return Err(Error::Invariant("internal greedy left a target edge uncovered".into()));
    }
    Ok(InternalOutcome::Covered(out))
}

// ---------------------------------------------------------------------------
// link graphs and crossing edges

/// L_v: on the neighbours of `center` inside U′, an edge uw whenever
/// vuw ∈ A. `active` is W_v, the u with uv still uncovered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkGraph {
    pub center: Vertex,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub active: Vec<Vertex>,
}

impl LinkGraph {
    /// Built from the current uncovered graph, so every link edge uw has
    /// uv, wv and uw uncovered.
    pub fn build(center: Vertex, uncovered: &Graph, u_in: &[Vertex], a: &HashSet<Triple>) -> Self {
        let mut vertices: Vec<Vertex> =
            u_in.iter().copied().filter(|&u| u != center && uncovered.has_edge(center, u)).collect();
        vertices.sort_unstable();
        let mut edges = Vec::new();
        for (i, &u) in vertices.iter().enumerate() {
            for &w in &vertices[i + 1..] {
                if uncovered.has_edge(u, w) && a.contains(&Triple::new(center, u, w)) {
                    edges.push(Edge::new(u, w));
                }
            }
        }
        Self { center, active: vertices.clone(), vertices, edges }
    }

    /// L_v[W_v] restricted to edges still uncovered.
    pub fn active_edges(&self, uncovered: &Graph) -> Vec<Edge> {
        let act: HashSet<Vertex> = self.active.iter().copied().collect();
        self.edges
            .iter()
            .copied()
            .filter(|e| act.contains(&e.0) && act.contains(&e.1) && uncovered.has_edge(e.0, e.1))
            .collect()
    }
}

/// n^γ / (n^{−θ} p² q n^{1−ρ}), clamped to [0, 1].
pub fn sparsify_probability(n: u32, gamma: f64, theta: f64, rho: f64, p: f64, q: f64) -> f64 {
    let nf = n as f64;
    let denom = nf.powf(-theta) * p * p * q * nf.powf(1.0 - rho);
    if denom <= 0.0 {
        1.0
    } else {
        (nf.powf(gamma) / denom).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CrossingFailure {
    OddParity { active: usize },
    NoPerfectMatching {
        matched: usize,
        needed: usize,
        /// Hall violation (S, N(S)) in the double cover of S_v ∖ (D₁ ∪ D₂),
        /// when one exists.
        witness: Option<(Vec<Vertex>, Vec<Vertex>)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossingReport {
    pub triples: Vec<Triple>,
    /// Edges deleted for lying in several sparsified link graphs.
    pub d1: Vec<Edge>,
    /// (center, edge) deleted because vuw would complete a forbidden
    /// configuration or reuse a claimed edge.
    pub d2: Vec<(Vertex, Edge)>,
    /// (center, |S_v| after sparsification).
    pub sparsified: Vec<(Vertex, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CrossingOutcome {
    Covered(CrossingReport),
    Failed { center: Vertex, reason: CrossingFailure, partial: CrossingReport },
}

/// Covers every edge v–W_v by triangles vuw, one perfect matching of the
/// sparsified link graph per center, centers processed in the given order.
pub fn cover_crossing(
    links: &[LinkGraph],
    uncovered: &Graph,
    keep_prob: f64,
    forbidden: &Forbidden,
    chosen: &[Triple],
    seed: u64,
) -> Result<CrossingOutcome> {
    let n = uncovered.n();
    let mut centers = HashSet::new();
    for l in links {
        if !centers.insert(l.center) {
            return param(format!("center {} appears twice", l.center));
        }
    }
    let mut report = CrossingReport { triples: Vec::new(), d1: Vec::new(), d2: Vec::new(), sparsified: Vec::new() };
    for l in links {
        if l.active.len() % 2 == 1 {
            return Ok(CrossingOutcome::Failed {
                center: l.center,
                reason: CrossingFailure::OddParity { active: l.active.len() },
                partial: report,
            });
        }
    }
    let mut sparse: Vec<Vec<Edge>> = Vec::with_capacity(links.len());
    let mut multiplicity: HashMap<Edge, usize> = HashMap::new();
    for l in links {
        let mut rng = substream(child_seed(seed, "coverdown/sparsify", l.center as u64), "coverdown/sparsify");
        let s: Vec<Edge> = l.active_edges(uncovered).into_iter().filter(|_| rng.gen::<f64>() < keep_prob).collect();
        for e in &s {
            *multiplicity.entry(*e).or_default() += 1;
        }
        report.sparsified.push((l.center, s.len()));
        sparse.push(s);
    }
    let d1: BTreeSet<Edge> = multiplicity.into_iter().filter(|&(_, k)| k >= 2).map(|(e, _)| e).collect();
    report.d1 = d1.iter().copied().collect();

    let mut sys = TripleSystem::from_triples(n, chosen.iter().copied())?;
    let mut claimed: HashSet<Edge> = chosen.iter().flat_map(|t| t.edges()).collect();
    for (l, s) in links.iter().zip(&sparse) {
        let v = l.center;
        if l.active.is_empty() {
            continue;
        }
        if l.active.iter().any(|&u| claimed.contains(&Edge::new(u, v))) {
            return Err(Error::Invariant(format!("crossing edge at center {v} was claimed by another center")));
        }
        let mut live: Vec<Edge> = Vec::new();
        for &e in s {
            if d1.contains(&e) {
                continue;
            }
            let t = Triple::from_edge(e, v);
            if t.edges().iter().any(|x| claimed.contains(x)) || completes_forbidden(&mut sys, forbidden, &t)? {
                report.d2.push((v, e));
                continue;
            }
            live.push(e);
        }
        let pos: HashMap<Vertex, u32> = l.active.iter().enumerate().map(|(i, &u)| (u, i as u32)).collect();
        // rematch until the claimed triangles are jointly forbidden-free
        loop {
            let local: Vec<(u32, u32)> = live.iter().map(|e| (pos[&e.0], pos[&e.1])).collect();
            let m = maximum_matching(l.active.len(), &local);
            if 2 * m.len() != l.active.len() {
                let witness = double_cover_witness(l.active.len(), &local).map(|(s, ns)| {
                    (s.iter().map(|&i| l.active[i as usize]).collect(), ns.iter().map(|&i| l.active[i as usize]).collect())
                });
                return Ok(CrossingOutcome::Failed {
                    center: v,
                    reason: CrossingFailure::NoPerfectMatching { matched: m.len(), needed: l.active.len() / 2, witness },
                    partial: report,
                });
            }
            if !is_perfect_matching(l.active.len(), &local, &m) {
                return Err(Error::Invariant(format!("link matching at {v} failed verification")));
            }
            let tris: Vec<Triple> =
                m.iter().map(|&(a, b)| Triple::new(v, l.active[a as usize], l.active[b as usize])).collect();
            let mut bad = None;
            let mut added = Vec::new();
            for t in &tris {
                if completes_forbidden(&mut sys, forbidden, t)? {
                    bad = Some(*t);
                    break;
                }
                sys.insert(*t)?;
                added.push(*t);
            }
            match bad {
                None => {
                    for t in &tris {
                        claimed.extend(t.edges());
                    }
                    report.triples.extend(tris);
                    break;
                }
                Some(t) => {
                    for x in &added {
                        sys.remove(x);
                    }
                    let e = t.edges().into_iter().find(|e| !e.contains(v)).unwrap();
                    live.retain(|x| *x != e);
                    report.d2.push((v, e));
                }
            }
        }
    }
    let targets: Vec<Edge> = links.iter().flat_map(|l| l.active.iter().map(move |&u| Edge::new(u, l.center))).collect();
    let rep = verify_additions(n, chosen, &report.triples, forbidden, &targets)?;
    ensure_clean(&rep, "crossing cover")?;
    if rep.uncovered_targets > 0 {
        return Err(Error::Invariant("crossing cover left a target edge uncovered".into()));
    }
    Ok(CrossingOutcome::Covered(report))
}

// ---------------------------------------------------------------------------
// vortex

/// ⌊m^{1−ρ}⌋, robust to rounding just below an integer.
pub fn next_level_size(m: usize, rho: f64) -> usize {
    let x = (m as f64).powf(1.0 - rho);
    let f = x.floor();
    if f + 1.0 - x < 1e-9 {
        f as usize + 1
    } else {
        f as usize
    }
}

/// |U_0| = n, |U_k| = ⌊|U_{k−1}|^{1−ρ}⌋, stopping before a level would
/// drop below `min_size` or fail to shrink.
pub fn vortex_sizes(n: usize, rho: f64, min_size: usize) -> Vec<usize> {
    let mut sizes = vec![n];
    loop {
        let m = *sizes.last().unwrap();
        let next = next_level_size(m, rho);
        if next < min_size || next >= m {
            break;
        }
        sizes.push(next);
    }
    sizes
}

/// Nested uniformly random vertex sets with [`vortex_sizes`].
pub fn build_vortex(n: u32, rho: f64, min_size: usize, seed: u64) -> Result<Vec<Vec<Vertex>>> {
    if !(0.0..1.0).contains(&rho) {
        return param(format!("rho = {rho} outside [0, 1)"));
    }
    let mut rng = substream(seed, "coverdown/vortex");
    let sizes = vortex_sizes(n as usize, rho, min_size);
    let mut levels: Vec<Vec<Vertex>> = vec![(0..n).collect()];
    for &s in &sizes[1..] {
        let mut next: Vec<Vertex> = levels.last().unwrap().choose_multiple(&mut rng, s).copied().collect();
        next.sort_unstable();
        levels.push(next);
    }
    Ok(levels)
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub n: u32,
    pub g: u32,
    /// Density used for regularization; 0 means estimate from the graph.
    pub p_target: f64,
    pub theta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub nu: f64,
    pub beta: f64,
    pub seed: u64,
    pub retries: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { n: 15, g: 6, p_target: 0.0, theta: 0.1, gamma: 0.05, rho: 0.1, nu: 0.01, beta: 0.2, seed: 0, retries: 3 }
    }
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 10] = ["n", "g", "p_target", "theta", "gamma", "rho", "nu", "beta", "seed", "retries"];

    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { line: i + 1, msg: format!("expected `key = value`, got `{line}`") });
            };
            c.set(k.trim(), v.trim()).map_err(|msg| Error::Parse { line: i + 1, msg })?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad value `{v}` for {k}"))
        }
        match key {
            "n" => self.n = num(key, value)?,
            "g" => self.g = num(key, value)?,
            "p_target" => self.p_target = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "retries" => self.retries = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n % 6 != 1 && self.n % 6 != 3 {
            return param(format!("n = {} is not 1 or 3 mod 6", self.n));
        }
        if !(4..=12).contains(&self.g) {
            return param(format!("g = {} outside 4..=12", self.g));
        }
        for (k, v) in [("theta", self.theta), ("gamma", self.gamma), ("nu", self.nu), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return param(format!("{k} = {v} must be a finite nonnegative number"));
            }
        }
        if !(0.0..1.0).contains(&self.rho) {
            return param(format!("rho = {} outside [0, 1)", self.rho));
        }
        if !(0.0..=1.0).contains(&self.p_target) {
            return param(format!("p_target = {} outside [0, 1]", self.p_target));
        }
        Ok(())
    }

    /// Violations of the intended ordering γ < θ < β, with ν, ρ < θ.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(self.gamma < self.theta) {
            w.push(format!("expected gamma < theta, got {} >= {}", self.gamma, self.theta));
        }
        if !(self.theta < self.beta) {
            w.push(format!("expected theta < beta, got {} >= {}", self.theta, self.beta));
        }
        if !(self.nu < self.theta) {
            w.push(format!("expected nu < theta, got {} >= {}", self.nu, self.theta));
        }
        if !(self.rho <= self.theta) {
            w.push(format!("expected rho <= theta, got {} > {}", self.rho, self.theta));
        }
        if self.p_target > 0.0 && self.p_target < (self.n as f64).powf(-self.nu) {
            w.push(format!("p_target {} is below n^-nu", self.p_target));
        }
        w
    }
}

/// Triangles chosen so far and the graph of still uncovered edges.
#[derive(Clone, Debug)]
pub struct PartialDecomposition {
    pub chosen: Vec<Triple>,
    pub uncovered: Graph,
}

impl PartialDecomposition {
    pub fn empty(n: u32) -> Self {
        Self { chosen: Vec::new(), uncovered: Graph::complete(n) }
    }

    pub fn n(&self) -> u32 {
        self.uncovered.n()
    }

    fn add(&mut self, ts: &[Triple]) -> Result<()> {
        for t in ts {
            for e in t.edges() {
                if !self.uncovered.remove_edge(e.0, e.1) {
                    return Err(Error::Invariant(format!("{t} reuses covered edge {e}")));
                }
            }
            self.chosen.push(*t);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegularizeMode {
    /// Fall back to all triangles when the regularizer's hypotheses fail.
    Lenient,
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageName {
    Reserve,
    Regularize,
    InducedFamily,
    Process,
    InternalGreedy,
    Crossing,
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageName::Reserve => "reserve",
            StageName::Regularize => "regularize",
            StageName::InducedFamily => "induced_family",
            StageName::Process => "process",
            StageName::InternalGreedy => "internal_greedy",
            StageName::Crossing => "crossing",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub level: usize,
    pub u_size: usize,
    pub next_size: usize,
    pub reserve_edges: usize,
    pub regularized: bool,
    pub regularize_note: String,
    pub a0_size: usize,
    pub excluded: usize,
    pub process_steps: usize,
    pub process_starved: bool,
    /// Process triangles dropped for completing a configuration with
    /// earlier levels.
    pub rejected_after_process: usize,
    pub internal_edges: usize,
    pub internal_triples: usize,
    pub crossing_triples: usize,
    pub d1: usize,
    pub d2: usize,
    pub failed: Option<(StageName, String)>,
}

impl StageReport {
    /// Stable `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("level", self.level.to_string());
        kv("u_size", self.u_size.to_string());
        kv("next_size", self.next_size.to_string());
        kv("reserve_edges", self.reserve_edges.to_string());
        kv("regularized", self.regularized.to_string());
        kv("regularize_note", self.regularize_note.clone());
        kv("a0_size", self.a0_size.to_string());
        kv("excluded", self.excluded.to_string());
        kv("process_steps", self.process_steps.to_string());
        kv("process_starved", self.process_starved.to_string());
        kv("rejected_after_process", self.rejected_after_process.to_string());
        kv("internal_edges", self.internal_edges.to_string());
        kv("internal_triples", self.internal_triples.to_string());
        kv("crossing_triples", self.crossing_triples.to_string());
        kv("d1", self.d1.to_string());
        kv("d2", self.d2.to_string());
        match &self.failed {
            None => kv("status", "ok".into()),
            Some((st, why)) => {
                kv("status", "failed".into());
                kv("failed_stage", st.to_string());
                kv("failure", why.clone());
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageOptions {
    pub regularize: RegularizeMode,
    /// Error factor C for the regularizer.
    pub c: f64,
    /// Candidate threshold for the internal greedy step.
    pub min_choices: usize,
}

impl Default for StageOptions {
    fn default() -> Self {
        Self { regularize: RegularizeMode::Lenient, c: 4.0, min_choices: 1 }
    }
}

/// One cover-down step: covers every uncovered edge of G[U_k] not inside
/// U_{k+1}. On failure `state` is left untouched.
pub fn cover_down_stage(
    state: &mut PartialDecomposition,
    level: usize,
    u_k: &[Vertex],
    u_next: &[Vertex],
    forbidden: &Forbidden,
    cfg: &PipelineConfig,
    opts: &StageOptions,
    seed: u64,
) -> Result<StageReport> {
    let n = state.n();
    let in_next: HashSet<Vertex> = u_next.iter().copied().collect();
    let in_k: HashSet<Vertex> = u_k.iter().copied().collect();
    if !in_next.iter().all(|v| in_k.contains(v)) {
        return param("U_{k+1} is not inside U_k");
    }
    let mut rep = StageReport {
        level,
        u_size: u_k.len(),
        next_size: u_next.len(),
        reserve_edges: 0,
        regularized: false,
        regularize_note: String::new(),
        a0_size: 0,
        excluded: 0,
        process_steps: 0,
        process_starved: false,
        rejected_after_process: 0,
        internal_edges: 0,
        internal_triples: 0,
        crossing_triples: 0,
        d1: 0,
        d2: 0,
        failed: None,
    };
    let mut work = state.clone();
    let outer: Vec<Vertex> = u_k.iter().copied().filter(|v| !in_next.contains(v)).collect();
    let gk = Graph::from_edges(
        n,
        work.uncovered.edges().into_iter().filter(|e| in_k.contains(&e.0) && in_k.contains(&e.1)),
    );
    let targets: Vec<Edge> =
        gk.edges().into_iter().filter(|e| !(in_next.contains(&e.0) && in_next.contains(&e.1))).collect();

    // reserve
    let r = sample_reserve(&gk, &outer, u_next, cfg.theta, child_seed(seed, "stage/reserve", 0))?;
    rep.reserve_edges = r.edge_count();

    // regularize on the process graph G_k − R − G[U_{k+1}], relabelled to 0..|U_k|
    let local: Vec<Vertex> = {
        let mut v = u_k.to_vec();
        v.sort_unstable();
        v
    };
    let index: HashMap<Vertex, Vertex> = local.iter().enumerate().map(|(i, &v)| (v, i as Vertex)).collect();
    let proc_edges: Vec<Edge> = targets.iter().copied().filter(|e| !r.has_edge(e.0, e.1)).collect();
    let gp = Graph::from_edges(local.len() as u32, proc_edges.iter().map(|e| Edge::new(index[&e.0], index[&e.1])));
    let all_tris = gp.triangles();
    let m = local.len() as f64;
    let p_hat = if m < 2.0 { 0.0 } else { 2.0 * gp.edge_count() as f64 / (m * (m - 1.0)) };
    let p = if cfg.p_target > 0.0 { cfg.p_target } else { p_hat };
    let kept_local: Vec<Triple> = if all_tris.is_empty() || p <= 0.0 {
        rep.regularize_note = "no triangles".into();
        Vec::new()
    } else {
        let fam = TriangleFamily::new(gp.clone(), all_tris.iter().copied())?;
        match regularize_triangles(&fam, p, opts.c, child_seed(seed, "stage/regularize", 0)) {
            Ok(reg) if reg.hypotheses.all_ok || opts.regularize == RegularizeMode::Strict => {
                if !reg.hypotheses.all_ok {
                    rep.failed = Some((StageName::Regularize, "hypotheses fail".into()));
                    return Ok(rep);
                }
                rep.regularized = true;
                rep.regularize_note = format!("kept {} of {}", reg.kept.len(), all_tris.len());
                reg.kept
            }
            Ok(_) => {
                rep.regularize_note = "hypotheses fail; all triangles used".into();
                all_tris.clone()
            }
            Err(e) if opts.regularize == RegularizeMode::Lenient => {
                rep.regularize_note = format!("{e}; all triangles used");
                all_tris.clone()
            }
            Err(e) => {
                rep.failed = Some((StageName::Regularize, e.to_string()));
                return Ok(rep);
            }
        }
    };
    let to_global = |t: &Triple| Triple::new(local[t.0[0] as usize], local[t.0[1] as usize], local[t.0[2] as usize]);
    let to_local = |t: &Triple| Triple::new(index[&t.0[0]], index[&t.0[1]], index[&t.0[2]]);

    // forbidden family induced by the triangles already chosen
    let mut sys = TripleSystem::from_triples(n, work.chosen.iter().copied())?;
    let kept_global: Vec<Triple> = kept_local.iter().map(to_global).collect();
    let (a0_global, local_forbidden) = match forbidden {
        Forbidden::Explicit(sup) => {
            let ind = derive_induced_family(sup, &work.chosen, &kept_global)?;
            let ex: HashSet<Triple> = ind.excluded.iter().copied().collect();
            rep.excluded = ex.len();
            let a0: Vec<Triple> = kept_global.iter().copied().filter(|t| !ex.contains(t)).collect();
            let a0_set: HashSet<Triple> = a0.iter().copied().collect();
            let fam: Vec<Vec<Triple>> = ind
                .family
                .configs()
                .iter()
                .filter(|c| c.iter().all(|t| a0_set.contains(t)))
                .map(|c| c.iter().map(to_local).collect())
                .collect();
            (a0, Forbidden::Explicit(ForbiddenFamily::new(fam)?))
        }
        other => {
            let mut a0 = Vec::with_capacity(kept_global.len());
            for t in &kept_global {
                if completes_forbidden(&mut sys, other, t)? {
                    rep.excluded += 1;
                } else {
                    a0.push(*t);
                }
            }
            (a0, other.clone())
        }
    };
    rep.a0_size = a0_global.len();

    // process
    let input = ProcessInput::new(gp.clone(), a0_global.iter().map(to_local).collect(), local_forbidden)?;
    let run = run_process(
        &input,
        Cutoff::Beta(cfg.beta.max(1e-9)),
        &ProcessOptions { record_every: Some(usize::MAX), threat_samples: 0, c: opts.c, predict: false },
        child_seed(seed, "stage/process", 0),
    )?;
    rep.process_steps = run.chosen.len();
    rep.process_starved = matches!(run.outcome, Outcome::Starved { .. });
    let mut accepted = Vec::new();
    for t in run.chosen.iter().map(to_global) {
        if completes_forbidden(&mut sys, forbidden, &t)? {
            rep.rejected_after_process += 1;
        } else {
            sys.insert(t)?;
            accepted.push(t);
        }
    }
    let check = verify_additions(n, &work.chosen, &accepted, forbidden, &[])?;
    ensure_clean(&check, "process stage")?;
    work.add(&accepted)?;

    // internal edges of U_k ∖ U_{k+1}
    let in_outer: HashSet<Vertex> = outer.iter().copied().collect();
    let internal: Vec<Edge> = work
        .uncovered
        .edges()
        .into_iter()
        .filter(|e| in_outer.contains(&e.0) && in_outer.contains(&e.1))
        .collect();
    rep.internal_edges = internal.len();
    let r_live = Graph::from_edges(n, r.edges().into_iter().filter(|e| work.uncovered.has_edge(e.0, e.1)));
    let a_set: HashSet<Triple> = gk.triangles().into_iter().collect();
    match cover_internal_greedy(
        &internal,
        &r_live,
        &a_set,
        forbidden,
        &work.chosen,
        opts.min_choices,
        child_seed(seed, "stage/internal", 0),
    )? {
        InternalOutcome::Covered(ts) => {
            rep.internal_triples = ts.len();
            work.add(&ts)?;
        }
        InternalOutcome::Failed { step, edge, candidates, .. } => {
            rep.failed = Some((
                StageName::InternalGreedy,
                format!("edge {edge} (step {step}) has {candidates} candidates"),
            ));
            return Ok(rep);
        }
    }

    // crossing edges
    let mut links = Vec::new();
    for &v in &outer {
        let l = LinkGraph::build(v, &work.uncovered, u_next, &a_set);
        links.push(l);
    }
    let q = if all_tris.is_empty() { 1.0 } else { rep.a0_size as f64 / all_tris.len() as f64 };
    let keep = sparsify_probability(n, cfg.gamma, cfg.theta, cfg.rho, p.max(1e-12), q.max(1e-12));
    match cover_crossing(&links, &work.uncovered, keep, forbidden, &work.chosen, child_seed(seed, "stage/crossing", 0))? {
        CrossingOutcome::Covered(cr) => {
            rep.crossing_triples = cr.triples.len();
            rep.d1 = cr.d1.len();
            rep.d2 = cr.d2.len();
            work.add(&cr.triples)?;
        }
        CrossingOutcome::Failed { center, reason, partial } => {
            rep.d1 = partial.d1.len();
            rep.d2 = partial.d2.len();
            rep.failed = Some((StageName::Crossing, format!("center {center}: {reason:?}")));
            return Ok(rep);
        }
    }
    let left: Vec<Edge> = targets.iter().copied().filter(|e| work.uncovered.has_edge(e.0, e.1)).collect();
    if !left.is_empty() {
        return Err(Error::Invariant(format!("{} target edges left after the stage, e.g. {}", left.len(), left[0])));
    }
    *state = work;
    Ok(rep)
}

// ---------------------------------------------------------------------------
// completion and generation

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompletionOutcome {
    Found(Vec<Triple>),
    /// The whole search tree was explored.
    Infeasible,
    BudgetExhausted { nodes: usize },
}

/// Randomized backtracking: decomposes the uncovered graph into triangles
/// that avoid the forbidden configurations together with `chosen`. Always
/// branches on an uncovered edge with fewest triangles.
pub fn complete_by_backtracking(
    state: &PartialDecomposition,
    forbidden: &Forbidden,
    node_budget: usize,
    seed: u64,
) -> Result<CompletionOutcome> {
    let n = state.n();
    let g = &state.uncovered;
    if !g.edge_count().is_multiple_of(3) || (0..n).any(|v| g.degree(v) % 2 == 1) {
        return Ok(CompletionOutcome::Infeasible);
    }
    struct Search<'a> {
        g: Graph,
        sys: TripleSystem,
        forbidden: &'a Forbidden,
        out: Vec<Triple>,
        nodes: usize,
        budget: usize,
        rng: crate::rng::Rng,
    }
    impl Search<'_> {
        fn rec(&mut self) -> Result<Option<bool>> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Ok(None);
            }
            let mut best: Option<(usize, Edge)> = None;
            for e in self.g.edges() {
                let k = self.g.codegree(e.0, e.1);
                if best.is_none_or(|(b, _)| k < b) {
                    best = Some((k, e));
                    if k == 0 {
                        break;
                    }
                }
            }
            let Some((_, e)) = best else { return Ok(Some(true)) };
            let mut ws: Vec<Vertex> =
                self.g.neighbors(e.0).iter().copied().filter(|&w| self.g.has_edge(w, e.1)).collect();
            ws.shuffle(&mut self.rng);
            for w in ws {
                let t = Triple::from_edge(e, w);
                if completes_forbidden(&mut self.sys, self.forbidden, &t)? {
                    continue;
                }
                for x in t.edges() {
                    self.g.remove_edge(x.0, x.1);
                }
                self.sys.insert(t)?;
                self.out.push(t);
                match self.rec()? {
                    Some(true) => return Ok(Some(true)),
                    None => return Ok(None),
                    Some(false) => {}
                }
                self.out.pop();
                self.sys.remove(&t);
                for x in t.edges() {
                    self.g.add_edge(x.0, x.1);
                }
            }
            Ok(Some(false))
        }
    }
    let mut s = Search {
        g: g.clone(),
        sys: TripleSystem::from_triples(n, state.chosen.iter().copied())?,
        forbidden,
        out: Vec::new(),
        nodes: 0,
        budget: node_budget,
        rng: substream(seed, "coverdown/backtrack"),
    };
    Ok(match s.rec()? {
        Some(true) => CompletionOutcome::Found(s.out),
        Some(false) => CompletionOutcome::Infeasible,
        None => CompletionOutcome::BudgetExhausted { nodes: s.nodes - 1 },
    })
}

/// Search nodes allowed per completion attempt.
pub const COMPLETION_BUDGET: usize = 20_000;
/// Levels smaller than this are left to the completion step.
pub const MIN_LEVEL: usize = 7;

#[derive(Clone, Debug)]
pub struct GenerateReport {
    pub system: Option<TripleSystem>,
    pub levels: Vec<usize>,
    pub stages: Vec<StageReport>,
    /// (start, attempt, outcome) per completion attempt.
    pub completion: Vec<(String, usize, String)>,
    pub warnings: Vec<String>,
    /// Stage name and attempts used when no system was produced.
    pub failure: Option<(String, usize)>,
}

impl GenerateReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "levels = {}\n",
            self.levels.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        ));
        for w in &self.warnings {
            s.push_str(&format!("warning = {w}\n"));
        }
        for (i, st) in self.stages.iter().enumerate() {
            s.push_str(&format!("[stage {i}]\n"));
            s.push_str(&st.to_text());
        }
        for (start, k, out) in &self.completion {
            s.push_str(&format!("completion = {start} attempt {k}: {out}\n"));
        }
        match &self.failure {
            None => s.push_str("status = ok\n"),
            Some((st, k)) => s.push_str(&format!("status = failed\nfailed_stage = {st}\nattempts = {k}\n")),
        }
        s
    }
}

/// Best-effort construction of an STS(n) of girth > g: cover-down stages
/// along a vortex, then randomized backtracking for whatever is left.
/// Any returned system has been verified.
pub fn generate(cfg: &PipelineConfig) -> Result<GenerateReport> {
    cfg.validate()?;
    let n = cfg.n;
    let forbidden = Forbidden::Erdos { g: cfg.g };
    let levels = build_vortex(n, cfg.rho, MIN_LEVEL, cfg.seed)?;
    let mut rep = GenerateReport {
        system: None,
        levels: levels.iter().map(|l| l.len()).collect(),
        stages: Vec::new(),
        completion: Vec::new(),
        warnings: cfg.warnings(),
        failure: None,
    };
    let mut state = PartialDecomposition::empty(n);
    let opts = StageOptions::default();
    'levels: for k in 0..levels.len().saturating_sub(1) {
        for attempt in 0..=cfg.retries {
            let seed = child_seed(cfg.seed, &format!("generate/stage{k}"), attempt as u64);
            let st = cover_down_stage(&mut state, k, &levels[k], &levels[k + 1], &forbidden, cfg, &opts, seed)?;
            let ok = st.failed.is_none();
            rep.stages.push(st);
            if ok {
                continue 'levels;
            }
        }
        // stages are best effort: leave the rest to the completion step
        break;
    }
    let starts = if state.chosen.is_empty() {
        vec![("after_stages", state.clone())]
    } else {
        vec![("after_stages", state.clone()), ("scratch", PartialDecomposition::empty(n))]
    };
    let mut attempts = 0;
    for (name, start) in &starts {
        for attempt in 0..=cfg.retries {
            attempts += 1;
            let seed = child_seed(cfg.seed, &format!("generate/complete/{name}"), attempt as u64);
            let out = complete_by_backtracking(start, &forbidden, COMPLETION_BUDGET, seed)?;
            let msg = match &out {
                CompletionOutcome::Found(ts) => format!("found {} triples", ts.len()),
                CompletionOutcome::Infeasible => "search exhausted".into(),
                CompletionOutcome::BudgetExhausted { nodes } => format!("budget exhausted after {nodes} nodes"),
            };
            rep.completion.push((name.to_string(), attempt, msg));
            match out {
                CompletionOutcome::Found(ts) => {
                    let mut all = start.chosen.clone();
                    all.extend(ts);
                    let sys = TripleSystem::from_triples(n, all)?;
                    if !verify_steiner(&sys).is_steiner || !girth(&sys, cfg.g)?.girth.exceeds(cfg.g) {
                        return Err(Error::Invariant("completed system failed verification".into()));
                    }
                    rep.system = Some(sys);
                    return Ok(rep);
                }
                // a deterministic dead end: other seeds explore the same tree
                CompletionOutcome::Infeasible => break,
                CompletionOutcome::BudgetExhausted { .. } => {}
            }
        }
    }
    rep.failure = Some(("completion".into(), attempts));
    Ok(rep)
}

/// Erdős configurations counted by j, for reports.
pub fn erdos_profile(sys: &TripleSystem, g: u32) -> Result<BTreeMap<usize, usize>> {
    let mut out = BTreeMap::new();
    if g >= 6 {
        for c in find_erdos_configs(sys, 6, g as usize, None)? {
            *out.entry(c.len() + 2).or_default() += 1;
        }
    }
    Ok(out)
}
