//! Degree regularization: fractional K5-based triangle weights and the
//! iterative k-uniform hypergraph booster.

use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::triples::{Edge, Triple, Vertex};
use rand::Rng;
use std::collections::{BTreeSet, HashMap};

/// A host graph with a distinguished set of its triangles.
#[derive(Clone, Debug)]
pub struct TriangleFamily {
    graph: Graph,
    tris: Vec<Triple>,
    ids: HashMap<Triple, usize>,
    edge_tris: HashMap<Edge, Vec<usize>>,
    /// Sorted third vertices of the family triangles on each edge.
    thirds: HashMap<Edge, Vec<Vertex>>,
    k5_per_edge: HashMap<Edge, u64>,
    k5_total: u64,
}

impl TriangleFamily {
    pub fn new(graph: Graph, triangles: impl IntoIterator<Item = Triple>) -> Result<Self> {
        let mut tris: Vec<Triple> = triangles.into_iter().collect();
        tris.sort_unstable();
        tris.dedup();
        if let Some(t) = tris.iter().find(|t| t.0[2] >= graph.n() || !graph.contains_triangle(t)) {
            return param(format!("triangle {t} is not a triangle of the host graph"));
        }
        let ids: HashMap<Triple, usize> = tris.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let mut edge_tris: HashMap<Edge, Vec<usize>> = HashMap::new();
        for (i, t) in tris.iter().enumerate() {
            for e in t.edges() {
                edge_tris.entry(e).or_default().push(i);
            }
        }
        let mut thirds: HashMap<Edge, Vec<Vertex>> = HashMap::new();
        for t in &tris {
            for e in t.edges() {
                thirds.entry(e).or_default().push(t.third(e).unwrap());
            }
        }
        for list in thirds.values_mut() {
            list.sort_unstable();
        }
        let mut fam =
            Self { graph, tris, ids, edge_tris, thirds, k5_per_edge: HashMap::new(), k5_total: 0 };
        // Each K5 holds 10 triangles, and 3 of them pass through any of its edges.
        let per_tri: Vec<u64> = fam
            .tris
            .iter()
            .map(|t| {
                let mut k = 0;
                fam.k5_extensions(t, |_, _| k += 1);
                k
            })
            .collect();
        fam.k5_per_edge = fam.edge_tris.iter().map(|(e, ids)| (*e, ids.iter().map(|&i| per_tri[i]).sum::<u64>() / 3)).collect();
        fam.k5_total = per_tri.iter().sum::<u64>() / 10;
        Ok(fam)
    }

    /// Complete graph with all of its triangles.
    pub fn complete(n: u32) -> Self {
        let g = Graph::complete(n);
        let t = g.triangles();
        Self::new(g, t).unwrap()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn triangles(&self) -> &[Triple] {
        &self.tris
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.ids.contains_key(t)
    }

    pub fn triangles_on(&self, e: Edge) -> usize {
        self.edge_tris.get(&e).map_or(0, |v| v.len())
    }

    pub fn k5_on(&self, e: Edge) -> u64 {
        self.k5_per_edge.get(&e).copied().unwrap_or(0)
    }

    pub fn k5_count(&self) -> u64 {
        self.k5_total
    }

    /// Visits every 5-set all of whose 10 triangles lie in the family,
    /// each once, as a sorted array.
    pub fn for_each_k5(&self, mut f: impl FnMut(&[Vertex; 5])) {
        for t in &self.tris {
            let [a, b, c] = t.0;
            self.k5_extensions(t, |d, e| {
                if d > c {
                    f(&[a, b, c, d, e]);
                }
            });
        }
    }

    fn thirds_of(&self, u: Vertex, v: Vertex) -> &[Vertex] {
        self.thirds.get(&Edge::new(u, v)).map_or(&[], |l| l.as_slice())
    }

    /// Pairs d < e such that T ∪ {d, e} spans a K5 of the family.
    fn k5_extensions(&self, t: &Triple, mut f: impl FnMut(Vertex, Vertex)) {
        let [a, b, c] = t.0;
        let cand = intersect(&intersect(self.thirds_of(a, b), self.thirds_of(a, c)), self.thirds_of(b, c));
        for (i, &d) in cand.iter().enumerate() {
            let rest = &cand[i + 1..];
            if rest.is_empty() {
                break;
            }
            let ok = intersect(&intersect(rest, self.thirds_of(a, d)), &intersect(self.thirds_of(b, d), self.thirds_of(c, d)));
            for e in ok {
                f(d, e);
            }
        }
    }
}

fn intersect(x: &[Vertex], y: &[Vertex]) -> Vec<Vertex> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(x[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub fn k5_edges(k: &[Vertex; 5]) -> Vec<Edge> {
    let mut out = Vec::with_capacity(10);
    for i in 0..5 {
        for j in i + 1..5 {
            out.push(Edge(k[i], k[j]));
        }
    }
    out
}

pub fn k5_triangles(k: &[Vertex; 5]) -> Vec<Triple> {
    let mut out = Vec::with_capacity(10);
    for i in 0..5 {
        for j in i + 1..5 {
            for l in j + 1..5 {
                out.push(Triple([k[i], k[j], k[l]]));
            }
        }
    }
    out
}

/// ψ_{e,J}(T): −1/6 if T ⊆ J meets e in one vertex, 1/3 if T ⊆ J otherwise, else 0.
pub fn psi_ej<T: Scalar>(e: Edge, j: &[Vertex; 5], t: &Triple) -> T {
    if !t.0.iter().all(|v| j.contains(v)) {
        return T::zero();
    }
    let meet = t.0.iter().filter(|&&v| e.contains(v)).count();
    if meet == 1 {
        T::from_ratio(-1, 6)
    } else {
        T::from_ratio(1, 3)
    }
}

/// c_e = (p²n − |𝒯(e)|)/|𝒯_5(e)| for every edge of the host graph.
pub fn edge_corrections<T: Scalar>(fam: &TriangleFamily, p2n: T) -> Result<HashMap<Edge, T>> {
    let mut c = HashMap::new();
    for e in fam.graph.edges() {
        let k5 = fam.k5_on(e);
        if k5 == 0 {
            return Err(Error::Hypothesis(format!("edge {e} lies in no K5 of the family")));
        }
        let te = T::from_count(fam.triangles_on(e) as u64);
        c.insert(e, (p2n - te) / T::from_count(k5));
    }
    Ok(c)
}

/// ψ(T) = 1/4 + (1/4) Σ_e c_e Σ_{J ∈ 𝒯_5(e)} ψ_{e,J}(T), indexed like
/// `fam.triangles()`.
pub fn fractional_weights<T: Scalar>(fam: &TriangleFamily, p2n: T) -> Result<Vec<T>> {
    let corr = edge_corrections(fam, p2n)?;
    let n = fam.graph.n() as usize;
    let mut c = vec![T::zero(); n * n];
    for (e, v) in &corr {
        c[e.0 as usize * n + e.1 as usize] = *v;
        c[e.1 as usize * n + e.0 as usize] = *v;
    }
    let ce = |u: Vertex, v: Vertex| c[u as usize * n + v as usize];
    let quarter = T::from_ratio(1, 4);
    let (third, sixth) = (T::from_ratio(1, 3), T::from_ratio(1, 6));
    let inside = |t: &Triple| ce(t.0[0], t.0[1]) + ce(t.0[0], t.0[2]) + ce(t.0[1], t.0[2]);
    Ok(fam
        .tris
        .iter()
        .map(|t| {
            // Within J = T ∪ {x, y}: edges of T and xy get 1/3, the six crossing edges −1/6.
            let own = inside(t);
            let mut acc = T::zero();
            fam.k5_extensions(t, |x, y| {
                let cross = t.0.iter().fold(T::zero(), |s, &v| s + ce(v, x) + ce(v, y));
                acc += third * (own + ce(x, y)) - sixth * cross;
            });
            quarter + quarter * acc
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleHypotheses {
    pub p_large_enough: bool,
    /// max_e |(|𝒯(e)| − p²n)| / p²n against 1/(12C⁵).
    pub worst_edge_deviation: f64,
    pub edge_tolerance: f64,
    pub edge_ok: bool,
    /// For |S| = 2, 3, 4: (min, max) extension counts normalized by p^{|S|}n.
    pub extension_ranges: Vec<(usize, f64, f64)>,
    pub extension_ok: bool,
    pub all_ok: bool,
}

/// Vertices u ∉ S with {a, b, u} in the family for every pair of S.
fn extension_count(fam: &TriangleFamily, s: &[Vertex]) -> usize {
    let mut common: Option<Vec<Vertex>> = None;
    for (i, &a) in s.iter().enumerate() {
        for &b in &s[i + 1..] {
            let list = fam.thirds_of(a, b);
            common = Some(match common {
                None => list.to_vec(),
                Some(c) => intersect(&c, list),
            });
        }
    }
    common.map_or(0, |c| c.iter().filter(|u| !s.contains(u)).count())
}

pub fn check_triangle_hypotheses(fam: &TriangleFamily, p: f64, c: f64) -> TriangleHypotheses {
    let g = &fam.graph;
    let n = g.n() as f64;
    let p2n = p * p * n;
    let edge_tolerance = 1.0 / (12.0 * c.powi(5));
    let worst_edge_deviation =
        g.edges().iter().map(|e| (fam.triangles_on(*e) as f64 - p2n).abs() / p2n).fold(0.0, f64::max);
    let mut ranges = Vec::new();
    let mut ext_ok = true;
    for size in 2..=4usize {
        let scale = p.powi(size as i32) * n;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut visit = |s: &[Vertex]| {
            let x = extension_count(fam, s) as f64 / scale;
            lo = lo.min(x);
            hi = hi.max(x);
        };
        for_each_clique(g, size, &mut visit);
        if lo.is_finite() {
            ext_ok &= lo >= 1.0 / c && hi <= c;
        }
        ranges.push((size, lo, hi));
    }
    let p_ok = p > n.powf(-1.0 / 6.0);
    let edge_ok = worst_edge_deviation <= edge_tolerance;
    TriangleHypotheses {
        p_large_enough: p_ok,
        worst_edge_deviation,
        edge_tolerance,
        edge_ok,
        extension_ranges: ranges,
        extension_ok: ext_ok,
        all_ok: p_ok && edge_ok && ext_ok,
    }
}

fn for_each_clique(g: &Graph, size: usize, f: &mut dyn FnMut(&[Vertex])) {
    fn rec(g: &Graph, size: usize, cur: &mut Vec<Vertex>, cands: &[Vertex], f: &mut dyn FnMut(&[Vertex])) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for (i, &v) in cands.iter().enumerate() {
            let next: Vec<Vertex> = cands[i + 1..].iter().copied().filter(|&u| g.has_edge(u, v)).collect();
            cur.push(v);
            rec(g, size, cur, &next, f);
            cur.pop();
        }
    }
    let all: Vec<Vertex> = (0..g.n()).collect();
    rec(g, size, &mut Vec::new(), &all, f);
}

#[derive(Clone, Debug)]
pub struct TriangleRegularization {
    pub hypotheses: TriangleHypotheses,
    pub psi: Vec<f64>,
    pub kept: Vec<Triple>,
    /// min / mean / max over edges of |𝒯′(e)|.
    pub degree_min: usize,
    pub degree_mean: f64,
    pub degree_max: usize,
    /// Edges whose 𝒯′-degree leaves (1 ± n^{−1/4})p²n/4.
    pub edges_out_of_bound: usize,
}

impl TriangleRegularization {
    pub fn within_bound(&self) -> bool {
        self.edges_out_of_bound == 0
    }
}

/// Samples 𝒯′ ⊆ 𝒯 with Pr[T ∈ 𝒯′] = ψ(T) independently.
pub fn regularize_triangles(fam: &TriangleFamily, p: f64, c: f64, seed: u64) -> Result<TriangleRegularization> {
    if !(p > 0.0 && p <= 1.0) || !(c >= 1.0) {
        return param("need 0 < p <= 1 and C >= 1");
    }
    let hypotheses = check_triangle_hypotheses(fam, p, c);
    let n = fam.graph.n() as f64;
    let p2n = p * p * n;
    let psi = fractional_weights::<f64>(fam, p2n)?;
    let tol = 1e-9;
    if let Some((i, x)) = psi.iter().enumerate().find(|(_, &x)| !(-tol..=1.0 + tol).contains(&x)) {
        return Err(Error::Invariant(format!("psi({}) = {x} outside [0, 1]", fam.tris[i])));
    }
    for (e, ids) in &fam.edge_tris {
        let s: f64 = ids.iter().map(|&i| psi[i]).sum();
        if ((s - p2n / 4.0) / (p2n / 4.0)).abs() > 1e-6 {
            return Err(Error::Invariant(format!("psi mass at edge {e} is {s}, expected {}", p2n / 4.0)));
        }
    }
    let mut rng = substream(seed, "regularize/triangles");
    let kept: Vec<Triple> = fam.tris.iter().zip(&psi).filter(|(_, &x)| rng.gen::<f64>() < x).map(|(t, _)| *t).collect();
    let mut deg: HashMap<Edge, usize> = HashMap::new();
    for t in &kept {
        for e in t.edges() {
            *deg.entry(e).or_default() += 1;
        }
    }
    let edges = fam.graph.edges();
    let target = p2n / 4.0;
    let slack = n.powf(-0.25);
    let ds: Vec<usize> = edges.iter().map(|e| deg.get(e).copied().unwrap_or(0)).collect();
    let out = ds.iter().filter(|&&d| ((d as f64) - target).abs() > slack * target).count();
    Ok(TriangleRegularization {
        hypotheses,
        degree_min: ds.iter().copied().min().unwrap_or(0),
        degree_max: ds.iter().copied().max().unwrap_or(0),
        degree_mean: if ds.is_empty() { 0.0 } else { ds.iter().sum::<usize>() as f64 / ds.len() as f64 },
        edges_out_of_bound: out,
        psi,
        kept,
    })
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformHypergraph {
    n: usize,
    k: usize,
    edges: BTreeSet<Vec<Vertex>>,
    degrees: Vec<usize>,
}

impl UniformHypergraph {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, k, edges: BTreeSet::new(), degrees: vec![0; n] }
    }

    pub fn from_edges(n: usize, k: usize, edges: impl IntoIterator<Item = Vec<Vertex>>) -> Result<Self> {
        let mut h = Self::new(n, k);
        for e in edges {
            h.insert(e)?;
        }
        Ok(h)
    }

    pub fn insert(&mut self, mut e: Vec<Vertex>) -> Result<bool> {
        e.sort_unstable();
        if e.len() != self.k || e.windows(2).any(|w| w[0] == w[1]) || e.iter().any(|&v| v as usize >= self.n) {
            return param(format!("{e:?} is not a {}-subset of [0, {})", self.k, self.n));
        }
        if self.edges.contains(&e) {
            return Ok(false);
        }
        for &v in &e {
            self.degrees[v as usize] += 1;
        }
        self.edges.insert(e);
        Ok(true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Vec<Vertex>> + '_ {
        self.edges.iter()
    }

    pub fn contains(&self, e: &[Vertex]) -> bool {
        self.edges.contains(e)
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(0)
    }

    pub fn union(&self, other: &UniformHypergraph) -> UniformHypergraph {
        let mut u = self.clone();
        for e in other.edges() {
            u.insert(e.clone()).unwrap();
        }
        u
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundTrace {
    /// Round index t ≥ 1; G(t) was sampled with the weights of step t−1.
    pub t: usize,
    pub f_prev: usize,
    pub f: usize,
    pub w_total: f64,
    pub max_prob: f64,
    pub prob_bound: f64,
    pub sampled: usize,
    pub round_max_degree: usize,
    /// Vertices whose expected fresh degree fell below 13w_v/16 or above w_v.
    pub expectation_low: usize,
    pub expectation_high: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiveUp {
    /// F(t) ≥ F(t−1)/2.
    NoHalving,
    /// G(t) has maximum degree above 4F(t−1).
    DegreeSpike,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HypergraphOutcome {
    Success { g_prime: UniformHypergraph, rounds: Vec<RoundTrace>, spread: usize, max_degree: usize },
    GaveUp { reason: GiveUp, rounds: Vec<RoundTrace> },
}

#[derive(Clone, Copy, Debug)]
pub struct HypergraphOptions {
    /// Reject H whose maximum degree exceeds C(n−1,k−1)/(36·2^k).
    pub enforce_degree_hypothesis: bool,
}

impl Default for HypergraphOptions {
    fn default() -> Self {
        Self { enforce_degree_hypothesis: true }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Elementary symmetric polynomials e_0..e_m of `w`.
fn elementary(w: impl Iterator<Item = f64>, m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for x in w {
        for i in (1..=m).rev() {
            e[i] += x * e[i - 1];
        }
    }
    e
}

pub fn regularize_hypergraph(
    g: &UniformHypergraph,
    h: &UniformHypergraph,
    seed: u64,
    opts: HypergraphOptions,
) -> Result<HypergraphOutcome> {
    let (n, k) = (g.n, g.k);
    if h.n != n || h.k != k {
        return param("G and H must share vertex count and uniformity");
    }
    if !(2..=4).contains(&k) || n > 200 {
        return Err(Error::Feasibility(format!("sampling supports 2 <= k <= 4 and n <= 200, got k={k}, n={n}")));
    }
    if let Some(e) = g.edges().find(|e| !h.contains(e)) {
        return param(format!("G is not contained in H (edge {e:?})"));
    }
    let cap = binom(n - 1, k - 1) / (36.0 * 2f64.powi(k as i32));
    if opts.enforce_degree_hypothesis && h.max_degree() as f64 > cap {
        return param(format!("H has maximum degree {} above C(n-1,k-1)/(36*2^k) = {cap:.3}", h.max_degree()));
    }
    let d_max0 = g.max_degree();
    let log2n = (n as f64).ln().powi(2);
    let mut rng = substream(seed, "regularize/hypergraph");
    let mut added = UniformHypergraph::new(n, k); // (⋃ G(i)) ∖ H
    let mut prior: BTreeSet<Vec<Vertex>> = BTreeSet::new(); // ⋃ G(i)
    let mut rounds = Vec::new();
    let degrees = |added: &UniformHypergraph| -> Vec<usize> { (0..n).map(|v| g.degrees[v] + added.degrees[v]).collect() };
    let spread = |d: &[usize]| d.iter().max().unwrap() - d.iter().min().unwrap();
    let mut d = degrees(&added);
    let mut f_prev = spread(&d);
    if (f_prev as f64) <= log2n {
        return Ok(HypergraphOutcome::Success { g_prime: added, rounds, spread: f_prev, max_degree: d_max0 });
    }
    for t in 1.. {
        let dmax = *d.iter().max().unwrap();
        let w: Vec<f64> = d.iter().map(|&dv| (dmax + f_prev - dv) as f64).collect();
        let big_w = elementary(w.iter().copied(), k - 1)[k - 1];
        if k == 3 {
            let s1: f64 = w.iter().sum();
            let s2: f64 = w.iter().map(|x| x * x).sum();
            let pairs = (s1 * s1 - s2) / 2.0;
            if (pairs - big_w).abs() > 1e-9 * big_w.max(1.0) {
                return Err(Error::Invariant(format!("pair sum {pairs} disagrees with DP value {big_w}")));
            }
        }
        if big_w <= 0.0 {
            return Ok(HypergraphOutcome::Success { g_prime: added, rounds, spread: f_prev, max_degree: dmax });
        }
        let mut top = w.clone();
        top.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let max_prob = top[..k].iter().product::<f64>() / big_w;
        let prob_bound = 2f64.powi(k as i32) * f_prev as f64 / binom(n - 1, k - 1);
        if max_prob > prob_bound * (1.0 + 1e-9) || max_prob > 1.0 {
            return Err(Error::Invariant(format!("inclusion probability {max_prob} exceeds bound {prob_bound}")));
        }
        // expected fresh degree per vertex against [13w/16, w]
        let (mut low, mut high) = (0, 0);
        let mut blocked: Vec<f64> = vec![0.0; n];
        for e in prior.iter().chain(h.edges().filter(|e| !prior.contains(*e))) {
            let pr = e.iter().map(|&v| w[v as usize]).product::<f64>() / big_w;
            for &v in e {
                blocked[v as usize] += pr;
            }
        }
        for v in 0..n {
            let others = elementary(w.iter().enumerate().filter(|(u, _)| *u != v).map(|(_, x)| *x), k - 1)[k - 1];
            let expect = w[v] * others / big_w - blocked[v];
            if expect < 13.0 * w[v] / 16.0 {
                low += 1;
            }
            if expect > w[v] * (1.0 + 1e-9) {
                high += 1;
            }
        }
        // G(t): every k-set independently
        let mut round = UniformHypergraph::new(n, k);
        let mut set: Vec<Vertex> = (0..k as Vertex).collect();
        loop {
            let pr = set.iter().map(|&v| w[v as usize]).product::<f64>() / big_w;
            if rng.gen::<f64>() < pr {
                round.insert(set.clone())?;
            }
            // next k-subset in lexicographic order
            let mut i = k;
            while i > 0 && set[i - 1] as usize == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            set[i - 1] += 1;
            for j in i..k {
                set[j] = set[j - 1] + 1;
            }
        }
        for e in round.edges() {
            prior.insert(e.clone());
            if !h.contains(e) {
                added.insert(e.clone())?;
            }
        }
        d = degrees(&added);
        let f = spread(&d);
        let round_max = round.max_degree();
        rounds.push(RoundTrace {
            t,
            f_prev,
            f,
            w_total: big_w,
            max_prob,
            prob_bound,
            sampled: round.len(),
            round_max_degree: round_max,
            expectation_low: low,
            expectation_high: high,
        });
        if round_max > 4 * f_prev {
            return Ok(HypergraphOutcome::GaveUp { reason: GiveUp::DegreeSpike, rounds });
        }
        if (f as f64) <= log2n {
            let max_degree = *d.iter().max().unwrap();
            if max_degree > 9 * d_max0 {
                return Err(Error::Invariant(format!("max degree {max_degree} exceeds 9*d_max = {}", 9 * d_max0)));
            }
            return Ok(HypergraphOutcome::Success { g_prime: added, rounds, spread: f, max_degree });
        }
        if 2 * f >= f_prev {
            return Ok(HypergraphOutcome::GaveUp { reason: GiveUp::NoHalving, rounds });
        }
        f_prev = f;
    }
    unreachable!()
}
