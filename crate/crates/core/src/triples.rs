//! Triple systems, girth, Erdős configurations and Steiner verification.

use crate::error::{param, Error, Result};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

pub type Vertex = u32;

/// Unordered vertex pair stored as (min, max).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Edge(pub Vertex, pub Vertex);

impl Edge {
    pub fn new(a: Vertex, b: Vertex) -> Self {
        debug_assert!(a != b, "loop edge {a}");
        if a < b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.0 == v || self.1 == v
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// Vertex triple, always sorted ascending.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Triple(pub [Vertex; 3]);

impl Triple {
    /// Panics on repeated vertices; use [`Triple::try_new`] for input data.
    pub fn new(a: Vertex, b: Vertex, c: Vertex) -> Self {
        Self::try_new(a, b, c).expect("triple with repeated vertex")
    }

    pub fn try_new(a: Vertex, b: Vertex, c: Vertex) -> Result<Self> {
        let mut v = [a, b, c];
        v.sort_unstable();
        if v[0] == v[1] || v[1] == v[2] {
            return Err(Error::Input(format!("triple {a} {b} {c} repeats a vertex")));
        }
        Ok(Triple(v))
    }

    pub fn from_edge(e: Edge, w: Vertex) -> Self {
        Self::new(e.0, e.1, w)
    }

    pub fn vertices(&self) -> [Vertex; 3] {
        self.0
    }

    pub fn edges(&self) -> [Edge; 3] {
        let [a, b, c] = self.0;
        [Edge(a, b), Edge(a, c), Edge(b, c)]
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.0.contains(&v)
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        self.contains(e.0) && self.contains(e.1)
    }

    pub fn shares_edge(&self, other: &Triple) -> bool {
        self.0.iter().filter(|v| other.contains(**v)).count() >= 2
    }

    /// The vertex opposite to `e`, if `e` is an edge of this triple.
    pub fn third(&self, e: Edge) -> Option<Vertex> {
        if !self.contains_edge(e) {
            return None;
        }
        self.0.iter().copied().find(|&v| !e.contains(v))
    }

    pub fn map(&self, perm: &[Vertex]) -> Triple {
        let [a, b, c] = self.0;
        Triple::new(perm[a as usize], perm[b as usize], perm[c as usize])
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.0[0], self.0[1], self.0[2])
    }
}

pub fn span<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> usize {
    let mut vs: Vec<Vertex> = triples.into_iter().flat_map(|t| t.0).collect();
    vs.sort_unstable();
    vs.dedup();
    vs.len()
}

pub fn is_edge_disjoint(triples: &[Triple]) -> bool {
    let mut seen = HashSet::new();
    triples.iter().flat_map(|t| t.edges()).all(|e| seen.insert(e))
}

/// Lookup interface used by the connected-set search.
pub trait TripleLookup {
    fn for_each_on_pair(&self, e: Edge, f: &mut dyn FnMut(Triple));
    fn for_each_on_vertex(&self, v: Vertex, f: &mut dyn FnMut(Triple));
    fn contains_triple(&self, t: &Triple) -> bool;
}

#[derive(Clone, Debug, Default)]
pub struct TripleSystem {
    n: u32,
    triples: BTreeSet<Triple>,
    edge_index: HashMap<Edge, Vec<Triple>>,
    vertex_index: Vec<Vec<Triple>>,
}

impl TripleSystem {
    pub fn new(n: u32) -> Self {
        Self { n, triples: BTreeSet::new(), edge_index: HashMap::new(), vertex_index: vec![Vec::new(); n as usize] }
    }

    pub fn from_triples(n: u32, triples: impl IntoIterator<Item = Triple>) -> Result<Self> {
        let mut s = Self::new(n);
        for t in triples {
            s.insert(t)?;
        }
        Ok(s)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn to_vec(&self) -> Vec<Triple> {
        self.triples.iter().copied().collect()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    /// Inserts a triple; returns false if it was already present.
    pub fn insert(&mut self, t: Triple) -> Result<bool> {
        if t.0[2] >= self.n {
            return Err(Error::Input(format!("triple {t} has a vertex outside [0, {})", self.n)));
        }
        if !self.triples.insert(t) {
            return Ok(false);
        }
        for e in t.edges() {
            self.edge_index.entry(e).or_default().push(t);
        }
        for v in t.0 {
            self.vertex_index[v as usize].push(t);
        }
        Ok(true)
    }

    pub fn remove(&mut self, t: &Triple) -> bool {
        if !self.triples.remove(t) {
            return false;
        }
        for e in t.edges() {
            if let Some(list) = self.edge_index.get_mut(&e) {
                list.retain(|x| x != t);
                if list.is_empty() {
                    self.edge_index.remove(&e);
                }
            }
        }
        for v in t.0 {
            self.vertex_index[v as usize].retain(|x| x != t);
        }
        true
    }

    pub fn on_edge(&self, e: Edge) -> &[Triple] {
        self.edge_index.get(&e).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn on_vertex(&self, v: Vertex) -> &[Triple] {
        &self.vertex_index[v as usize]
    }

    /// Every edge in at most one triple.
    pub fn is_partial_steiner(&self) -> bool {
        self.edge_index.values().all(|l| l.len() <= 1)
    }

    pub fn is_steiner(&self) -> bool {
        let n = self.n as usize;
        self.is_partial_steiner() && self.edge_index.len() == n * n.saturating_sub(1) / 2
    }

    /// Rebuilds the indices from scratch and compares with the live ones.
    pub fn index_consistent(&self) -> bool {
        let fresh = Self::from_triples(self.n, self.triples.iter().copied());
        let Ok(fresh) = fresh else { return false };
        let norm = |m: &HashMap<Edge, Vec<Triple>>| {
            m.iter()
                .map(|(e, l)| {
                    let mut l = l.clone();
                    l.sort();
                    (*e, l)
                })
                .collect::<BTreeMap<_, _>>()
        };
        norm(&fresh.edge_index) == norm(&self.edge_index)
    }

    /// Applies a vertex permutation.
    pub fn relabel(&self, perm: &[Vertex]) -> Result<TripleSystem> {
        if perm.len() != self.n as usize {
            return param("permutation length differs from vertex count");
        }
        Self::from_triples(self.n, self.triples.iter().map(|t| t.map(perm)))
    }
}

impl TripleLookup for TripleSystem {
    fn for_each_on_pair(&self, e: Edge, f: &mut dyn FnMut(Triple)) {
        for t in self.on_edge(e) {
            f(*t);
        }
    }

    fn for_each_on_vertex(&self, v: Vertex, f: &mut dyn FnMut(Triple)) {
        if (v as usize) < self.vertex_index.len() {
            for t in &self.vertex_index[v as usize] {
                f(*t);
            }
        }
    }

    fn contains_triple(&self, t: &Triple) -> bool {
        self.contains(t)
    }
}

/// A small set of triples with derived statistics.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub triples: Vec<Triple>,
    pub vertex_span: usize,
    pub is_edge_disjoint: bool,
}

impl Configuration {
    pub fn new(mut triples: Vec<Triple>) -> Self {
        triples.sort_unstable();
        triples.dedup();
        let vertex_span = span(&triples);
        let is_edge_disjoint = is_edge_disjoint(&triples);
        Self { triples, vertex_span, is_edge_disjoint }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// `Some(j)` if this is an Erdős j-configuration.
    pub fn erdos_order(&self) -> Option<usize> {
        is_erdos_configuration(&self.triples).then_some(self.triples.len() + 2)
    }
}

/// Checks the Erdős j-configuration property with j = |triples| + 2:
/// span exactly j, edge-disjoint, and every w-subset with
/// 2 ≤ w ≤ j−3 spanning at least w+3 vertices.
pub fn is_erdos_configuration(triples: &[Triple]) -> bool {
    let m = triples.len();
    let j = m + 2;
    if j < 5 || m > 20 || span(triples) != j || !is_edge_disjoint(triples) {
        return false;
    }
    for mask in 1u32..(1 << m) {
        let w = mask.count_ones() as usize;
        if w < 2 || w > j - 3 {
            continue;
        }
        let sub = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| &triples[i]);
        if span(sub) < w + 3 {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Girth {
    Finite(u32),
    /// No (j, j−2)-configuration for any j up to the bound.
    Exceeds(u32),
}

impl Girth {
    /// True iff the girth is certified larger than `g`.
    pub fn exceeds(&self, g: u32) -> bool {
        match *self {
            Girth::Finite(x) => x > g,
            Girth::Exceeds(b) => b >= g,
        }
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Finite(g) => write!(f, "{g}"),
            Girth::Exceeds(b) => write!(f, "> {b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GirthCertificate {
    pub girth: Girth,
    pub witness: Option<Configuration>,
}

/// Pruning regime for the connected-set search.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Prune {
    /// Only the span upper bound.
    Span,
    /// Subsets of an Erdős configuration: m-sets (m ≥ 2) span ≥ m+3.
    Erdos,
}

struct ConnectedSearch<'a, L: TripleLookup + ?Sized> {
    lookup: &'a L,
    size: usize,
    max_span: usize,
    prune: Prune,
    /// Only triples strictly greater than this may be added (root-min mode).
    floor: Option<Triple>,
    seen: HashSet<Vec<Triple>>,
}

impl<'a, L: TripleLookup + ?Sized> ConnectedSearch<'a, L> {
    /// Calls `out` once per distinct connected, edge-disjoint set of
    /// `size` triples containing `start` and spanning ≤ `max_span`.
    fn run(&mut self, start: Vec<Triple>, out: &mut dyn FnMut(&[Triple], &[Vertex])) {
        self.seen.clear();
        let mut set = start;
        set.sort_unstable();
        let mut verts: Vec<Vertex> = set.iter().flat_map(|t| t.0).collect();
        verts.sort_unstable();
        verts.dedup();
        if verts.len() > self.max_span || !is_edge_disjoint(&set) {
            return;
        }
        self.grow(&mut set, &verts, out);
    }

    fn grow(&mut self, set: &mut Vec<Triple>, verts: &[Vertex], out: &mut dyn FnMut(&[Triple], &[Vertex])) {
        let m = set.len();
        if self.prune == Prune::Erdos && m >= 2 && verts.len() < m + 3 {
            return;
        }
        if !self.seen.insert(set.clone()) {
            return;
        }
        if m == self.size {
            out(set, verts);
            return;
        }
        let mut cands: Vec<Triple> = Vec::new();
        let admissible = |t: &Triple, set: &[Triple], floor: Option<Triple>| {
            floor.is_none_or(|f| *t > f) && !set.contains(t) && set.iter().all(|s| !s.shares_edge(t))
        };
        for (i, &a) in verts.iter().enumerate() {
            for &b in &verts[i + 1..] {
                self.lookup.for_each_on_pair(Edge(a, b), &mut |t| {
                    if admissible(&t, set, self.floor) {
                        cands.push(t);
                    }
                });
            }
        }
        if verts.len() + 2 <= self.max_span {
            for &v in verts {
                self.lookup.for_each_on_vertex(v, &mut |t| {
                    let inside = t.0.iter().filter(|x| verts.binary_search(x).is_ok()).count();
                    if inside == 1 && admissible(&t, set, self.floor) {
                        cands.push(t);
                    }
                });
            }
        }
        cands.sort_unstable();
        cands.dedup();
        for t in cands {
            let mut nv = verts.to_vec();
            for x in t.0 {
                if let Err(p) = nv.binary_search(&x) {
                    nv.insert(p, x);
                }
            }
            if nv.len() > self.max_span {
                continue;
            }
            let pos = set.binary_search(&t).unwrap_err();
            set.insert(pos, t);
            self.grow(set, &nv, out);
            set.remove(pos);
        }
    }
}

/// Triples of `lookup` lying inside the sorted vertex set `verts`.
fn triples_inside<L: TripleLookup + ?Sized>(lookup: &L, verts: &[Vertex]) -> Vec<Triple> {
    let mut found = Vec::new();
    for (i, &a) in verts.iter().enumerate() {
        for &b in &verts[i + 1..] {
            lookup.for_each_on_pair(Edge(a, b), &mut |t| {
                if t.0.iter().all(|x| verts.binary_search(x).is_ok()) {
                    found.push(t);
                }
            });
        }
    }
    found.sort_unstable();
    found.dedup();
    found
}

/// Smallest j in [4, g_max] admitting a (j, j−2)-configuration, with the
/// lexicographically least witness at that j.
pub fn girth(sys: &TripleSystem, g_max: u32) -> Result<GirthCertificate> {
    if g_max < 4 {
        return param(format!("g_max must be at least 4, got {g_max}"));
    }
    // j = 4: two triples on a common edge.
    let mut best: Option<Vec<Triple>> = None;
    for list in sys.edge_index.values() {
        if list.len() >= 2 {
            let mut l = list.clone();
            l.sort_unstable();
            let w = vec![l[0], l[1]];
            if best.as_ref().is_none_or(|b| w < *b) {
                best = Some(w);
            }
        }
    }
    if let Some(w) = best {
        return Ok(GirthCertificate { girth: Girth::Finite(4), witness: Some(Configuration::new(w)) });
    }
    for j in 5..=g_max as usize {
        let mut best: Option<Vec<Triple>> = None;
        let mut search = ConnectedSearch {
            lookup: sys,
            size: j - 3,
            max_span: j,
            prune: Prune::Span,
            floor: None,
            seen: HashSet::new(),
        };
        for root in sys.triples() {
            search.floor = Some(*root);
            search.run(vec![*root], &mut |set, verts| {
                for t in triples_inside(sys, verts) {
                    if set.contains(&t) {
                        continue;
                    }
                    let mut w = set.to_vec();
                    w.push(t);
                    w.sort_unstable();
                    if best.as_ref().is_none_or(|b| w < *b) {
                        best = Some(w);
                    }
                }
            });
        }
        if let Some(w) = best {
            return Ok(GirthCertificate { girth: Girth::Finite(j as u32), witness: Some(Configuration::new(w)) });
        }
    }
    Ok(GirthCertificate { girth: Girth::Exceeds(g_max), witness: None })
}

/// All Erdős j-configurations of `lookup` for j_min ≤ j ≤ j_max, restricted to
/// those containing every anchor triple. Sorted by (j, triples).
pub fn find_erdos_configs_in<L: TripleLookup + ?Sized>(
    lookup: &L,
    roots: &mut dyn Iterator<Item = Triple>,
    j_min: usize,
    j_max: usize,
    anchor: Option<&[Triple]>,
) -> Result<Vec<Configuration>> {
    if j_min < 4 || j_min > j_max {
        return param(format!("need 4 <= j_min <= j_max, got {j_min}..{j_max}"));
    }
    if j_max > 12 {
        return param(format!("j_max = {j_max} is beyond the supported range (<= 12)"));
    }
    let anchor: Vec<Triple> = anchor.map(|a| a.to_vec()).unwrap_or_default();
    if anchor.iter().any(|t| !lookup.contains_triple(t)) || !is_edge_disjoint(&anchor) {
        return Ok(Vec::new());
    }
    let roots: Vec<Triple> = if anchor.is_empty() { roots.collect() } else { vec![anchor[0]] };
    let mut found: BTreeSet<(usize, Vec<Triple>)> = BTreeSet::new();
    for j in j_min.max(5)..=j_max {
        if anchor.len() > j - 2 {
            continue;
        }
        let mut search = ConnectedSearch {
            lookup,
            size: j - 3,
            max_span: j,
            prune: Prune::Erdos,
            floor: None,
            seen: HashSet::new(),
        };
        for root in &roots {
            search.floor = if anchor.is_empty() { Some(*root) } else { None };
            let mut start = vec![*root];
            if !anchor.is_empty() {
                start = vec![anchor[0]];
            }
            search.run(start, &mut |set, verts| {
                if verts.len() != j {
                    return;
                }
                for t in triples_inside(lookup, verts) {
                    if set.contains(&t) || set.iter().any(|s| s.shares_edge(&t)) {
                        continue;
                    }
                    let mut w = set.to_vec();
                    w.push(t);
                    w.sort_unstable();
                    if anchor.iter().all(|a| w.binary_search(a).is_ok()) && is_erdos_configuration(&w) {
                        found.insert((j, w));
                    }
                }
            });
        }
    }
    Ok(found.into_iter().map(|(_, w)| Configuration::new(w)).collect())
}

pub fn find_erdos_configs(
    sys: &TripleSystem,
    j_min: usize,
    j_max: usize,
    anchor: Option<&[Triple]>,
) -> Result<Vec<Configuration>> {
    find_erdos_configs_in(sys, &mut sys.triples().copied(), j_min, j_max, anchor)
}

/// Number of labeled Erdős j-configurations on vertices {0..j−1} that
/// contain the triple {0,1,2}.
pub fn count_erd_j(j: u32) -> Result<u64> {
    if !(4..=10).contains(&j) {
        return param(format!("count_erd_j supports 4 <= j <= 10, got {j}"));
    }
    if j == 4 {
        return Ok(0);
    }
    let j = j as usize;
    let mut triples = Vec::new();
    for a in 0..j {
        for b in a + 1..j {
            for c in b + 1..j {
                triples.push([a, b, c]);
            }
        }
    }
    let pair = |a: usize, b: usize| {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        a * j + b
    };
    let masks: Vec<u128> =
        triples.iter().map(|&[a, b, c]| (1u128 << pair(a, b)) | (1u128 << pair(a, c)) | (1u128 << pair(b, c))).collect();
    let vmasks: Vec<u16> = triples.iter().map(|t| t.iter().fold(0, |m, &v| m | 1 << v)).collect();
    let on_vertex: Vec<Vec<usize>> = (0..j).map(|v| (0..triples.len()).filter(|&i| triples[i].contains(&v)).collect()).collect();
    let mut st = ErdCounter { j, triples: &triples, edge_masks: &masks, vmasks: &vmasks, on_vertex: &on_vertex, count: 0, chosen: Vec::new() };
    let mut deg = vec![0u8; j];
    for v in [0, 1, 2] {
        deg[v] = 1;
    }
    st.chosen.push(0);
    st.rec(masks[0], 1u128, &mut deg, &[0, vmasks[0]]);
    Ok(st.count)
}

struct ErdCounter<'a> {
    j: usize,
    triples: &'a [[usize; 3]],
    edge_masks: &'a [u128],
    vmasks: &'a [u16],
    on_vertex: &'a [Vec<usize>],
    count: u64,
    chosen: Vec<usize>,
}

impl ErdCounter<'_> {
    // Each target set is reached along exactly one branch: at every node we
    // branch on the first member (in index order) of the target that passes
    // through the least deficient vertex (or, if none is deficient, the first
    // remaining member), excluding the earlier candidates in sibling branches.
    //
    // `unions[s]` is the vertex mask of the subset `s` of the chosen triples;
    // every subset is checked against the sparseness bound when its last
    // member is added, so a full-size leaf only needs its span checked.
    fn rec(&mut self, used_edges: u128, excluded: u128, deg: &mut Vec<u8>, unions: &[u16]) {
        let j = self.j;
        let m = self.chosen.len();
        if m == j - 2 {
            if deg.iter().all(|&d| d >= 2) {
                debug_assert!(is_erdos_configuration(
                    &self
                        .chosen
                        .iter()
                        .map(|&i| {
                            let [a, b, c] = self.triples[i];
                            Triple::new(a as u32, b as u32, c as u32)
                        })
                        .collect::<Vec<_>>()
                ));
                self.count += 1;
            }
            return;
        }
        let remaining = j - 2 - m;
        let need: usize = deg.iter().map(|&d| 2usize.saturating_sub(d as usize)).sum();
        if need > 3 * remaining {
            return;
        }
        let allowed = |i: usize| excluded >> i & 1 == 0 && used_edges & self.edge_masks[i] == 0;
        let cands: Vec<usize> = match deg.iter().position(|&d| d < 2) {
            Some(v) => self.on_vertex[v].iter().copied().filter(|&i| allowed(i)).collect(),
            None => (0..self.triples.len()).filter(|&i| allowed(i)).collect(),
        };
        let mut excl = excluded;
        let mut next = vec![0u16; unions.len() * 2];
        for i in cands {
            let vi = self.vmasks[i];
            let sparse = (1..unions.len()).all(|s| {
                let w = s.count_ones() as usize + 1;
                w > j - 3 || (unions[s] | vi).count_ones() as usize >= w + 3
            });
            if !sparse {
                excl |= 1u128 << i;
                continue;
            }
            next[..unions.len()].copy_from_slice(unions);
            for s in 0..unions.len() {
                next[unions.len() + s] = unions[s] | vi;
            }
            for &v in &self.triples[i] {
                deg[v] += 1;
            }
            self.chosen.push(i);
            let keep = if m + 1 < j - 2 { &next[..] } else { &next[..0] };
            self.rec(used_edges | self.edge_masks[i], excl | (1u128 << i), deg, keep);
            self.chosen.pop();
            for &v in &self.triples[i] {
                deg[v] -= 1;
            }
            excl |= 1u128 << i;
        }
    }
}

/// Total number of labeled Erdős j-configurations on a fixed j-set.
pub fn erdos_configs_on_j_set(j: u32, erd_j: u64) -> u64 {
    if j < 5 {
        return 0;
    }
    let c3 = (j as u64) * (j as u64 - 1) * (j as u64 - 2) / 6;
    erd_j * c3 / (j as u64 - 2)
}

/// Natural log of the lower bound on the number of STS(N) of girth > g:
/// (N²/6)·log[(1−N^{−c})·N·exp(−2 − Σ_{j=6}^{g} erd_j/(j−2)!)].
/// `c = 0` drops the (1−N^{−c}) factor.
pub fn counting_lower_bound_log(n: u64, g: u32, erd: &BTreeMap<u32, u64>, c: f64) -> Result<f64> {
    if n % 6 != 1 && n % 6 != 3 {
        return param(format!("N = {n} is not 1 or 3 mod 6"));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return param(format!("c must be a finite nonnegative real, got {c}"));
    }
    let mut sum = 0.0;
    let mut fact = 1.0f64; // (j−2)!
    for k in 1..=3 {
        fact *= k as f64;
    }
    for j in 6..=g {
        fact *= (j - 2) as f64;
        let Some(&e) = erd.get(&j) else {
            return param(format!("missing erd_{j}"));
        };
        sum += e as f64 / fact;
    }
    let nf = n as f64;
    let corr = if c == 0.0 { 0.0 } else { (-nf.powf(-c)).ln_1p() };
    Ok(nf * nf / 6.0 * (corr + nf.ln() - 2.0 - sum))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteinerReport {
    pub is_steiner: bool,
    pub n_uncovered: usize,
    pub n_multiply_covered: usize,
    /// First 100 uncovered pairs.
    pub uncovered: Vec<Edge>,
    /// First 100 pairs covered more than once, with their multiplicity.
    pub multiply_covered: Vec<(Edge, usize)>,
}

pub const REPORT_CAP: usize = 100;

pub fn verify_steiner(sys: &TripleSystem) -> SteinerReport {
    let n = sys.n();
    let mut r = SteinerReport {
        is_steiner: true,
        n_uncovered: 0,
        n_multiply_covered: 0,
        uncovered: Vec::new(),
        multiply_covered: Vec::new(),
    };
    for a in 0..n {
        for b in a + 1..n {
            let e = Edge(a, b);
            let k = sys.on_edge(e).len();
            if k == 0 {
                r.n_uncovered += 1;
                if r.uncovered.len() < REPORT_CAP {
                    r.uncovered.push(e);
                }
            } else if k > 1 {
                r.n_multiply_covered += 1;
                if r.multiply_covered.len() < REPORT_CAP {
                    r.multiply_covered.push((e, k));
                }
            }
        }
    }
    r.is_steiner = r.n_uncovered == 0 && r.n_multiply_covered == 0;
    r
}

/// The Fano plane on {0..6}.
pub fn fano() -> TripleSystem {
    let lines = [[0, 1, 2], [0, 3, 4], [0, 5, 6], [1, 3, 5], [1, 4, 6], [2, 3, 6], [2, 4, 5]];
    TripleSystem::from_triples(7, lines.iter().map(|l| Triple::new(l[0], l[1], l[2]))).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: u32, ts: &[[u32; 3]]) -> TripleSystem {
        TripleSystem::from_triples(n, ts.iter().map(|t| Triple::new(t[0], t[1], t[2]))).unwrap()
    }

    #[test]
    fn shared_edge_has_girth_four() {
        let s = sys(5, &[[0, 1, 2], [0, 1, 3]]);
        let c = girth(&s, 6).unwrap();
        assert_eq!(c.girth, Girth::Finite(4));
        assert_eq!(c.witness.unwrap().triples.len(), 2);
    }

    #[test]
    fn single_triple_exceeds_bound() {
        let s = sys(3, &[[0, 1, 2]]);
        assert_eq!(girth(&s, 10).unwrap().girth, Girth::Exceeds(10));
        assert!(find_erdos_configs(&s, 5, 8, None).unwrap().is_empty());
    }

    #[test]
    fn fano_girth_six() {
        let c = girth(&fano(), 6).unwrap();
        assert_eq!(c.girth, Girth::Finite(6));
        let w = c.witness.unwrap();
        assert_eq!((w.len(), w.vertex_span), (4, 6));
        assert_eq!(girth(&fano(), 5).unwrap().girth, Girth::Exceeds(5));
    }

    #[test]
    fn girth_rejects_small_bound() {
        assert!(matches!(girth(&fano(), 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn anchor_outside_system_gives_nothing() {
        let a = [Triple::new(0, 1, 3)];
        assert!(find_erdos_configs(&fano(), 6, 6, Some(&a)).unwrap().is_empty());
    }

    #[test]
    fn fano_minus_triple_report() {
        let mut f = fano();
        f.remove(&Triple::new(0, 1, 2));
        let r = verify_steiner(&f);
        assert!(!r.is_steiner);
        assert_eq!(r.n_uncovered, 3);
        assert!(verify_steiner(&fano()).is_steiner);
    }

    #[test]
    fn small_erd_values() {
        assert_eq!(count_erd_j(4).unwrap(), 0);
        assert_eq!(count_erd_j(5).unwrap(), 0);
        assert!(count_erd_j(11).is_err());
    }

    #[test]
    fn bound_small_case() {
        let v = counting_lower_bound_log(7, 5, &BTreeMap::new(), 0.0).unwrap();
        assert!((v - 49.0 / 6.0 * (7f64.ln() - 2.0)).abs() < 1e-12);
        assert!(counting_lower_bound_log(8, 5, &BTreeMap::new(), 0.0).is_err());
        assert!(counting_lower_bound_log(7, 6, &BTreeMap::new(), 0.0).is_err());
    }

    #[test]
    fn index_survives_mutation() {
        let mut f = fano();
        f.remove(&Triple::new(1, 3, 5));
        f.insert(Triple::new(1, 3, 6)).unwrap();
        assert!(f.index_consistent());
        assert!(!f.is_partial_steiner());
    }
}
