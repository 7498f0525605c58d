//! Absorber sub-gadgets: path covers, Euler short-cycle decompositions,
//! g-spheres and sphere covers.

use crate::error::{param, Error, Result};
use crate::triples::{Edge, Triple, TripleSystem, Vertex};
use std::collections::{BTreeMap, BTreeSet};

/// Monotone counter handing out fresh vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexAllocator {
    next: Vertex,
}

impl VertexAllocator {
    pub fn new(start: Vertex) -> Self {
        Self { next: start }
    }

    pub fn fresh(&mut self) -> Vertex {
        let v = self.next;
        self.next += 1;
        v
    }

    pub fn peek(&self) -> Vertex {
        self.next
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathCover {
    pub base: Vec<Vertex>,
    /// For each pair {u, v} of base vertices, the midpoints of its 6|X|² paths.
    pub aug_paths: BTreeMap<Edge, Vec<Vertex>>,
    pub total_vertices: usize,
}

impl PathCover {
    pub fn paths_per_pair(&self) -> usize {
        6 * self.base.len() * self.base.len()
    }

    /// Edges of ∧X, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (e, mids) in &self.aug_paths {
            for &m in mids {
                out.push(Edge::new(e.0, m));
                out.push(Edge::new(e.1, m));
            }
        }
        out.sort_unstable();
        out
    }
}

pub fn build_path_cover(x: &[Vertex], alloc: &mut VertexAllocator) -> Result<PathCover> {
    let mut base = x.to_vec();
    base.sort_unstable();
    base.dedup();
    if base.len() != x.len() {
        return param("path-cover base set has repeated vertices");
    }
    if base.len() < 2 {
        return param(format!("path cover needs |X| >= 2, got {}", base.len()));
    }
    if base.iter().any(|&v| v >= alloc.peek()) {
        return param("allocator would reuse a base vertex");
    }
    let per = 6 * base.len() * base.len();
    let mut aug_paths = BTreeMap::new();
    for (i, &u) in base.iter().enumerate() {
        for &v in &base[i + 1..] {
            aug_paths.insert(Edge(u, v), (0..per).map(|_| alloc.fresh()).collect::<Vec<_>>());
        }
    }
    let pc = PathCover { total_vertices: base.len() + per * aug_paths.len(), base, aug_paths };
    let edges = pc.edges();
    let mut deg: BTreeMap<Vertex, usize> = BTreeMap::new();
    for e in &edges {
        *deg.entry(e.0).or_default() += 1;
        *deg.entry(e.1).or_default() += 1;
    }
    let k = pc.base.len();
    for (v, d) in &deg {
        let want = if pc.base.binary_search(v).is_ok() { per * (k - 1) } else { 2 };
        if *d != want {
            return Err(Error::Invariant(format!("path-cover vertex {v} has degree {d}, expected {want}")));
        }
    }
    if !edges.len().is_multiple_of(3) {
        return Err(Error::Invariant("path cover is not triangle-divisible".into()));
    }
    Ok(pc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleDecomposition {
    pub cycles: Vec<Vec<Vertex>>,
    /// Sorted multiset of covered edges.
    pub covered: Vec<Edge>,
}

impl CycleDecomposition {
    pub fn count_len(&self, len: usize) -> usize {
        self.cycles.iter().filter(|c| c.len() == len).count()
    }
}

pub fn cycle_edges(c: &[Vertex]) -> Vec<Edge> {
    (0..c.len()).map(|i| Edge::new(c[i], c[(i + 1) % c.len()])).collect()
}

/// Splits the edges of an even graph into simple cycles: one Euler circuit
/// per component (smallest neighbour first), cut at repeated vertices.
pub fn euler_cycles(edges: &[Edge]) -> Result<Vec<Vec<Vertex>>> {
    let mut adj: BTreeMap<Vertex, BTreeSet<Vertex>> = BTreeMap::new();
    for e in edges {
        if !adj.entry(e.0).or_default().insert(e.1) {
            return param(format!("repeated edge {e}"));
        }
        adj.entry(e.1).or_default().insert(e.0);
    }
    for (v, ns) in &adj {
        if ns.len() % 2 == 1 {
            return Err(Error::Divisibility { vertex: *v, degree: ns.len() });
        }
    }
    let mut cycles = Vec::new();
    loop {
        let Some(start) = adj.iter().find(|(_, ns)| !ns.is_empty()).map(|(v, _)| *v) else { break };
        let mut stack = vec![start];
        let mut circuit = Vec::new();
        while let Some(&v) = stack.last() {
            let next = adj.get(&v).and_then(|ns| ns.iter().next().copied());
            match next {
                Some(u) => {
                    adj.get_mut(&v).unwrap().remove(&u);
                    adj.get_mut(&u).unwrap().remove(&v);
                    stack.push(u);
                }
                None => circuit.push(stack.pop().unwrap()),
            }
        }
        circuit.reverse();
        // circuit is a closed walk start .. start
        let mut path: Vec<Vertex> = Vec::new();
        let mut pos: BTreeMap<Vertex, usize> = BTreeMap::new();
        for &v in &circuit {
            if let Some(&p) = pos.get(&v) {
                let cyc: Vec<Vertex> = path[p..].to_vec();
                for w in &path[p + 1..] {
                    pos.remove(w);
                }
                path.truncate(p + 1);
                cycles.push(cyc);
            } else {
                pos.insert(v, path.len());
                path.push(v);
            }
        }
        debug_assert_eq!(path, vec![start]);
    }
    Ok(cycles)
}

/// Exact partition of L ∪ ∧X into cycles of length 3, 4 or 5.
pub fn decompose_short_cycles(l: &[Edge], pc: &PathCover) -> Result<CycleDecomposition> {
    let x = &pc.base;
    if let Some(e) = l.iter().find(|e| x.binary_search(&e.0).is_err() || x.binary_search(&e.1).is_err()) {
        return param(format!("edge {e} of L leaves the base set"));
    }
    let euler = euler_cycles(l)?;
    if euler.len() >= x.len() * x.len() {
        return Err(Error::Invariant(format!("{} Euler cycles, expected fewer than |X|^2", euler.len())));
    }
    let mut used: BTreeMap<Edge, usize> = BTreeMap::new();
    let mut take = |u: Vertex, v: Vertex| -> Result<Vertex> {
        let e = Edge::new(u, v);
        let k = used.entry(e).or_default();
        let mids = &pc.aug_paths[&e];
        let m = *mids.get(*k).ok_or_else(|| Error::Invariant(format!("augmenting paths for {e} exhausted")))?;
        *k += 1;
        Ok(m)
    };
    let mut cycles = Vec::new();
    for c in &euler {
        let l_len = c.len();
        let v1 = c[0];
        // two paths to each of v_2..v_ℓ; pieces 3, 5, …, 5, 3
        let mut first = Vec::new();
        let mut second = Vec::new();
        for &vi in &c[1..] {
            first.push(take(v1, vi)?);
            second.push(take(v1, vi)?);
        }
        cycles.push(vec![v1, c[1], first[0]]);
        for i in 1..l_len - 1 {
            cycles.push(vec![v1, second[i - 1], c[i], c[i + 1], first[i]]);
        }
        cycles.push(vec![v1, second[l_len - 2], c[l_len - 1]]);
    }
    for (e, mids) in &pc.aug_paths {
        let k = used.get(e).copied().unwrap_or(0);
        let rest = &mids[k..];
        if rest.len() % 2 != 0 {
            return Err(Error::Invariant(format!("odd number of leftover paths at {e}")));
        }
        for pair in rest.chunks(2) {
            cycles.push(vec![e.0, pair[0], e.1, pair[1]]);
        }
    }
    let mut covered: Vec<Edge> = cycles.iter().flat_map(|c| cycle_edges(c)).collect();
    covered.sort_unstable();
    let mut target: Vec<Edge> = l.to_vec();
    target.extend(pc.edges());
    target.sort_unstable();
    if covered != target {
        return Err(Error::Invariant("cycle decomposition is not an exact partition of L and the path cover".into()));
    }
    let d = CycleDecomposition { cycles, covered };
    if d.cycles.iter().any(|c| !(3..=5).contains(&c.len())) {
        return Err(Error::Invariant("cycle longer than 5".into()));
    }
    if d.count_len(4) <= d.count_len(5) {
        return Err(Error::Invariant("no majority of 4-cycles over 5-cycles".into()));
    }
    if l.len().is_multiple_of(3) && !d.covered.len().is_multiple_of(3) {
        return Err(Error::Invariant("triangle-divisibility lost".into()));
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sphere {
    pub anchor: Triple,
    pub a: Vertex,
    /// b_1 … b_{2g}; b_1, b_2 belong to the anchor.
    pub b: Vec<Vertex>,
    pub c: Vertex,
    pub g: u32,
    pub edges: Vec<Edge>,
    pub in_decomp: Vec<Triple>,
    pub out_decomp: Vec<Triple>,
}

impl Sphere {
    /// b_j for 1 ≤ j ≤ 2g, cyclically (b_{2g+1} = b_1).
    fn bj(&self, j: usize) -> Vertex {
        self.b[(j - 1) % self.b.len()]
    }

    pub fn new_vertices(&self) -> Vec<Vertex> {
        let mut v = self.b[2..].to_vec();
        v.push(self.c);
        v
    }

    /// ℬ°(T): triangles of both decompositions.
    pub fn all_triangles(&self) -> Vec<Triple> {
        let mut t: Vec<Triple> = self.in_decomp.iter().chain(&self.out_decomp).copied().collect();
        t.sort_unstable();
        t.dedup();
        t
    }
}

/// Appends a g-sphere to `anchor`, labelled a < b_1 < b_2.
pub fn build_sphere(anchor: Triple, g: u32, alloc: &mut VertexAllocator) -> Result<Sphere> {
    if g < 3 {
        return param(format!("sphere needs g >= 3, got {g}"));
    }
    if anchor.0[2] >= alloc.peek() {
        return param("allocator would reuse an anchor vertex");
    }
    let [a, b1, b2] = anchor.0;
    let two_g = 2 * g as usize;
    let mut b = vec![b1, b2];
    for _ in 3..=two_g {
        b.push(alloc.fresh());
    }
    let c = alloc.fresh();
    let mut s = Sphere { anchor, a, b, c, g, edges: Vec::new(), in_decomp: Vec::new(), out_decomp: Vec::new() };
    let mut edges = Vec::new();
    for j in 3..=two_g {
        edges.push(Edge::new(a, s.bj(j)));
    }
    for j in 1..=two_g {
        edges.push(Edge::new(c, s.bj(j)));
    }
    for j in 2..two_g {
        edges.push(Edge::new(s.bj(j), s.bj(j + 1)));
    }
    edges.push(Edge::new(s.bj(two_g), s.bj(1)));
    edges.sort_unstable();
    s.edges = edges;
    // out: c b2 b3, a b3 b4, …, c b_{2g} b1
    for j in 2..=two_g {
        let apex = if j % 2 == 0 { c } else { a };
        s.out_decomp.push(Triple::new(apex, s.bj(j), s.bj(j + 1)));
    }
    // in: c b1 b2, a b2 b3, …, a b_{2g} b1
    for j in 1..=two_g {
        let apex = if j % 2 == 1 { c } else { a };
        s.in_decomp.push(Triple::new(apex, s.bj(j), s.bj(j + 1)));
    }
    check_partition(&s.out_decomp, &s.edges, "out-decomposition")?;
    let mut with_anchor = s.edges.clone();
    with_anchor.extend(anchor.edges());
    with_anchor.sort_unstable();
    check_partition(&s.in_decomp, &with_anchor, "in-decomposition")?;
    if s.all_triangles().contains(&anchor) {
        return Err(Error::Invariant("anchor triple inside its own sphere".into()));
    }
    Ok(s)
}

fn check_partition(ts: &[Triple], target_sorted: &[Edge], what: &str) -> Result<()> {
    let mut got: Vec<Edge> = ts.iter().flat_map(|t| t.edges()).collect();
    got.sort_unstable();
    if got != target_sorted {
        return Err(Error::Invariant(format!("{what} is not an exact edge partition")));
    }
    Ok(())
}

/// Checks, for every nonempty edge-disjoint 𝓔 ⊆ ℬ°(T) with |𝓔| ≤ g, that
/// (1) some non-anchor vertex lies in exactly one triangle of 𝓔 and
/// (2) |V(𝓔) ∖ V(T)| ≥ |𝓔|. Returns the first violating subset.
pub fn verify_sphere_minimality(s: &Sphere, g: u32) -> Result<Option<Vec<Triple>>> {
    if g > 8 {
        return Err(Error::Feasibility(format!("exhaustive sphere check limited to g <= 8, got {g}")));
    }
    let tris = s.all_triangles();
    let anchor = s.anchor;
    let mut chosen: Vec<usize> = Vec::new();
    let mut bad = None;
    fn rec(
        tris: &[Triple],
        anchor: &Triple,
        g: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        bad: &mut Option<Vec<Triple>>,
    ) {
        if bad.is_some() {
            return;
        }
        if !chosen.is_empty() {
            let mut count: BTreeMap<Vertex, usize> = BTreeMap::new();
            for &i in chosen.iter() {
                for v in tris[i].0 {
                    *count.entry(v).or_default() += 1;
                }
            }
            let outside: Vec<(&Vertex, &usize)> = count.iter().filter(|(v, _)| !anchor.contains(**v)).collect();
            let lonely = outside.iter().any(|(_, &k)| k == 1);
            if !lonely || outside.len() < chosen.len() {
                *bad = Some(chosen.iter().map(|&i| tris[i]).collect());
                return;
            }
        }
        if chosen.len() == g {
            return;
        }
        for i in start..tris.len() {
            if chosen.iter().any(|&k| tris[k].shares_edge(&tris[i])) {
                continue;
            }
            chosen.push(i);
            rec(tris, anchor, g, i + 1, chosen, bad);
            chosen.pop();
        }
    }
    rec(&tris, &anchor, g as usize, 0, &mut chosen, &mut bad);
    Ok(bad)
}

#[derive(Clone, Debug)]
pub struct SphereCover {
    pub system: TripleSystem,
    pub spheres: Vec<Sphere>,
    pub in_count: usize,
}

/// Decomposes L ∪ ○_g Z where L is the graph decomposed by `sys_z`:
/// every 3-subset of Z gets a sphere, in-decomposed when it is a triple
/// of `sys_z` and out-decomposed otherwise.
pub fn sphere_cover_decompose(sys_z: &TripleSystem, g: u32) -> Result<SphereCover> {
    if !sys_z.is_partial_steiner() {
        return Err(Error::Input("triples of Z are not edge-disjoint".into()));
    }
    let z = sys_z.n();
    let mut alloc = VertexAllocator::new(z);
    let mut spheres = Vec::new();
    let mut out_triples = Vec::new();
    let mut target: Vec<Edge> = sys_z.triples().flat_map(|t| t.edges()).collect();
    let mut in_count = 0;
    for a in 0..z {
        for b in a + 1..z {
            for c in b + 1..z {
                let t = Triple::new(a, b, c);
                let s = build_sphere(t, g, &mut alloc)?;
                target.extend(s.edges.iter().copied());
                if sys_z.contains(&t) {
                    out_triples.extend(s.in_decomp.iter().copied());
                    in_count += 1;
                } else {
                    out_triples.extend(s.out_decomp.iter().copied());
                }
                spheres.push(s);
            }
        }
    }
    target.sort_unstable();
    check_partition(&out_triples, &target, "sphere cover")?;
    let system = TripleSystem::from_triples(alloc.peek(), out_triples)?;
    Ok(SphereCover { system, spheres, in_count })
}

/// Extension point for the cycle-cover exclusive absorbers A(H), which need
/// an external absorber construction and are not built here.
pub fn exclusive_absorber_interface(signature: &str) -> Result<()> {
    Err(Error::UnimplementedDependency(format!(
        "exclusive absorber A(H) for the cycle-cover layer (signature {signature:?}) needs an \
         external exclusive-absorber construction"
    )))
}
