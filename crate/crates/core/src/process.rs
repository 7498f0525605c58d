//! The high-girth triple process: random greedy choice of available
//! triangles avoiding edge collisions and forbidden configurations, with
//! trajectory predictions and post-hoc verification.

use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::rng::{substream, ChoiceSource};
use crate::triples::{
    count_erd_j, erdos_configs_on_j_set, find_erdos_configs, is_edge_disjoint, is_erdos_configuration, Edge, Triple,
    TripleSystem, Vertex,
};
use num_traits::Float;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

const NONE: u32 = u32::MAX;

// ---------------------------------------------------------------------------
// forbidden families

/// Configurations of edge-disjoint triangles, each of size j−2 for its j.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForbiddenFamily {
    configs: Vec<Vec<Triple>>,
    index: HashMap<Triple, Vec<usize>>,
}

impl ForbiddenFamily {
    pub fn new(configs: impl IntoIterator<Item = Vec<Triple>>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for mut c in configs {
            c.sort_unstable();
            c.dedup();
            if c.len() < 2 {
                return param(format!("forbidden configurations need at least 2 triangles, got {c:?}"));
            }
            if !is_edge_disjoint(&c) {
                return param(format!("forbidden configuration {c:?} is not edge-disjoint"));
            }
            set.insert(c);
        }
        let configs: Vec<Vec<Triple>> = set.into_iter().collect();
        let mut index: HashMap<Triple, Vec<usize>> = HashMap::new();
        for (i, c) in configs.iter().enumerate() {
            for t in c {
                index.entry(*t).or_default().push(i);
            }
        }
        Ok(Self { configs, index })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[Vec<Triple>] {
        &self.configs
    }

    pub fn containing(&self, t: &Triple) -> &[usize] {
        self.index.get(t).map_or(&[], |v| v.as_slice())
    }

    /// |𝔍_j| keyed by j = size + 2.
    pub fn j_counts(&self) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for c in &self.configs {
            *m.entry(c.len() as u32 + 2).or_default() += 1;
        }
        m
    }

    pub fn max_j(&self) -> u32 {
        self.configs.iter().map(|c| c.len() as u32 + 2).max().unwrap_or(0)
    }

    /// A pair (small, large) with `small ⊊ large`, if one exists.
    pub fn nested_pair(&self) -> Option<(usize, usize)> {
        for (i, c) in self.configs.iter().enumerate() {
            for &k in self.containing(&c[0]) {
                let d = &self.configs[k];
                if d.len() < c.len() && d.iter().all(|t| c.binary_search(t).is_ok()) {
                    return Some((k, i));
                }
            }
        }
        None
    }

    pub fn is_redundancy_free(&self) -> bool {
        self.nested_pair().is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedFamily {
    pub family: ForbiddenFamily,
    /// Triangles that alone complete a configuration with the chosen set.
    pub excluded: Vec<Triple>,
}

/// Restricts each 𝒮′ of `sup` to 𝒮′ ∖ chosen when that remainder lies in
/// `available`, then drops every configuration properly containing another.
/// Fully chosen configurations are skipped and singleton remainders are
/// returned separately.
pub fn derive_induced_family(
    sup: &ForbiddenFamily,
    chosen: &[Triple],
    available: &[Triple],
) -> Result<InducedFamily> {
    if !is_edge_disjoint(chosen) {
        return param("chosen triangles are not edge-disjoint");
    }
    let chosen: HashSet<Triple> = chosen.iter().copied().collect();
    let avail: HashSet<Triple> = available.iter().copied().collect();
    let mut rest: BTreeSet<Vec<Triple>> = BTreeSet::new();
    let mut excluded = BTreeSet::new();
    for c in sup.configs() {
        let s: Vec<Triple> = c.iter().copied().filter(|t| !chosen.contains(t)).collect();
        if s.is_empty() || !s.iter().all(|t| avail.contains(t)) {
            continue;
        }
        if s.len() == 1 {
            excluded.insert(s[0]);
        } else {
            rest.insert(s);
        }
    }
    // a singleton exclusion makes every configuration through it redundant
    let rest: Vec<Vec<Triple>> = rest.into_iter().filter(|s| !s.iter().any(|t| excluded.contains(t))).collect();
    let all = ForbiddenFamily::new(rest)?;
    let keep: Vec<Vec<Triple>> = all
        .configs()
        .iter()
        .filter(|c| {
            !c.iter().any(|t| {
                all.containing(t).iter().any(|&k| {
                    let d = &all.configs()[k];
                    d.len() < c.len() && d.iter().all(|x| c.binary_search(x).is_ok())
                })
            })
        })
        .cloned()
        .collect();
    Ok(InducedFamily { family: ForbiddenFamily::new(keep)?, excluded: excluded.into_iter().collect() })
}

/// What the process must avoid besides edge collisions.
#[derive(Clone, Debug)]
pub enum Forbidden {
    None,
    Explicit(ForbiddenFamily),
    /// Every Erdős j-configuration (6 ≤ j ≤ g) among the initial triangles,
    /// detected on the fly rather than materialized.
    Erdos { g: u32 },
}

impl Forbidden {
    pub fn g(&self) -> u32 {
        match self {
            Forbidden::None => 4,
            Forbidden::Explicit(f) => f.max_j().max(4),
            Forbidden::Erdos { g } => *g,
        }
    }
}

// ---------------------------------------------------------------------------
// trajectories

fn binom_f<T: Float>(n: u32, k: u32) -> T {
    (0..k).fold(T::one(), |acc, i| acc * T::from(n - i).unwrap() / T::from(i + 1).unwrap())
}

/// Predicted evolution of the process from its initial data.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub e0: T,
    pub a0: T,
    /// |𝔍_j| for 4 ≤ j ≤ g.
    pub j_counts: BTreeMap<u32, T>,
    pub n: T,
    /// Exponent in e_edge; defaults to 2g.
    pub b: T,
    pub c: T,
}

impl<T: Float> Trajectory<T> {
    pub fn new(e0: usize, a0: usize, j_counts: BTreeMap<u32, T>, n: u32, g: u32, c: T) -> Self {
        Self {
            e0: T::from(e0).unwrap(),
            a0: T::from(a0).unwrap(),
            j_counts,
            n: T::from(n).unwrap(),
            b: T::from(2 * g).unwrap(),
            c,
        }
    }

    pub fn p(&self, t: T) -> T {
        (self.e0 - T::from(3).unwrap() * t) / self.e0
    }

    pub fn rho(&self, t: T) -> T {
        self.j_counts.iter().fold(T::zero(), |acc, (&j, &cnt)| {
            acc + T::from(j - 2).unwrap() * t.powi(j as i32 - 3) * cnt / self.a0.powi(j as i32 - 2)
        })
    }

    /// Zero for j without configurations or c outside 0..=j−4.
    pub fn f_jc(&self, j: u32, c: u32, t: T) -> T {
        let cnt = self.j_counts.get(&j).copied().unwrap_or_else(T::zero);
        if j < 4 || c + 4 > j || cnt == T::zero() {
            return T::zero();
        }
        let p = self.p(t);
        let decay = p.powi(3) * (-self.rho(t)).exp();
        let chosen = if c == 0 { T::one() } else { (t / self.a0).powi(c as i32) };
        binom_f::<T>(j - 3, c) * chosen * decay.powi((j - 3 - c) as i32) * T::from(j - 2).unwrap() * cnt / self.a0
    }

    pub fn f_edge(&self, t: T) -> T {
        let p = self.p(t);
        p * p * (-self.rho(t)).exp() * T::from(3).unwrap() * self.a0 / self.e0
    }

    pub fn f_threat(&self, t: T) -> T {
        let extra = self.j_counts.keys().fold(T::zero(), |acc, &j| acc + self.f_jc(j, j - 4, t));
        T::from(3).unwrap() * self.f_edge(t) + extra
    }

    pub fn e_edge(&self, t: T) -> T {
        let p = self.p(t);
        if p <= T::zero() {
            return T::infinity();
        }
        p.powf(-self.b) * self.n.powf(T::one() - T::one() / (T::from(2).unwrap() * self.c))
    }

    pub fn e_jc(&self, j: u32, c: u32, t: T) -> T {
        let p = self.p(t);
        self.e_edge(t) * (p * p * self.a0 / self.e0).powi(j as i32 - 4 - c as i32)
    }
}

pub type TrajectoryF64 = Trajectory<f64>;

// ---------------------------------------------------------------------------
// process input and state

/// Validated initial data: host graph, initial triangles (in a fixed order
/// that defines the choice indices) and the forbidden family.
#[derive(Clone, Debug)]
pub struct ProcessInput {
    graph: Graph,
    a0: Vec<Triple>,
    forbidden: Forbidden,
}

impl ProcessInput {
    pub fn new(graph: Graph, a0: Vec<Triple>, forbidden: Forbidden) -> Result<Self> {
        let mut seen = HashSet::with_capacity(a0.len());
        for t in &a0 {
            if t.0[2] >= graph.n() || !graph.contains_triangle(t) {
                return param(format!("{t} is not a triangle of the graph"));
            }
            if !seen.insert(*t) {
                return param(format!("triangle {t} listed twice"));
            }
        }
        match &forbidden {
            Forbidden::Explicit(f) => {
                if let Some((a, b)) = f.nested_pair() {
                    return param(format!(
                        "forbidden family is not redundancy-free: {:?} lies inside {:?}",
                        f.configs()[a],
                        f.configs()[b]
                    ));
                }
                if let Some(t) = f.configs().iter().flatten().find(|t| !seen.contains(t)) {
                    return param(format!("forbidden configuration member {t} is not an initial triangle"));
                }
            }
            Forbidden::Erdos { g } if !(4..=12).contains(g) => return param(format!("g = {g} outside 4..=12")),
            _ => {}
        }
        Ok(Self { graph, a0, forbidden })
    }

    /// K_n with all triangles in sorted order.
    pub fn complete(n: u32, forbidden: Forbidden) -> Result<Self> {
        let g = Graph::complete(n);
        let a0 = g.triangles();
        Self::new(g, a0, forbidden)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn a0(&self) -> &[Triple] {
        &self.a0
    }

    pub fn forbidden(&self) -> &Forbidden {
        &self.forbidden
    }

    fn is_complete_with_all_triangles(&self) -> bool {
        let n = self.graph.n() as usize;
        self.graph.edge_count() == n * n.saturating_sub(1) / 2 && self.a0.len() == n * (n.max(2) - 1) * (n.max(2) - 2) / 6
    }

    /// |𝔍_j| for the trajectory. For an implicit Erdős family on K_n with all
    /// triangles this is C(n, j) times the number of configurations on a j-set;
    /// otherwise the configurations are enumerated.
    pub fn j_counts(&self) -> Result<BTreeMap<u32, f64>> {
        match &self.forbidden {
            Forbidden::None => Ok(BTreeMap::new()),
            Forbidden::Explicit(f) => Ok(f.j_counts().into_iter().map(|(j, c)| (j, c as f64)).collect()),
            Forbidden::Erdos { g } => {
                let mut out = BTreeMap::new();
                if self.is_complete_with_all_triangles() {
                    for j in 6..=(*g).min(10) {
                        let per = erdos_configs_on_j_set(j, count_erd_j(j)?) as f64;
                        out.insert(j, binom_f::<f64>(self.graph.n(), j) * per);
                    }
                    if *g > 10 {
                        return Err(Error::Feasibility("erd_j is only computed for j <= 10".into()));
                    }
                } else {
                    let sys = TripleSystem::from_triples(self.graph.n(), self.a0.iter().copied())?;
                    for c in find_erdos_configs(&sys, 5, *g as usize, None)? {
                        *out.entry(c.len() as u32 + 2).or_default() += 1.0;
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn trajectory(&self, c: f64) -> Result<TrajectoryF64> {
        Ok(Trajectory::new(
            self.graph.edge_count(),
            self.a0.len(),
            self.j_counts()?,
            self.graph.n(),
            self.forbidden.g(),
            c,
        ))
    }
}

/// Fenwick tree over 0/1 flags with order-statistic lookup.
#[derive(Clone, Debug)]
struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn all_ones(n: usize) -> Self {
        let mut tree = vec![0u32; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                tree[j] += tree[i];
            }
        }
        Self { tree }
    }

    fn dec(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Position of the k-th (0-based) set flag.
    fn select(&self, mut k: u32) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Evolving state (E(t), 𝒜(t), 𝒞(t)) with fans and configuration counters.
pub struct ProcessState<'a> {
    input: &'a ProcessInput,
    n: u32,
    edge_id: Vec<u32>,
    edges: Vec<Edge>,
    uncovered: Vec<bool>,
    uncovered_count: usize,
    /// Per edge, initial triangles on it sorted by third vertex.
    edge_tris: Vec<Vec<u32>>,
    alive: Vec<bool>,
    alive_count: usize,
    fen: Fenwick,
    fan: Vec<u32>,
    chosen: Vec<u32>,
    is_chosen: Vec<bool>,
    chosen_on_edge: Vec<u32>,
    chosen_on_vertex: Vec<Vec<u32>>,
    /// Explicit families: triangle id per member, and chosen counts.
    cfg_ids: Vec<Vec<u32>>,
    cfg_chosen: Vec<u32>,
    tri_cfgs: Vec<Vec<u32>>,
}

impl<'a> ProcessState<'a> {
    pub fn new(input: &'a ProcessInput) -> Self {
        let n = input.graph.n();
        let mut edge_id = vec![NONE; n as usize * n as usize];
        let edges = input.graph.edges();
        for (i, e) in edges.iter().enumerate() {
            edge_id[(e.0 * n + e.1) as usize] = i as u32;
            edge_id[(e.1 * n + e.0) as usize] = i as u32;
        }
        let mut edge_tris: Vec<Vec<u32>> = vec![Vec::new(); edges.len()];
        for (i, t) in input.a0.iter().enumerate() {
            for e in t.edges() {
                edge_tris[edge_id[(e.0 * n + e.1) as usize] as usize].push(i as u32);
            }
        }
        for (k, list) in edge_tris.iter_mut().enumerate() {
            let e = edges[k];
            list.sort_unstable_by_key(|&id| input.a0[id as usize].third(e).unwrap());
        }
        let fan = edge_tris.iter().map(|l| l.len() as u32).collect();
        let m = input.a0.len();
        let mut st = Self {
            input,
            n,
            edge_id,
            uncovered: vec![true; edges.len()],
            uncovered_count: edges.len(),
            edges,
            edge_tris,
            alive: vec![true; m],
            alive_count: m,
            fen: Fenwick::all_ones(m),
            fan,
            chosen: Vec::new(),
            is_chosen: vec![false; m],
            chosen_on_edge: Vec::new(),
            chosen_on_vertex: vec![Vec::new(); n as usize],
            cfg_ids: Vec::new(),
            cfg_chosen: Vec::new(),
            tri_cfgs: Vec::new(),
        };
        st.chosen_on_edge = vec![NONE; st.edges.len()];
        if let Forbidden::Explicit(f) = &input.forbidden {
            st.tri_cfgs = vec![Vec::new(); m];
            for (ci, c) in f.configs().iter().enumerate() {
                let ids: Vec<u32> = c.iter().map(|t| st.tri_id(t).unwrap()).collect();
                for &id in &ids {
                    st.tri_cfgs[id as usize].push(ci as u32);
                }
                st.cfg_ids.push(ids);
            }
            st.cfg_chosen = vec![0; f.len()];
        }
        st
    }

    fn eid(&self, a: Vertex, b: Vertex) -> u32 {
        self.edge_id[(a * self.n + b) as usize]
    }

    pub fn tri_id(&self, t: &Triple) -> Option<u32> {
        if t.0[2] >= self.n {
            return None;
        }
        let [a, b, c] = t.0;
        let e = self.eid(a, b);
        if e == NONE {
            return None;
        }
        let list = &self.edge_tris[e as usize];
        let edge = Edge(a, b);
        list.binary_search_by_key(&c, |&id| self.input.a0[id as usize].third(edge).unwrap()).ok().map(|i| list[i])
    }

    pub fn t(&self) -> usize {
        self.chosen.len()
    }

    pub fn uncovered_count(&self) -> usize {
        self.uncovered_count
    }

    pub fn available_count(&self) -> usize {
        self.alive_count
    }

    pub fn is_available(&self, t: &Triple) -> bool {
        self.tri_id(t).is_some_and(|id| self.alive[id as usize])
    }

    pub fn chosen(&self) -> Vec<Triple> {
        self.chosen.iter().map(|&id| self.input.a0[id as usize]).collect()
    }

    /// All currently available triangles in initial order.
    pub fn available(&self) -> Vec<Triple> {
        self.input.a0.iter().zip(&self.alive).filter(|(_, &a)| a).map(|(t, _)| *t).collect()
    }

    /// |𝒳_e(t)| for an uncovered edge.
    pub fn fan(&self, e: Edge) -> Option<usize> {
        let id = self.eid(e.0, e.1);
        (id != NONE && self.uncovered[id as usize]).then(|| self.fan[id as usize] as usize)
    }

    /// (min, mean, max) of |𝒳_e| over uncovered edges.
    pub fn fan_stats(&self) -> (usize, f64, usize) {
        let (mut lo, mut hi, mut sum, mut k) = (usize::MAX, 0, 0usize, 0usize);
        for (i, &u) in self.uncovered.iter().enumerate() {
            if u {
                let f = self.fan[i] as usize;
                lo = lo.min(f);
                hi = hi.max(f);
                sum += f;
                k += 1;
            }
        }
        if k == 0 {
            (0, f64::NAN, 0)
        } else {
            (lo, sum as f64 / k as f64, hi)
        }
    }

    fn kill(&mut self, id: u32) {
        let i = id as usize;
        if !self.alive[i] {
            return;
        }
        self.alive[i] = false;
        self.alive_count -= 1;
        self.fen.dec(i);
        for e in self.input.a0[i].edges() {
            let k = self.eid(e.0, e.1) as usize;
            self.fan[k] -= 1;
        }
    }

    /// Id of the `k`-th available triangle in initial order.
    fn select(&self, k: usize) -> u32 {
        self.fen.select(k as u32) as u32
    }

    /// Chooses the available triangle with id `id` and updates 𝒜.
    pub fn choose_id(&mut self, id: u32) -> Result<()> {
        if !self.alive[id as usize] {
            return Err(Error::Invariant(format!("triangle {} is not available", self.input.a0[id as usize])));
        }
        let tri = self.input.a0[id as usize];
        self.kill(id);
        self.is_chosen[id as usize] = true;
        self.chosen.push(id);
        for e in tri.edges() {
            let eid = self.eid(e.0, e.1) as usize;
            self.uncovered[eid] = false;
            self.uncovered_count -= 1;
            self.chosen_on_edge[eid] = id;
            for k in 0..self.edge_tris[eid].len() {
                let other = self.edge_tris[eid][k];
                self.kill(other);
            }
        }
        for v in tri.0 {
            self.chosen_on_vertex[v as usize].push(id);
        }
        match &self.input.forbidden {
            Forbidden::None => {}
            Forbidden::Explicit(_) => {
                for k in 0..self.tri_cfgs[id as usize].len() {
                    let ci = self.tri_cfgs[id as usize][k] as usize;
                    self.cfg_chosen[ci] += 1;
                    if self.cfg_chosen[ci] as usize + 1 == self.cfg_ids[ci].len() {
                        let last = *self.cfg_ids[ci].iter().find(|&&x| !self.is_chosen[x as usize]).unwrap();
                        self.kill(last);
                    }
                }
            }
            Forbidden::Erdos { g } => {
                let g = *g as usize;
                for (_, x) in self.erdos_completions(id, g) {
                    self.kill(x);
                }
            }
        }
        Ok(())
    }

    /// Erdős configurations (j ≤ g) made of `root`, chosen triangles and one
    /// available triangle X ≠ root. Returns (members other than X, X).
    fn erdos_completions(&self, root: u32, g: usize) -> Vec<(Vec<u32>, u32)> {
        let mut out = Vec::new();
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let rt = self.input.a0[root as usize];
        let mut members = vec![root];
        let mut verts: Vec<Vertex> = rt.0.to_vec();
        self.erdos_dfs(g, &mut members, &mut verts, &mut seen, &mut out);
        out
    }

    fn erdos_dfs(
        &self,
        g: usize,
        members: &mut Vec<u32>,
        verts: &mut Vec<Vertex>,
        seen: &mut HashSet<Vec<u32>>,
        out: &mut Vec<(Vec<u32>, u32)>,
    ) {
        let m = members.len();
        let s = verts.len();
        if m >= 3 && s == m + 3 {
            self.try_complete(members, verts, out);
        }
        if m + 1 > g - 3 {
            return;
        }
        let mut cands: BTreeSet<u32> = BTreeSet::new();
        if s + 2 <= g {
            for &v in verts.iter() {
                cands.extend(self.chosen_on_vertex[v as usize].iter().copied());
            }
        } else {
            for (i, &a) in verts.iter().enumerate() {
                for &b in &verts[i + 1..] {
                    let e = self.eid(a, b);
                    if e != NONE && self.chosen_on_edge[e as usize] != NONE {
                        cands.insert(self.chosen_on_edge[e as usize]);
                    }
                }
            }
        }
        for c in cands {
            if members.contains(&c) {
                continue;
            }
            let ct = self.input.a0[c as usize];
            let fresh: Vec<Vertex> = ct.0.iter().copied().filter(|v| !verts.contains(v)).collect();
            let s2 = s + fresh.len();
            if s2 > g || s2 < m + 1 + 3 || ct.shares_edge(&self.input.a0[members[0] as usize]) {
                continue;
            }
            members.push(c);
            let mut key = members.clone();
            key.sort_unstable();
            if seen.insert(key) {
                verts.extend_from_slice(&fresh);
                self.erdos_dfs(g, members, verts, seen, out);
                verts.truncate(s);
            }
            members.pop();
        }
    }

    fn try_complete(&self, members: &[u32], verts: &[Vertex], out: &mut Vec<(Vec<u32>, u32)>) {
        let mut vs = verts.to_vec();
        vs.sort_unstable();
        let ts: Vec<Triple> = members.iter().map(|&id| self.input.a0[id as usize]).collect();
        // every vertex of an Erdős configuration lies in two of its triangles
        let low: Vec<Vertex> =
            vs.iter().copied().filter(|v| ts.iter().filter(|t| t.contains(*v)).count() < 2).collect();
        if low.len() > 3 {
            return;
        }
        for (i, &a) in vs.iter().enumerate() {
            for (k, &b) in vs[i + 1..].iter().enumerate() {
                for &c in &vs[i + k + 2..] {
                    if !low.iter().all(|v| [a, b, c].contains(v)) {
                        continue;
                    }
                    let x = Triple([a, b, c]);
                    let Some(xid) = self.tri_id(&x) else { continue };
                    if !self.alive[xid as usize] || members.contains(&xid) || ts.iter().any(|t| t.shares_edge(&x)) {
                        continue;
                    }
                    let mut all = ts.clone();
                    all.push(x);
                    if is_erdos_configuration(&all) {
                        let mut ms = members.to_vec();
                        ms.sort_unstable();
                        out.push((ms, xid));
                    }
                }
            }
        }
    }

    /// 𝒯_T(t): available T* ≠ T whose choice would make T unavailable.
    pub fn threat_set(&self, t: &Triple) -> Result<Vec<Triple>> {
        let id = match self.tri_id(t) {
            Some(id) if self.alive[id as usize] => id,
            _ => return param(format!("{t} is not available")),
        };
        let mut out: BTreeSet<u32> = BTreeSet::new();
        for e in t.edges() {
            let eid = self.eid(e.0, e.1) as usize;
            out.extend(self.edge_tris[eid].iter().copied().filter(|&x| x != id && self.alive[x as usize]));
        }
        match &self.input.forbidden {
            Forbidden::None => {}
            Forbidden::Explicit(_) => {
                for &ci in &self.tri_cfgs[id as usize] {
                    let ids = &self.cfg_ids[ci as usize];
                    let open: Vec<u32> = ids.iter().copied().filter(|&x| !self.is_chosen[x as usize]).collect();
                    if open.len() == 2 {
                        let other = if open[0] == id { open[1] } else { open[0] };
                        if self.alive[other as usize] {
                            out.insert(other);
                        }
                    }
                }
            }
            Forbidden::Erdos { g } => {
                for (_, x) in self.erdos_completions(id, *g as usize) {
                    out.insert(x);
                }
            }
        }
        Ok(out.into_iter().map(|x| self.input.a0[x as usize]).collect())
    }

    /// |𝒯_T(t)| without materializing the set. Fans of distinct edges of T
    /// meet only in T, and a configuration partner shares no edge with T.
    pub fn threat_count(&self, t: &Triple) -> Result<usize> {
        let id = self.alive_id(t)?;
        let fans: usize = t.edges().iter().map(|e| self.fan[self.eid(e.0, e.1) as usize] as usize).sum();
        let partners: BTreeSet<u32> = match &self.input.forbidden {
            Forbidden::None => BTreeSet::new(),
            Forbidden::Explicit(_) => self
                .tri_cfgs[id as usize]
                .iter()
                .filter_map(|&ci| {
                    let open: Vec<u32> =
                        self.cfg_ids[ci as usize].iter().copied().filter(|&x| !self.is_chosen[x as usize]).collect();
                    let other = if open.len() == 2 { Some(if open[0] == id { open[1] } else { open[0] }) } else { None };
                    other.filter(|&o| self.alive[o as usize])
                })
                .collect(),
            Forbidden::Erdos { g } => self.erdos_completions(id, *g as usize).into_iter().map(|(_, x)| x).collect(),
        };
        Ok(fans - 3 + partners.len())
    }

    fn explicit(&self) -> Result<&ForbiddenFamily> {
        match &self.input.forbidden {
            Forbidden::Explicit(f) => Ok(f),
            Forbidden::None => Err(Error::Parameter("no forbidden family".into())),
            Forbidden::Erdos { .. } => param("this statistic needs an explicit forbidden family"),
        }
    }

    /// Member states of configuration `ci`: (chosen, available, other).
    fn cfg_state(&self, ci: usize) -> (usize, usize, usize) {
        let (mut c, mut a, mut o) = (0, 0, 0);
        for &x in &self.cfg_ids[ci] {
            if self.is_chosen[x as usize] {
                c += 1;
            } else if self.alive[x as usize] {
                a += 1;
            } else {
                o += 1;
            }
        }
        (c, a, o)
    }

    fn alive_id(&self, t: &Triple) -> Result<u32> {
        match self.tri_id(t) {
            Some(id) if self.alive[id as usize] => Ok(id),
            _ => param(format!("{t} is not available")),
        }
    }

    /// Configurations of 𝔛_{T,j,c}(t) as indices into the explicit family.
    pub fn x_tjc(&self, t: &Triple, j: u32, c: u32) -> Result<Vec<usize>> {
        let id = self.alive_id(t)?;
        if Forbidden::None == self.input.forbidden {
            return Ok(Vec::new());
        }
        self.explicit()?;
        Ok(self.x_tjc_ids(id, j, c))
    }

    fn x_tjc_ids(&self, id: u32, j: u32, c: u32) -> Vec<usize> {
        self.tri_cfgs[id as usize]
            .iter()
            .map(|&ci| ci as usize)
            .filter(|&ci| {
                let len = self.cfg_ids[ci].len();
                let (ch, _, other) = self.cfg_state(ci);
                len as u32 + 2 == j && ch as u32 == c && other == 0
            })
            .collect()
    }

    /// Configurations E with E ∩ 𝒜 = {a, b} exactly and the rest chosen.
    fn open_pair_cfgs(&self, a: u32) -> Vec<(usize, u32)> {
        self.tri_cfgs[a as usize]
            .iter()
            .filter_map(|&ci| {
                let ci = ci as usize;
                let (_, avail, other) = self.cfg_state(ci);
                if avail == 2 && other == 0 {
                    let b = *self.cfg_ids[ci].iter().find(|&&x| x != a && self.alive[x as usize]).unwrap();
                    Some((ci, b))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn crude_stats(&self, kind: CrudeKind) -> Result<usize> {
        if Forbidden::None == self.input.forbidden {
            kind.validate()?;
            return Ok(0);
        }
        self.explicit()?;
        kind.validate()?;
        match kind {
            CrudeKind::TTjc { t, t2, j, c } => {
                let (a, b) = (self.alive_id(&t)?, self.alive_id(&t2)?);
                if a == b {
                    return param("T and T' must be distinct");
                }
                Ok(self.x_tjc_ids(a, j, c).into_iter().filter(|&ci| self.cfg_ids[ci].contains(&b)).count())
            }
            CrudeKind::ET { e, t } => {
                let a = self.alive_id(&t)?;
                let eid = self.eid(e.0, e.1);
                if eid == NONE || !self.uncovered[eid as usize] {
                    return param(format!("{e} is not an uncovered edge"));
                }
                Ok(self.open_pair_cfgs(a).into_iter().filter(|&(_, b)| self.input.a0[b as usize].contains_edge(e)).count())
            }
            CrudeKind::TT { t, t2 } => {
                let (a, b) = (self.alive_id(&t)?, self.alive_id(&t2)?);
                let ea = self.open_pair_cfgs(a);
                let eb = self.open_pair_cfgs(b);
                let mut n = 0;
                for &(c1, s1) in &ea {
                    for &(c2, s2) in &eb {
                        if c1 != c2 && s1 == s2 && s1 != a && s1 != b {
                            n += 1;
                        }
                    }
                }
                Ok(n)
            }
            CrudeKind::Tjc { t, j, c } => {
                let a = self.alive_id(&t)?;
                let mut n = 0;
                for ci in self.x_tjc_ids(a, j, c - 1) {
                    let open: Vec<u32> = self.cfg_ids[ci].iter().copied().filter(|&x| self.alive[x as usize]).collect();
                    let mut others: BTreeSet<usize> = BTreeSet::new();
                    for &x in &open {
                        for (c2, y) in self.open_pair_cfgs(x) {
                            if c2 != ci && open.contains(&y) {
                                others.insert(c2);
                            }
                        }
                    }
                    n += others.len();
                }
                Ok(n)
            }
        }
    }
}

impl PartialEq for Forbidden {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Forbidden::None, Forbidden::None) => true,
            (Forbidden::Explicit(a), Forbidden::Explicit(b)) => a == b,
            (Forbidden::Erdos { g: a }, Forbidden::Erdos { g: b }) => a == b,
            _ => false,
        }
    }
}

/// The four auxiliary counters; `Tjc` counts pairs with E ∈ 𝔛_{T,j,c−1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrudeKind {
    TTjc { t: Triple, t2: Triple, j: u32, c: u32 },
    ET { e: Edge, t: Triple },
    TT { t: Triple, t2: Triple },
    Tjc { t: Triple, j: u32, c: u32 },
}

impl CrudeKind {
    fn validate(&self) -> Result<()> {
        match *self {
            CrudeKind::TTjc { j, c, .. } if j < 5 || c + 5 > j => param(format!("Z_TT'jc needs 0 <= c <= j-5, got j={j}, c={c}")),
            CrudeKind::ET { e, t } if t.contains_edge(e) => param(format!("edge {e} lies in {t}")),
            CrudeKind::Tjc { j, c, .. } if c < 1 || c + 4 > j => param(format!("Z_Tjc needs 1 <= c <= j-4, got j={j}, c={c}")),
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// running

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    Steps(usize),
    /// τ_cut = ⌈(1 − n^{−β})|E|/3⌉.
    Beta(f64),
    /// Stop once this fraction of the edges is covered.
    EdgeFraction(f64),
    /// Run until every edge is covered or 𝒜 is empty.
    Exhaust,
}

impl Cutoff {
    pub fn steps(&self, n: u32, e0: usize) -> Result<usize> {
        let third = e0 as f64 / 3.0;
        let s = match *self {
            Cutoff::Steps(s) => s,
            Cutoff::Beta(b) if b > 0.0 => ((1.0 - (n as f64).powf(-b)) * third).ceil() as usize,
            Cutoff::EdgeFraction(f) if (0.0..=1.0).contains(&f) => (f * third).ceil() as usize,
            Cutoff::Exhaust => e0 / 3,
            other => return param(format!("invalid cutoff {other:?}")),
        };
        Ok(s.min(e0 / 3))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    ReachedCutoff { t: usize },
    Starved { t: usize },
}

#[derive(Clone, Debug)]
pub struct ProcessOptions {
    /// Record every this many steps; `None` means max(1, |E₀|/300).
    pub record_every: Option<usize>,
    /// Triangles sampled per checkpoint for |𝒯_T|.
    pub threat_samples: usize,
    /// C in the error threshold e_edge.
    pub c: f64,
    /// Compute the trajectory; when false the predictions are left empty
    /// and no configuration counting is done.
    pub predict: bool,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        Self { record_every: None, threat_samples: 64, c: 2.0, predict: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub p: f64,
    pub rho: f64,
    pub f_edge: f64,
    pub f_threat: f64,
    pub e_edge: f64,
    pub a_size: usize,
    pub e_size: usize,
    pub xe_min: usize,
    pub xe_mean: f64,
    pub xe_max: usize,
    pub tt_mean_sampled: f64,
    pub dev_edge: f64,
    pub dev_threat: f64,
    /// Mean |𝔛_{T,j,c}| over the sampled triangles (explicit families).
    pub x_tjc_mean: BTreeMap<(u32, u32), f64>,
}

pub const TRACE_HEADER: &str = "t,p,rho,f_edge,f_threat,A_size,Xe_min,Xe_mean,Xe_max,TT_mean_sampled,dev_edge,dev_threat";

/// Reals with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                fmt_real(r.p),
                fmt_real(r.rho),
                fmt_real(r.f_edge),
                fmt_real(r.f_threat),
                r.a_size,
                r.xe_min,
                fmt_real(r.xe_mean),
                r.xe_max,
                fmt_real(r.tt_mean_sampled),
                fmt_real(r.dev_edge),
                fmt_real(r.dev_threat)
            );
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct ProcessRun {
    pub chosen: Vec<Triple>,
    pub trace: Trace,
    pub outcome: Outcome,
    pub trajectory: TrajectoryF64,
}

pub fn run_process(input: &ProcessInput, cutoff: Cutoff, opts: &ProcessOptions, seed: u64) -> Result<ProcessRun> {
    let mut choice = substream(seed, "process/choice");
    run_process_with(input, cutoff, opts, &mut choice, seed)
}

/// As `run_process`, drawing each choice index from `choice`: at step t the
/// chosen triangle is the `choice.choose(|𝒜(t)|)`-th available triangle in
/// the initial order.
pub fn run_process_with(
    input: &ProcessInput,
    cutoff: Cutoff,
    opts: &ProcessOptions,
    choice: &mut dyn ChoiceSource,
    seed: u64,
) -> Result<ProcessRun> {
    let traj = if opts.predict {
        input.trajectory(opts.c)?
    } else {
        Trajectory::new(input.graph.edge_count(), input.a0.len(), BTreeMap::new(), input.graph.n(), input.forbidden.g(), opts.c)
    };
    let e0 = input.graph.edge_count();
    let steps = cutoff.steps(input.graph.n(), e0)?;
    let every = opts.record_every.unwrap_or((e0 / 300).max(1)).max(1);
    let mut sampler = substream(seed, "process/threat-sample");
    let mut st = ProcessState::new(input);
    let mut rows = Vec::new();
    let mut record = |st: &ProcessState, rows: &mut Vec<TraceRow>| -> Result<()> {
        rows.push(checkpoint(st, &traj, opts.threat_samples, &mut sampler)?);
        Ok(())
    };
    record(&st, &mut rows)?;
    let mut outcome = Outcome::ReachedCutoff { t: steps };
    while st.t() < steps {
        if st.alive_count == 0 {
            outcome = Outcome::Starved { t: st.t() };
            break;
        }
        let k = choice.choose(st.alive_count);
        if k >= st.alive_count {
            return Err(Error::Invariant(format!("choice index {k} out of range {}", st.alive_count)));
        }
        let id = st.select(k);
        st.choose_id(id)?;
        if st.uncovered_count != e0 - 3 * st.t() {
            return Err(Error::Invariant("uncovered edge count drifted".into()));
        }
        if st.t().is_multiple_of(every) || st.t() == steps {
            record(&st, &mut rows)?;
        }
    }
    if let Outcome::Starved { t } = outcome {
        if rows.last().is_none_or(|r| r.t != t) {
            record(&st, &mut rows)?;
        }
    }
    Ok(ProcessRun { chosen: st.chosen(), trace: Trace { rows }, outcome, trajectory: traj })
}

fn checkpoint(st: &ProcessState, traj: &TrajectoryF64, samples: usize, rng: &mut impl rand::Rng) -> Result<TraceRow> {
    let t = st.t();
    let tf = t as f64;
    let (xe_min, xe_mean, xe_max) = st.fan_stats();
    let f_edge = traj.f_edge(tf);
    let f_threat = traj.f_threat(tf);
    let mut tt_sum = 0usize;
    let mut x_sum: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let k = if st.alive_count == 0 { 0 } else { samples };
    let explicit = matches!(st.input.forbidden, Forbidden::Explicit(_));
    for _ in 0..k {
        let id = st.select(rng.gen_range(0..st.alive_count));
        let tri = st.input.a0[id as usize];
        tt_sum += st.threat_count(&tri)?;
        if explicit {
            for &ci in &st.tri_cfgs[id as usize] {
                let (ch, _, other) = st.cfg_state(ci as usize);
                if other == 0 {
                    *x_sum.entry((st.cfg_ids[ci as usize].len() as u32 + 2, ch as u32)).or_default() += 1;
                }
            }
        }
    }
    let tt_mean = if k == 0 { f64::NAN } else { tt_sum as f64 / k as f64 };
    Ok(TraceRow {
        t,
        p: traj.p(tf),
        rho: traj.rho(tf),
        f_edge,
        f_threat,
        e_edge: traj.e_edge(tf),
        a_size: st.alive_count,
        e_size: st.uncovered_count,
        xe_min,
        xe_mean,
        xe_max,
        tt_mean_sampled: tt_mean,
        dev_edge: (xe_mean - f_edge) / f_edge,
        dev_threat: (tt_mean - f_threat) / f_threat,
        x_tjc_mean: x_sum.into_iter().map(|(key, v)| (key, v as f64 / k as f64)).collect(),
    })
}

// ---------------------------------------------------------------------------
// verification

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostHocReport {
    pub edge_collisions: usize,
    pub foreign_triangles: usize,
    pub completed_forbidden: usize,
    pub witness: Option<Vec<Triple>>,
    /// Checkpoints whose uncovered-edge count differs from |E₀| − 3t.
    pub bookkeeping_errors: usize,
}

impl PostHocReport {
    pub fn ok(&self) -> bool {
        self.edge_collisions == 0 && self.foreign_triangles == 0 && self.completed_forbidden == 0 && self.bookkeeping_errors == 0
    }
}

/// Independent re-scan of a run: edge-disjointness, membership in 𝒜₀,
/// no forbidden configuration inside the chosen set, and |E(t)| bookkeeping.
pub fn verify_run(input: &ProcessInput, chosen: &[Triple], trace: Option<&Trace>) -> Result<PostHocReport> {
    let mut used: HashMap<Edge, usize> = HashMap::new();
    for t in chosen {
        for e in t.edges() {
            *used.entry(e).or_default() += 1;
        }
    }
    let edge_collisions = used.values().filter(|&&c| c > 1).count();
    let a0: HashSet<&Triple> = input.a0.iter().collect();
    let foreign_triangles = chosen.iter().filter(|t| !a0.contains(t)).count();
    let set: HashSet<&Triple> = chosen.iter().collect();
    let (mut completed, mut witness) = (0, None);
    match &input.forbidden {
        Forbidden::None => {}
        Forbidden::Explicit(f) => {
            for c in f.configs() {
                if c.iter().all(|t| set.contains(t)) {
                    completed += 1;
                    witness.get_or_insert_with(|| c.clone());
                }
            }
        }
        Forbidden::Erdos { g } => {
            let mut sys = TripleSystem::new(input.graph.n());
            for t in chosen {
                sys.insert(*t)?;
            }
            let found = find_erdos_configs(&sys, 5, *g as usize, None)?;
            completed = found.len();
            witness = found.into_iter().next().map(|c| c.triples);
        }
    }
    let e0 = input.graph.edge_count();
    let bookkeeping_errors =
        trace.map_or(0, |tr| tr.rows.iter().filter(|r| r.e_size + 3 * r.t != e0 || r.t > chosen.len()).count());
    Ok(PostHocReport { edge_collisions, foreign_triangles, completed_forbidden: completed, witness, bookkeeping_errors })
}

// ---------------------------------------------------------------------------
// goodness

#[derive(Clone, Debug, PartialEq)]
pub struct GoodnessReport {
    pub edge_regular: bool,
    /// Edge with the largest relative fan deviation, and that deviation.
    pub edge_witness: Option<(Edge, f64)>,
    pub config_regular: bool,
    /// (triangle, j, count, expected) with the largest normalized deviation.
    pub config_witness: Option<(Triple, u32, usize, f64)>,
    pub dense_triangles: bool,
    pub dense_edges: bool,
    pub family_bounded: bool,
    /// j with the largest |𝔍_j| / (C|𝒜|^{j−2}/|E|^{j−3}).
    pub family_witness: Option<(u32, f64)>,
    pub redundancy_free: bool,
    pub nested_witness: Option<(Vec<Triple>, Vec<Triple>)>,
}

impl GoodnessReport {
    pub fn pass(&self) -> bool {
        self.edge_regular
            && self.config_regular
            && self.dense_triangles
            && self.dense_edges
            && self.family_bounded
            && self.redundancy_free
    }
}

/// The deterministic conditions of (C, β)-goodness on concrete data.
pub fn check_goodness(graph: &Graph, a0: &[Triple], family: &ForbiddenFamily, c: f64, beta: f64) -> Result<GoodnessReport> {
    if !(c > 0.0) || !(beta > 0.0) {
        return param("need C > 0 and beta > 0");
    }
    let n = graph.n() as f64;
    let e = graph.edge_count() as f64;
    let a = a0.len() as f64;
    let tol = n.powf(-1.0 / c);
    let mut fan: HashMap<Edge, usize> = graph.edges().into_iter().map(|e| (e, 0)).collect();
    for t in a0 {
        for ed in t.edges() {
            match fan.get_mut(&ed) {
                Some(x) => *x += 1,
                None => return param(format!("{t} is not a triangle of the graph")),
            }
        }
    }
    let target = 3.0 * a / e;
    let mut edge_witness: Option<(Edge, f64)> = None;
    for (ed, &f) in &fan {
        let dev = (f as f64 - target).abs() / target;
        if edge_witness.is_none_or(|(w, d)| dev > d || (dev == d && *ed < w)) {
            edge_witness = Some((*ed, dev));
        }
    }
    let edge_regular = edge_witness.is_none_or(|(_, d)| d <= tol);
    let counts = family.j_counts();
    let mut per: HashMap<(Triple, u32), usize> = HashMap::new();
    for cfg in family.configs() {
        for t in cfg {
            *per.entry((*t, cfg.len() as u32 + 2)).or_default() += 1;
        }
    }
    let mut config_witness: Option<(Triple, u32, usize, f64)> = None;
    let mut worst = 0.0;
    let mut config_regular = true;
    for (&j, &cnt) in &counts {
        let expect = (j - 2) as f64 * cnt as f64 / a;
        let slack = tol * a.powi(j as i32 - 3) / e.powi(j as i32 - 3);
        for t in a0 {
            let k = per.get(&(*t, j)).copied().unwrap_or(0);
            let dev = (k as f64 - expect).abs() / slack;
            if dev > 1.0 {
                config_regular = false;
            }
            if dev > worst || config_witness.is_none() {
                worst = dev;
                config_witness = Some((*t, j, k, expect));
            }
        }
    }
    let mut family_witness: Option<(u32, f64)> = None;
    for (&j, &cnt) in &counts {
        let ratio = cnt as f64 / (c * a.powi(j as i32 - 2) / e.powi(j as i32 - 3));
        if family_witness.is_none_or(|(_, r)| ratio > r) {
            family_witness = Some((j, ratio));
        }
    }
    let nested = family.nested_pair();
    Ok(GoodnessReport {
        edge_regular,
        edge_witness,
        config_regular,
        config_witness,
        dense_triangles: a >= n.powf(1.0 - beta) * e,
        dense_edges: e >= n.powf(2.0 - beta),
        family_bounded: family_witness.is_none_or(|(_, r)| r <= 1.0),
        family_witness,
        redundancy_free: nested.is_none(),
        nested_witness: nested.map(|(x, y)| (family.configs()[x].clone(), family.configs()[y].clone())),
    })
}

/// Every Erdős j-configuration (6 ≤ j ≤ g) on K_n as an explicit family.
pub fn erdos_family_complete(n: u32, g: u32) -> Result<ForbiddenFamily> {
    let k = Graph::complete(n);
    let sys = TripleSystem::from_triples(n, k.triangles())?;
    let found = find_erdos_configs(&sys, 5, g as usize, None)?;
    ForbiddenFamily::new(found.into_iter().map(|c| c.triples))
}
