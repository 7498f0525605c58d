//! Weight systems: ψ and κ, a Monte-Carlo check of the moment tail
//! bound, and the WS0–WS4 well-spreadness checker.

use crate::error::{param, Error, Result};
use crate::rng::substream;
use crate::scalar::{KahanSum, Scalar};
use crate::triples::{Edge, Triple, Vertex};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSystem<T> {
    pi: Vec<T>,
}

impl<T: Scalar> WeightSystem<T> {
    pub fn new(pi: Vec<T>) -> Result<Self> {
        if let Some(i) = pi.iter().position(|&x| x < T::zero()) {
            return param(format!("weight of element {i} is negative"));
        }
        Ok(Self { pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn weight(&self, i: usize) -> T {
        self.pi[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.pi
    }

    pub fn scaled(&self, lambda: T) -> Self {
        Self { pi: self.pi.iter().map(|&x| x * lambda).collect() }
    }
}

/// Multiset of configurations (sorted element-index sets) with multiplicities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMultiset {
    configs: Vec<(Vec<usize>, u64)>,
    d: usize,
}

impl ConfigMultiset {
    pub fn new(d: usize) -> Self {
        Self { configs: Vec::new(), d }
    }

    pub fn push(&mut self, mut set: Vec<usize>, multiplicity: u64) -> Result<()> {
        set.sort_unstable();
        set.dedup();
        if multiplicity == 0 {
            return param("multiplicity must be positive");
        }
        if set.len() > self.d {
            return param(format!("configuration of size {} exceeds d = {}", set.len(), self.d));
        }
        self.configs.push((set, multiplicity));
        Ok(())
    }

    pub fn from_sets(d: usize, sets: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        let mut x = Self::new(d);
        for s in sets {
            x.push(s, 1)?;
        }
        Ok(x)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn configs(&self) -> &[(Vec<usize>, u64)] {
        &self.configs
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    fn check_ground<T>(&self, ws: &WeightSystem<T>) -> Result<()> {
        for (s, _) in &self.configs {
            if let Some(&e) = s.iter().find(|&&e| e >= ws.pi.len()) {
                return param(format!("element {e} is outside the ground set"));
            }
        }
        Ok(())
    }
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut j = 0;
    for &x in small {
        while j < big.len() && big[j] < x {
            j += 1;
        }
        if j == big.len() || big[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

/// ψ(X, H) = Σ_{H ⊆ S ∈ X} Π_{T ∈ S∖H} π_T, with multiplicity.
pub fn psi<T: Scalar>(ws: &WeightSystem<T>, x: &ConfigMultiset, h: &[usize]) -> Result<T> {
    x.check_ground(ws)?;
    let mut h = h.to_vec();
    h.sort_unstable();
    h.dedup();
    if let Some(&e) = h.iter().find(|&&e| e >= ws.pi.len()) {
        return param(format!("element {e} is outside the ground set"));
    }
    Ok(psi_unchecked(ws, x, &h))
}

fn psi_unchecked<T: Scalar>(ws: &WeightSystem<T>, x: &ConfigMultiset, h: &[usize]) -> T {
    let mut acc = KahanSum::new();
    for (s, mult) in &x.configs {
        if !is_subset(h, s) {
            continue;
        }
        let mut prod = T::one();
        for e in s {
            if h.binary_search(e).is_err() {
                prod *= ws.pi[*e];
            }
        }
        acc.add(prod * T::from_count(*mult));
    }
    acc.value()
}

/// κ(X) with its lexicographically least maximizer.
pub fn kappa<T: Scalar>(ws: &WeightSystem<T>, x: &ConfigMultiset) -> Result<(T, Vec<usize>)> {
    x.check_ground(ws)?;
    let mut cands: BTreeSet<Vec<usize>> = BTreeSet::new();
    cands.insert(Vec::new());
    for (s, _) in &x.configs {
        for mask in 1u64..(1u64 << s.len()) {
            cands.insert((0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect());
        }
    }
    let mut best = (T::zero(), Vec::new());
    let mut first = true;
    for h in cands {
        let v = psi_unchecked(ws, x, &h);
        if first || v > best.0 {
            best = (v, h);
            first = false;
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailReport {
    pub kappa: f64,
    pub threshold: f64,
    pub exceedances: u64,
    pub trials: u64,
    pub rate: f64,
    pub bound: f64,
    pub violation: bool,
}

/// Samples R with independent inclusion probabilities `probs` and
/// compares Pr[X ≥ γκ] with C(ds)^{ds}/γ^s.
pub fn tail_bound_mc(
    ws: &WeightSystem<f64>,
    x: &ConfigMultiset,
    probs: &[f64],
    c: f64,
    gamma: f64,
    s: u32,
    trials: u64,
    seed: u64,
) -> Result<TailReport> {
    if trials < 100 {
        return param(format!("need at least 100 trials, got {trials}"));
    }
    if probs.len() != ws.len() {
        return param("inclusion-probability map must cover the ground set");
    }
    if !(gamma > 0.0) || s == 0 || !(c > 0.0) {
        return param("need gamma > 0, s >= 1, C > 0");
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return param("inclusion probabilities must lie in [0, 1]");
    }
    let tol = 1e-12;
    for (i, &p) in probs.iter().enumerate() {
        if p > c * ws.pi[i] + tol {
            return Err(Error::Hypothesis(format!("element {i}: probability {p} exceeds C*pi = {}", c * ws.pi[i])));
        }
    }
    for i in 0..probs.len() {
        for k in i + 1..probs.len() {
            if probs[i] * probs[k] > c * ws.pi[i] * ws.pi[k] + tol {
                return Err(Error::Hypothesis(format!("pair ({i}, {k}) violates the joint inclusion bound")));
            }
        }
    }
    let (kap, _) = kappa(ws, x)?;
    let threshold = gamma * kap;
    let ds = (x.d().max(1) as f64) * s as f64;
    let bound = c * ds.powf(ds) / gamma.powi(s as i32);
    let mut rng = substream(seed, "weights/tail");
    let mut exceed = 0u64;
    let mut present = vec![false; probs.len()];
    for _ in 0..trials {
        for (slot, &p) in present.iter_mut().zip(probs) {
            *slot = rng.gen::<f64>() < p;
        }
        let xcount: u64 = x.configs.iter().filter(|(s, _)| s.iter().all(|&e| present[e])).map(|(_, m)| *m).sum();
        if !x.is_empty() && xcount as f64 >= threshold {
            exceed += 1;
        }
    }
    let rate = exceed as f64 / trials as f64;
    let b = bound.min(1.0);
    let se = (b * (1.0 - b) / trials as f64).sqrt();
    Ok(TailReport {
        kappa: kap,
        threshold,
        exceedances: exceed,
        trials,
        rate,
        bound,
        violation: rate > bound + 3.0 * se,
    })
}

/// Descending vertex sets U_0 ⊇ … ⊇ U_k of K_N with U_0 = V(K_N).
#[derive(Clone, Debug, PartialEq)]
pub struct VortexContext {
    levels: Vec<Vec<Vertex>>,
    membership: Vec<usize>,
}

impl VortexContext {
    pub fn new(n_total: u32, levels: Vec<Vec<Vertex>>) -> Result<Self> {
        let mut levels: Vec<Vec<Vertex>> = levels
            .into_iter()
            .map(|mut l| {
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        if levels.is_empty() {
            levels.push((0..n_total).collect());
        }
        if levels[0].len() != n_total as usize || levels[0].iter().any(|&v| v >= n_total) {
            return param("U_0 must be the full vertex set");
        }
        for i in 1..levels.len() {
            if levels[i].iter().any(|v| levels[i - 1].binary_search(v).is_err()) {
                return param(format!("U_{i} is not a subset of U_{}", i - 1));
            }
        }
        let mut membership = vec![0usize; n_total as usize];
        for (i, l) in levels.iter().enumerate() {
            for &v in l {
                membership[v as usize] = i;
            }
        }
        Ok(Self { levels, membership })
    }

    /// Trivial vortex: k = 0.
    pub fn trivial(n_total: u32) -> Self {
        Self::new(n_total, vec![(0..n_total).collect()]).unwrap()
    }

    pub fn k(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn n(&self) -> usize {
        self.levels[self.k()].len()
    }

    pub fn level_size(&self, i: usize) -> usize {
        self.levels[i].len()
    }

    pub fn levels(&self) -> &[Vec<Vertex>] {
        &self.levels
    }

    pub fn lev(&self, t: &Triple) -> usize {
        t.0.iter().map(|&v| self.membership[v as usize]).min().unwrap()
    }

    fn profile<'a>(&self, ts: impl IntoIterator<Item = &'a Triple>) -> Vec<u32> {
        let mut p = vec![0u32; self.k()];
        for t in ts {
            let l = self.lev(t);
            if l < self.k() {
                p[l] += 1;
            }
        }
        p
    }

    /// n^{j − Σt − v} Π |U_i|^{t_i}.
    fn base(&self, j: usize, v: usize, profile: &[u32]) -> f64 {
        let n = self.n() as f64;
        let sum: i64 = profile.iter().map(|&t| t as i64).sum();
        let mut b = n.powi(j as i32 - sum as i32 - v as i32);
        for (i, &t) in profile.iter().enumerate() {
            b *= (self.level_size(i) as f64).powi(t as i32);
        }
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ws {
    Ws0,
    Ws1,
    Ws2,
    Ws3,
    Ws4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WsWitness {
    pub condition: Ws,
    /// The triangle set R, the pair (T, T′), or (T, e) rendered as text.
    pub subject: String,
    pub profile: Vec<u32>,
    pub count: u64,
    /// Bound divided by the error parameter (y or z).
    pub base: f64,
    pub allowed: f64,
}

impl WsWitness {
    pub fn ratio(&self) -> f64 {
        self.count as f64 / self.base
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WellSpreadReport {
    pub pass: bool,
    pub passed: BTreeMap<Ws, bool>,
    /// Worst witness per condition (largest count/base).
    pub worst: BTreeMap<Ws, WsWitness>,
    /// Smallest z for which WS1–WS3 hold.
    pub min_z: f64,
    /// Smallest y for which WS4 holds.
    pub min_y: f64,
}

/// v^j(R).
pub fn v_j(j: usize, r: usize) -> usize {
    if r == 1 || r == j - 2 {
        r + 2
    } else {
        r + 3
    }
}

pub const MAX_J: usize = 12;

fn render(ts: &[Triple]) -> String {
    ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(";")
}

/// Exhaustive WS0–WS4 check of a family of (j−2)-sets of triangles.
pub fn check_well_spread(family: &[Vec<Triple>], j: usize, ctx: &VortexContext, y: f64, z: f64) -> Result<WellSpreadReport> {
    if !(4..=MAX_J).contains(&j) {
        return param(format!("j = {j} outside [4, {MAX_J}]"));
    }
    let fam: Vec<Vec<Triple>> = family
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c
        })
        .collect();
    if let Some(c) = fam.iter().find(|c| c.len() != j - 2 || c.windows(2).any(|w| w[0] == w[1])) {
        return param(format!("configuration {} does not have {} distinct triangles", render(c), j - 2));
    }
    let mut passed = BTreeMap::new();
    let mut worst: BTreeMap<Ws, WsWitness> = BTreeMap::new();
    let tol = 1.0 + 1e-12;

    let mut ws0 = true;
    for c in &fam {
        if !crate::triples::is_edge_disjoint(c) {
            ws0 = false;
            worst.entry(Ws::Ws0).or_insert(WsWitness {
                condition: Ws::Ws0,
                subject: render(c),
                profile: Vec::new(),
                count: 1,
                base: 0.0,
                allowed: 0.0,
            });
        }
    }
    passed.insert(Ws::Ws0, ws0);

    let mut consider = |cond: Ws, subject: &dyn Fn() -> String, profile: &[u32], count: u64, base: f64, param: f64| {
        let better = worst.get(&cond).is_none_or(|w| count as f64 / base > w.ratio());
        if better {
            worst.insert(
                cond,
                WsWitness { condition: cond, subject: subject(), profile: profile.to_vec(), count, base, allowed: param * base },
            );
        }
    };

    // WS1 and WS4
    let mut ws1: HashMap<(Vec<Triple>, Vec<u32>), u64> = HashMap::new();
    for c in &fam {
        let m = c.len();
        for mask in 1u32..(1 << m) {
            let r: Vec<Triple> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| c[i]).collect();
            let rest = (0..m).filter(|i| mask >> i & 1 == 0).map(|i| &c[i]);
            let prof = ctx.profile(rest);
            *ws1.entry((r, prof)).or_default() += 1;
        }
    }
    let mut keys: Vec<_> = ws1.into_iter().collect();
    keys.sort();
    for ((r, prof), count) in &keys {
        let base = ctx.base(j, v_j(j, r.len()), prof);
        consider(Ws::Ws1, &|| render(r), prof, *count, base, z);
        if r.len() == 1 {
            let base4 = ctx.base(j, 3, prof);
            consider(Ws::Ws4, &|| render(r), prof, *count, base4, y);
        }
    }

    // WS2: ordered pairs (E, E′) with E∖{T} = E′∖{T′}
    let mut groups: HashMap<Vec<Triple>, Vec<(usize, Triple)>> = HashMap::new();
    for (idx, c) in fam.iter().enumerate() {
        for (i, t) in c.iter().enumerate() {
            let mut rest = c.clone();
            rest.remove(i);
            groups.entry(rest).or_default().push((idx, *t));
        }
    }
    let mut ws2: BTreeMap<(Triple, Triple, Vec<u32>), u64> = BTreeMap::new();
    for (rest, members) in &groups {
        let prof = ctx.profile(rest.iter());
        for &(a, ta) in members {
            for &(b, tb) in members {
                if a != b && fam[a] != fam[b] {
                    *ws2.entry((ta, tb, prof.clone())).or_default() += 1;
                }
            }
        }
    }
    for ((t, tp, prof), count) in &ws2 {
        let base = ctx.base(j, 4, prof);
        consider(Ws::Ws2, &|| format!("{t};{tp}"), prof, *count, base, z);
    }

    // WS3 (j = 4 only)
    if j == 4 {
        let mut ws3: BTreeMap<(Triple, Edge), BTreeSet<usize>> = BTreeMap::new();
        for (idx, c) in fam.iter().enumerate() {
            for &t in c {
                for &tp in c {
                    if tp == t || ctx.lev(&tp) != ctx.k() {
                        continue;
                    }
                    for e in tp.edges() {
                        if !t.contains_edge(e) {
                            ws3.entry((t, e)).or_default().insert(idx);
                        }
                    }
                }
            }
        }
        for ((t, e), set) in &ws3 {
            consider(Ws::Ws3, &|| format!("{t};{e}"), &[], set.len() as u64, 1.0, z);
        }
    }

    let ratio = |c: Ws| worst.get(&c).map_or(0.0, |w| w.ratio());
    let min_z = ratio(Ws::Ws1).max(ratio(Ws::Ws2)).max(ratio(Ws::Ws3));
    let min_y = ratio(Ws::Ws4);
    let holds = |c: Ws, p: f64| worst.get(&c).is_none_or(|w| (w.count as f64) <= p * w.base * tol);
    passed.insert(Ws::Ws1, holds(Ws::Ws1, z));
    passed.insert(Ws::Ws2, holds(Ws::Ws2, z));
    passed.insert(Ws::Ws3, j != 4 || holds(Ws::Ws3, z));
    passed.insert(Ws::Ws4, holds(Ws::Ws4, y));
    let pass = passed.values().all(|&b| b);
    Ok(WellSpreadReport { pass, passed, worst, min_z, min_y })
}
