//! Simple undirected graphs with sorted adjacency lists.

use crate::triples::{Edge, Triple, Vertex};
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Graph {
    n: u32,
    adj: Vec<Vec<Vertex>>,
    m: usize,
}

impl Graph {
    pub fn new(n: u32) -> Self {
        Self { n, adj: vec![Vec::new(); n as usize], m: 0 }
    }

    pub fn complete(n: u32) -> Self {
        let adj = (0..n).map(|v| (0..n).filter(|&u| u != v).collect()).collect();
        Self { n, adj, m: n as usize * (n as usize).saturating_sub(1) / 2 }
    }

    pub fn from_edges(n: u32, edges: impl IntoIterator<Item = Edge>) -> Self {
        let mut g = Self::new(n);
        for e in edges {
            g.add_edge(e.0, e.1);
        }
        g
    }

    /// Erdős–Rényi G(n, p).
    pub fn gnp<R: Rng>(n: u32, p: f64, rng: &mut R) -> Self {
        let mut g = Self::new(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < p {
                    g.adj[u as usize].push(v);
                    g.adj[v as usize].push(u);
                    g.m += 1;
                }
            }
        }
        for a in &mut g.adj {
            a.sort_unstable();
        }
        g
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> bool {
        assert!(u != v && u < self.n && v < self.n, "bad edge {u}-{v}");
        match self.adj[u as usize].binary_search(&v) {
            Ok(_) => false,
            Err(p) => {
                self.adj[u as usize].insert(p, v);
                let q = self.adj[v as usize].binary_search(&u).unwrap_err();
                self.adj[v as usize].insert(q, u);
                self.m += 1;
                true
            }
        }
    }

    pub fn remove_edge(&mut self, u: Vertex, v: Vertex) -> bool {
        match self.adj[u as usize].binary_search(&v) {
            Ok(p) => {
                self.adj[u as usize].remove(p);
                let q = self.adj[v as usize].binary_search(&u).unwrap();
                self.adj[v as usize].remove(q);
                self.m -= 1;
                true
            }
            Err(_) => false,
        }
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u != v && self.adj[u as usize].binary_search(&v).is_ok()
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v as usize].len()
    }

    pub fn codegree(&self, u: Vertex, v: Vertex) -> usize {
        let (a, b) = (&self.adj[u as usize], &self.adj[v as usize]);
        let (mut i, mut j, mut c) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        c
    }

    /// Sorted edge list.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.m);
        for u in 0..self.n {
            for &v in &self.adj[u as usize] {
                if u < v {
                    out.push(Edge(u, v));
                }
            }
        }
        out
    }

    /// All triangles, sorted.
    pub fn triangles(&self) -> Vec<Triple> {
        let mut out = Vec::new();
        for u in 0..self.n {
            let nu = &self.adj[u as usize];
            for (i, &v) in nu.iter().enumerate() {
                if v <= u {
                    continue;
                }
                for &w in &nu[i + 1..] {
                    if self.has_edge(v, w) {
                        out.push(Triple::new(u, v, w));
                    }
                }
            }
        }
        out
    }

    pub fn contains_triangle(&self, t: &Triple) -> bool {
        t.edges().iter().all(|e| self.has_edge(e.0, e.1))
    }
}
