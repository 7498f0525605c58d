use hgsts::coverdown::*;
use hgsts::process::{Forbidden, ForbiddenFamily};
use hgsts::triples::{fano, girth};
use hgsts::{Edge, Graph, Triple, TripleSystem, Vertex};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet};

fn gnp(n: u32, p: f64, seed: u64) -> Graph {
    Graph::gnp(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

// ---------- typicality and discrepancy ----------

#[test]
fn complete_graph_needs_xi_two_over_n() {
    let g = Graph::complete(20);
    let rep = check_typicality(&g, 1.0, 0.1);
    assert!(rep.exhaustive);
    assert_eq!(rep.pairs_checked, 190);
    assert!((rep.xi_deg - 1.0 / 20.0).abs() < 1e-12);
    assert!((rep.min_xi - 2.0 / 20.0).abs() < 1e-12);
    assert!(check_typicality(&g, 1.0, 2.0 / 20.0).pass);
    assert!(!check_typicality(&g, 1.0, 0.099).pass);
    assert!(!check_typicality(&Graph::new(20), 0.5, 0.9).pass);
}

#[test]
fn large_graphs_are_sampled() {
    let g = Graph::complete(600);
    let rep = check_typicality(&g, 1.0, 0.01);
    assert!(!rep.exhaustive);
    assert!((rep.min_xi - 2.0 / 600.0).abs() < 1e-12);
    assert!(rep.pass);
    assert!((rep.violating_fraction_upper95 - 3.0 / rep.pairs_checked as f64).abs() < 1e-15);
}

#[test]
fn random_graph_deviations_are_chernoff_sized() {
    // relative standard deviations: degrees √(q/pn), codegrees √((1−p²)/p²n)
    let (n, p) = (400u32, 0.5);
    let sd_deg = ((1.0 - p) / (p * n as f64)).sqrt();
    let sd_codeg = ((1.0 - p * p) / (p * p * n as f64)).sqrt();
    for seed in 0..20 {
        let rep = check_typicality(&gnp(n, p, seed), p, 0.1);
        assert!(rep.xi_deg < 5.0 * sd_deg, "seed {seed}: {}", rep.xi_deg);
        assert!(rep.xi_codeg < 6.5 * sd_codeg, "seed {seed}: {}", rep.xi_codeg);
        assert!(rep.xi_codeg > 3.0 * sd_codeg, "seed {seed}: {}", rep.xi_codeg);
        assert!(check_typicality(&gnp(n, p, seed), p, 6.5 * sd_codeg).pass);
    }
}

#[test]
fn discrepancy_never_violated_on_typical_graph() {
    let (n, p) = (400u32, 0.5);
    let g = gnp(n, p, 1);
    let xi = check_typicality(&g, p, 1.0).min_xi;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut vs: Vec<Vertex> = (0..n).collect();
    for _ in 0..100 {
        vs.shuffle(&mut rng);
        let a = rng.gen_range(0..=200);
        let b = rng.gen_range(0..=200);
        let d = discrepancy_check(&g, &vs[..a], &vs[a..a + b], p, xi).unwrap();
        let direct = vs[..a].iter().map(|&u| vs[a..a + b].iter().filter(|&&w| g.has_edge(u, w)).count()).sum::<usize>();
        assert_eq!(d.e_st, direct);
        assert!(!d.violated, "{d:?}");
    }
    let half: Vec<Vertex> = (0..200).collect();
    let rest: Vec<Vertex> = (200..400).collect();
    assert!(!discrepancy_check(&g, &half, &rest, p, xi).unwrap().violated);
    let empty = discrepancy_check(&g, &[], &rest, p, xi).unwrap();
    assert_eq!((empty.e_st, empty.deviation, empty.bound), (0, 0.0, 0.0));
    assert!(discrepancy_check(&g, &[1, 2], &[2, 3], p, xi).is_err());
}

#[test]
fn iteration_typicality_on_complete_graph() {
    let g = Graph::complete(12);
    let a: HashSet<Triple> = g.triangles().into_iter().collect();
    let levels = vec![(0..12).collect::<Vec<_>>(), (0..6).collect()];
    let rep = check_iteration_typicality(&g, &a, &levels, 1.0, 1.0, 0.5, 3).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.exhaustive && rep.rooted_checked > 0);
    assert!(check_iteration_typicality(&g, &a, &levels, 1.0, 1.0, 0.5, 5).is_err());
    let bad = vec![(0..6).collect::<Vec<_>>(), (0..12).collect()];
    assert!(check_iteration_typicality(&g, &a, &bad, 1.0, 1.0, 0.5, 3).is_err());
    let none: HashSet<Triple> = HashSet::new();
    assert!(!check_iteration_typicality(&g, &none, &levels, 1.0, 1.0, 0.5, 3).unwrap().pass);
}

// ---------- matchings ----------

/// Largest matching by trying every injection of X into Y.
fn bipartite_oracle(b: &Bipartite) -> usize {
    fn rec(b: &Bipartite, x: usize, used: &mut Vec<bool>) -> usize {
        if x == b.nx() {
            return 0;
        }
        let mut best = rec(b, x + 1, used);
        for &y in b.neighbors(x as u32) {
            if !used[y as usize] {
                used[y as usize] = true;
                best = best.max(1 + rec(b, x + 1, used));
                used[y as usize] = false;
            }
        }
        best
    }
    rec(b, 0, &mut vec![false; b.ny()])
}

fn check_hall(b: &Bipartite) -> bool {
    match hall_matching(b).unwrap() {
        HallOutcome::Perfect(mate) => {
            let ys: BTreeSet<u32> = mate.iter().copied().collect();
            assert_eq!(ys.len(), b.nx());
            for (x, &y) in mate.iter().enumerate() {
                assert!(b.has_edge(x as u32, y));
            }
            true
        }
        HallOutcome::Deficient { s, neighborhood } => {
            assert!(neighborhood.len() < s.len());
            let mut want: BTreeSet<u32> = BTreeSet::new();
            for &x in &s {
                want.extend(b.neighbors(x).iter().copied());
            }
            assert_eq!(neighborhood.iter().copied().collect::<BTreeSet<_>>(), want);
            false
        }
    }
}

#[test]
fn hall_examples() {
    let m = 5;
    let all: Vec<(u32, u32)> = (0..m).flat_map(|x| (0..m).map(move |y| (x, y))).collect();
    let k = Bipartite::from_edges(m as usize, m as usize, all).unwrap();
    assert!(check_hall(&k));
    let star = Bipartite::from_edges(4, 4, [(0, 0), (1, 0)]).unwrap();
    match hall_matching(&star).unwrap() {
        HallOutcome::Deficient { s, neighborhood } => {
            assert!(s.len() > neighborhood.len());
        }
        other => panic!("{other:?}"),
    }
    assert!(hall_matching(&Bipartite::new(2, 3)).is_err());
    assert!(Bipartite::from_edges(2, 2, [(0, 5)]).is_err());
}

#[test]
fn hall_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..300 {
        let m = rng.gen_range(1..=7usize);
        let p = rng.gen_range(0.1..0.7);
        let edges: Vec<(u32, u32)> =
            (0..m as u32).flat_map(|x| (0..m as u32).map(move |y| (x, y))).filter(|_| rng.gen::<f64>() < p).collect();
        let b = Bipartite::from_edges(m, m, edges).unwrap();
        assert_eq!(check_hall(&b), bipartite_oracle(&b) == m);
    }
}

#[test]
fn hall_with_half_min_degree_is_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..30 {
        let m = 40usize;
        let mut b = Bipartite::new(m, m);
        let mut ys: Vec<u32> = (0..m as u32).collect();
        for x in 0..m as u32 {
            ys.shuffle(&mut rng);
            for &y in &ys[..m / 2] {
                b.add_edge(x, y).unwrap();
            }
        }
        // Y side degrees are not controlled; add edges until every y has m/2
        for y in 0..m as u32 {
            let mut xs: Vec<u32> = (0..m as u32).filter(|&x| !b.has_edge(x, y)).collect();
            xs.shuffle(&mut rng);
            let deg = (0..m as u32).filter(|&x| b.has_edge(x, y)).count();
            for &x in xs.iter().take((m / 2).saturating_sub(deg)) {
                b.add_edge(x, y).unwrap();
            }
        }
        assert!(check_hall(&b));
    }
}

/// Maximum matching size of a general graph by branching on the lowest vertex.
fn general_oracle(n: usize, edges: &[(u32, u32)]) -> usize {
    fn rec(free: u32, adj: &[u32]) -> usize {
        if free == 0 {
            return 0;
        }
        let v = free.trailing_zeros() as usize;
        let rest = free & !(1 << v);
        let mut best = rec(rest, adj);
        let mut nb = adj[v] & rest;
        while nb != 0 {
            let u = nb.trailing_zeros();
            nb &= nb - 1;
            best = best.max(1 + rec(rest & !(1 << u), adj));
        }
        best
    }
    let mut adj = vec![0u32; n];
    for &(a, b) in edges {
        adj[a as usize] |= 1 << b;
        adj[b as usize] |= 1 << a;
    }
    rec(if n == 0 { 0 } else { (1u32 << n) - 1 }, &adj)
}

#[test]
fn general_matching_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..300 {
        let n = rng.gen_range(1..=12usize);
        let p = rng.gen_range(0.1..0.6);
        let mut edges = Vec::new();
        for a in 0..n as u32 {
            for b in a + 1..n as u32 {
                if rng.gen::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        let m = maximum_matching(n, &edges);
        assert_eq!(m.len(), general_oracle(n, &edges));
        let mut seen = HashSet::new();
        for &(a, b) in &m {
            assert!(a < b && edges.contains(&(a, b)));
            assert!(seen.insert(a) && seen.insert(b));
        }
        assert_eq!(is_perfect_matching(n, &edges, &m), 2 * m.len() == n);
    }
    assert!(!is_perfect_matching(4, &[(0, 1), (2, 3)], &[(0, 1), (0, 2)]));
}

#[test]
fn robust_matching_meets_target() {
    let g = gnp(400, 0.5, 7);
    let rep = robust_matching_experiment(&g, 0.4, 0.01, &greedy_min_degree_deleter, 20, 11).unwrap();
    assert!(rep.successes >= 19, "{rep:?}");
    assert_eq!(rep.trials.len(), 20);
    assert_eq!(rep.cap, (0.01 * 400f64.powf(0.4)).floor() as usize);
}

#[test]
fn robust_matching_parameters_and_cap() {
    let g = Graph::complete(30);
    let everything = |r: &Graph, _: usize| r.edges();
    let rep = robust_matching_experiment(&g, 1.0, 0.01, &everything, 2, 0).unwrap();
    assert!(rep.trials.iter().all(|t| matches!(t, TrialResult::CapViolated { .. })));
    assert_eq!(rep.successes, 0);
    let none = |_: &Graph, _: usize| Vec::new();
    let full = robust_matching_experiment(&g, 1.0, 0.0, &none, 3, 0).unwrap();
    assert_eq!(full.keep_prob, 1.0);
    assert_eq!(full.successes, 3);
    assert!(robust_matching_experiment(&Graph::complete(31), 1.0, 0.0, &none, 1, 0).is_err());
    let sparse = gnp(400, 0.05, 0);
    assert!(matches!(robust_matching_experiment(&sparse, 0.4, 0.0, &none, 1, 0), Err(hgsts::Error::Hypothesis(_))));
}

#[test]
fn greedy_deleter_respects_cap() {
    let g = gnp(60, 0.3, 5);
    for cap in 0..4 {
        let f = greedy_min_degree_deleter(&g, cap);
        let mut deg = vec![0usize; 60];
        for e in &f {
            assert!(g.has_edge(e.0, e.1));
            deg[e.0 as usize] += 1;
            deg[e.1 as usize] += 1;
        }
        assert!(deg.iter().all(|&d| d <= cap));
    }
}

// ---------- forbidden checks ----------

#[test]
fn completing_a_pasch_is_detected() {
    let f = fano();
    let lines = f.to_vec();
    // four lines avoiding the point 6 form a Pasch configuration
    let pasch: Vec<Triple> = lines.iter().copied().filter(|t| !t.contains(6)).collect();
    assert_eq!(pasch.len(), 4);
    let mut sys = TripleSystem::from_triples(7, pasch[..3].iter().copied()).unwrap();
    assert!(completes_forbidden(&mut sys, &Forbidden::Erdos { g: 6 }, &pasch[3]).unwrap());
    assert_eq!(sys.len(), 3);
    assert!(!completes_forbidden(&mut sys, &Forbidden::Erdos { g: 5 }, &pasch[3]).unwrap());
    assert!(!completes_forbidden(&mut sys, &Forbidden::None, &pasch[3]).unwrap());
    let explicit = Forbidden::Explicit(ForbiddenFamily::new([pasch.clone()]).unwrap());
    assert!(completes_forbidden(&mut sys, &explicit, &pasch[3]).unwrap());
    let rep = verify_additions(7, &pasch[..3], &pasch[3..], &Forbidden::Erdos { g: 6 }, &[]).unwrap();
    assert_eq!(rep.completed_forbidden, 1);
    assert!(!rep.ok());
}

#[test]
fn verify_additions_counts_collisions_and_coverage() {
    let prior = [Triple::new(0, 1, 2)];
    let added = [Triple::new(0, 1, 3), Triple::new(3, 4, 5)];
    let targets = [Edge(3, 4), Edge(6, 7)];
    let rep = verify_additions(8, &prior, &added, &Forbidden::None, &targets).unwrap();
    assert_eq!(rep.edge_collisions, 1);
    assert_eq!(rep.uncovered_targets, 1);
    let clean = verify_additions(8, &prior, &added[1..], &Forbidden::None, &targets[..1]).unwrap();
    assert!(clean.ok());
}

// ---------- reserve and internal edges ----------

#[test]
fn reserve_extremes_and_expectation() {
    let g = Graph::complete(200);
    let u_in: Vec<Vertex> = (0..50).collect();
    let u_out: Vec<Vertex> = (50..200).collect();
    let all = sample_reserve(&g, &u_out, &u_in, 0.0, 1).unwrap();
    assert_eq!(all.edge_count(), 50 * 150);
    assert_eq!(sample_reserve(&g, &u_out, &u_in, f64::INFINITY, 1).unwrap().edge_count(), 0);
    let theta = 0.2;
    let prob = 200f64.powf(-theta);
    let mean = prob * 7500.0;
    let sd = (7500.0 * prob * (1.0 - prob)).sqrt();
    for seed in 0..5 {
        let r = sample_reserve(&g, &u_out, &u_in, theta, seed).unwrap();
        assert!((r.edge_count() as f64 - mean).abs() < 3.0 * sd, "{}", r.edge_count());
        assert!(r.edges().iter().all(|e| (e.0 < 50) != (e.1 < 50)));
        assert_eq!(sample_reserve(&g, &u_out, &u_in, theta, seed).unwrap().edges(), r.edges());
    }
    assert!(sample_reserve(&g, &[1, 2], &[2, 3], 0.0, 0).is_err());
}

#[test]
fn internal_greedy_examples() {
    let a: HashSet<Triple> = Graph::complete(6).triangles().into_iter().collect();
    let r = Graph::from_edges(6, [Edge(0, 2), Edge(1, 2)]);
    assert_eq!(
        cover_internal_greedy(&[], &r, &a, &Forbidden::None, &[], 1, 0).unwrap(),
        InternalOutcome::Covered(vec![])
    );
    let out = cover_internal_greedy(&[Edge(0, 1)], &r, &a, &Forbidden::None, &[], 1, 0).unwrap();
    assert_eq!(out, InternalOutcome::Covered(vec![Triple::new(0, 1, 2)]));
    match cover_internal_greedy(&[Edge(0, 1)], &r, &a, &Forbidden::None, &[], 2, 0).unwrap() {
        InternalOutcome::Failed { step, edge, candidates, .. } => assert_eq!((step, edge, candidates), (0, Edge(0, 1), 1)),
        other => panic!("{other:?}"),
    }
    assert!(cover_internal_greedy(&[Edge(0, 2)], &r, &a, &Forbidden::None, &[], 1, 0).is_err());
    assert!(cover_internal_greedy(&[Edge(0, 1)], &r, &a, &Forbidden::None, &[Triple::new(0, 1, 5)], 1, 0).is_err());
}

#[test]
fn internal_greedy_output_passes_post_hoc_scan() {
    // internal edges inside {0..5}, reserve edges to the outside {6..29}
    let n = 30;
    let a: HashSet<Triple> = Graph::complete(n).triangles().into_iter().collect();
    let inside: Vec<Vertex> = (0..6).collect();
    let outside: Vec<Vertex> = (6..n).collect();
    let r = sample_reserve(&Graph::complete(n), &outside, &inside, 0.0, 0).unwrap();
    let internal: Vec<Edge> = Graph::complete(6).edges();
    for seed in 0..5 {
        match cover_internal_greedy(&internal, &r, &a, &Forbidden::Erdos { g: 6 }, &[], 1, seed).unwrap() {
            InternalOutcome::Covered(ts) => {
                assert_eq!(ts.len(), internal.len());
                let rep = verify_additions(n, &[], &ts, &Forbidden::Erdos { g: 6 }, &internal).unwrap();
                assert!(rep.ok(), "{rep:?}");
            }
            other => panic!("{other:?}"),
        }
    }
}

// ---------- crossing edges ----------

fn k_graph_with_center(center: Vertex, others: &[Vertex], n: u32) -> Graph {
    let mut g = Graph::new(n);
    for (i, &u) in others.iter().enumerate() {
        g.add_edge(center, u);
        for &w in &others[i + 1..] {
            g.add_edge(u, w);
        }
    }
    g
}

#[test]
fn crossing_examples() {
    let n = 8;
    let a: HashSet<Triple> = Graph::complete(n).triangles().into_iter().collect();
    // W_v empty
    let unc = Graph::new(n);
    let l = LinkGraph::build(0, &unc, &[1, 2, 3], &a);
    assert!(l.active.is_empty());
    match cover_crossing(&[l], &unc, 1.0, &Forbidden::None, &[], 0).unwrap() {
        CrossingOutcome::Covered(r) => assert!(r.triples.is_empty()),
        other => panic!("{other:?}"),
    }
    // link graph complete on four vertices
    let unc = k_graph_with_center(0, &[1, 2, 3, 4], n);
    let l = LinkGraph::build(0, &unc, &[1, 2, 3, 4], &a);
    assert_eq!(l.edges.len(), 6);
    match cover_crossing(&[l], &unc, 1.0, &Forbidden::None, &[], 0).unwrap() {
        CrossingOutcome::Covered(r) => {
            assert_eq!(r.triples.len(), 2);
            assert!(r.d1.is_empty() && r.d2.is_empty());
            let targets: Vec<Edge> = (1..5).map(|u| Edge(0, u)).collect();
            assert!(verify_additions(n, &[], &r.triples, &Forbidden::None, &targets).unwrap().ok());
        }
        other => panic!("{other:?}"),
    }
    // odd W_v
    let unc = k_graph_with_center(0, &[1, 2, 3], n);
    let l = LinkGraph::build(0, &unc, &[1, 2, 3], &a);
    assert!(matches!(
        cover_crossing(&[l], &unc, 1.0, &Forbidden::None, &[], 0).unwrap(),
        CrossingOutcome::Failed { reason: CrossingFailure::OddParity { active: 3 }, .. }
    ));
}

#[test]
fn shared_link_edge_lands_in_d1() {
    // centers 0 and 5 both see the link edge 1–2; each also has its own pair
    let n = 8;
    let a: HashSet<Triple> = Graph::complete(n).triangles().into_iter().collect();
    let mut unc = Graph::new(n);
    for (u, w) in [(1, 2), (3, 4), (1, 3), (2, 4), (6, 7), (1, 6), (2, 7)] {
        unc.add_edge(u, w);
    }
    for u in [1, 2, 3, 4] {
        unc.add_edge(0, u);
    }
    for u in [1, 2, 6, 7] {
        unc.add_edge(5, u);
    }
    let l0 = LinkGraph::build(0, &unc, &[1, 2, 3, 4], &a);
    let l5 = LinkGraph::build(5, &unc, &[1, 2, 6, 7], &a);
    assert!(l0.edges.contains(&Edge(1, 2)) && l5.edges.contains(&Edge(1, 2)));
    match cover_crossing(&[l0, l5], &unc, 1.0, &Forbidden::None, &[], 3).unwrap() {
        CrossingOutcome::Covered(r) => {
            assert_eq!(r.d1, vec![Edge(1, 2)]);
            assert!(r.triples.iter().all(|t| !t.contains_edge(Edge(1, 2))));
            assert_eq!(r.triples.len(), 4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn crossing_failure_carries_hall_witness() {
    let n = 8;
    let a: HashSet<Triple> = Graph::complete(n).triangles().into_iter().collect();
    let mut unc = Graph::new(n);
    for u in [1, 2, 3, 4] {
        unc.add_edge(0, u);
    }
    // link edges 1–2, 1–3, 1–4 only: a star, no perfect matching
    for w in [2, 3, 4] {
        unc.add_edge(1, w);
    }
    let l = LinkGraph::build(0, &unc, &[1, 2, 3, 4], &a);
    match cover_crossing(&[l], &unc, 1.0, &Forbidden::None, &[], 0).unwrap() {
        CrossingOutcome::Failed { center, reason: CrossingFailure::NoPerfectMatching { matched, needed, witness }, .. } => {
            assert_eq!((center, matched, needed), (0, 1, 2));
            let (s, ns) = witness.unwrap();
            assert!(ns.len() < s.len());
        }
        other => panic!("{other:?}"),
    }
    assert!(sparsify_probability(100, 0.05, 0.1, 0.1, 1.0, 1.0) <= 1.0);
}

// ---------- vortex, completion and the pipeline ----------

#[test]
fn vortex_sizes_follow_the_floor_formula() {
    let sizes = vortex_sizes(1000, 0.5, 3);
    assert_eq!(sizes, vec![1000, 31, 5]);
    assert_eq!(next_level_size(64, 0.5), 8);
    let levels = build_vortex(1000, 0.5, 3, 9).unwrap();
    assert_eq!(levels.iter().map(|l| l.len()).collect::<Vec<_>>(), sizes);
    for w in levels.windows(2) {
        assert!(w[1].iter().all(|v| w[0].contains(v)));
    }
    assert!(build_vortex(10, 1.0, 1, 0).is_err());
}

#[test]
fn backtracking_finds_anti_pasch_sts9_and_rejects_fano() {
    let st = PartialDecomposition::empty(9);
    match complete_by_backtracking(&st, &Forbidden::Erdos { g: 6 }, 100_000, 0).unwrap() {
        CompletionOutcome::Found(ts) => {
            let sys = TripleSystem::from_triples(9, ts).unwrap();
            assert!(sys.is_steiner());
            assert!(girth(&sys, 6).unwrap().girth.exceeds(6));
        }
        other => panic!("{other:?}"),
    }
    let st7 = PartialDecomposition::empty(7);
    assert_eq!(complete_by_backtracking(&st7, &Forbidden::Erdos { g: 6 }, 100_000, 0).unwrap(), CompletionOutcome::Infeasible);
    let st8 = PartialDecomposition::empty(8);
    assert_eq!(complete_by_backtracking(&st8, &Forbidden::None, 10, 0).unwrap(), CompletionOutcome::Infeasible);
}

#[test]
fn stage_commits_only_on_success() {
    let cfg = PipelineConfig { n: 31, ..PipelineConfig::default() };
    let levels = build_vortex(31, 0.3, MIN_LEVEL, 1).unwrap();
    assert!(levels.len() >= 2);
    for seed in 0..3 {
        let mut state = PartialDecomposition::empty(31);
        let rep = cover_down_stage(
            &mut state,
            0,
            &levels[0],
            &levels[1],
            &Forbidden::Erdos { g: 6 },
            &cfg,
            &StageOptions::default(),
            seed,
        )
        .unwrap();
        let text = rep.to_text();
        assert!(text.contains("status = "));
        match &rep.failed {
            Some((stage, _)) => {
                assert!(state.chosen.is_empty());
                assert_eq!(state.uncovered.edge_count(), 465);
                assert!(text.contains(&format!("failed_stage = {stage}")));
            }
            None => {
                let inner: HashSet<Vertex> = levels[1].iter().copied().collect();
                for e in state.uncovered.edges() {
                    assert!(inner.contains(&e.0) && inner.contains(&e.1));
                }
                let rep = verify_additions(31, &[], &state.chosen, &Forbidden::Erdos { g: 6 }, &[]).unwrap();
                assert!(rep.ok());
            }
        }
    }
}

#[test]
fn generate_small_systems() {
    let rep = generate(&PipelineConfig::default()).unwrap();
    let sys = rep.system.as_ref().expect("n = 15, g = 6 should complete");
    assert!(sys.is_steiner());
    assert!(girth(sys, 6).unwrap().girth.exceeds(6));
    assert!(rep.to_text().contains("status = ok"));
    let again = generate(&PipelineConfig::default()).unwrap();
    assert_eq!(again.system.unwrap().to_vec(), sys.to_vec());
    let fano = generate(&PipelineConfig { n: 7, ..PipelineConfig::default() }).unwrap();
    assert!(fano.system.is_none());
    assert!(fano.failure.is_some());
    assert!(generate(&PipelineConfig { n: 8, ..PipelineConfig::default() }).is_err());
}

#[test]
fn pipeline_config_parsing() {
    let c = PipelineConfig::parse("# comment\nn = 21\ng=7\n\ntheta = 0.2 # trailing\n").unwrap();
    assert_eq!((c.n, c.g, c.theta), (21, 7, 0.2));
    assert!(matches!(PipelineConfig::parse("n 21"), Err(hgsts::Error::Parse { line: 1, .. })));
    assert!(matches!(PipelineConfig::parse("\nbogus = 1"), Err(hgsts::Error::Parse { line: 2, .. })));
    assert!(PipelineConfig::default().warnings().is_empty());
    let w = PipelineConfig { gamma: 0.5, ..PipelineConfig::default() }.warnings();
    assert_eq!(w.len(), 1);
    assert!(PipelineConfig { g: 3, ..PipelineConfig::default() }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discrepancy_counts_match_direct_scan(seed in any::<u64>()) {
        let g = gnp(40, 0.4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut vs: Vec<Vertex> = (0..40).collect();
        vs.shuffle(&mut rng);
        let a = rng.gen_range(0..20);
        let d = discrepancy_check(&g, &vs[..a], &vs[20..], 0.4, 1.0).unwrap();
        let e: usize = vs[..a].iter().map(|&u| vs[20..].iter().filter(|&&w| g.has_edge(u, w)).count()).sum();
        prop_assert_eq!(d.e_st, e);
    }

    #[test]
    fn crossing_output_is_verified(seed in any::<u64>()) {
        // one center joined to an even clique: the whole link is available
        let n = 12;
        let k = 2 * (seed % 4 + 1) as u32;
        let others: Vec<Vertex> = (1..=k).collect();
        let unc = k_graph_with_center(0, &others, n);
        let a: HashSet<Triple> = Graph::complete(n).triangles().into_iter().collect();
        let l = LinkGraph::build(0, &unc, &others, &a);
        match cover_crossing(&[l], &unc, 1.0, &Forbidden::Erdos { g: 6 }, &[], seed).unwrap() {
            CrossingOutcome::Covered(r) => {
                prop_assert_eq!(r.triples.len(), k as usize / 2);
                prop_assert!(r.triples.iter().all(|t| t.contains(0)));
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }
}
