use hgsts::triples::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

// ---------- oracles (no shared code with the library search) ----------

fn k_subsets(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Least j in [4, g_max] such that some j vertices contain ≥ j−2 triples.
fn girth_oracle(n: usize, triples: &[[u32; 3]], g_max: usize) -> Option<usize> {
    for j in 4..=g_max.min(n) {
        let mut hit = false;
        k_subsets(n, j, &mut |vs| {
            if hit {
                return;
            }
            let inside = triples.iter().filter(|t| t.iter().all(|v| vs.contains(&(*v as usize)))).count();
            if inside >= j - 2 {
                hit = true;
            }
        });
        if hit {
            return Some(j);
        }
    }
    None
}

fn oracle_span(ts: &[[u32; 3]]) -> usize {
    let mut seen = [false; 64];
    let mut c = 0;
    for t in ts {
        for &v in t {
            if !seen[v as usize] {
                seen[v as usize] = true;
                c += 1;
            }
        }
    }
    c
}

fn oracle_is_erdos(ts: &[[u32; 3]]) -> bool {
    let m = ts.len();
    let j = m + 2;
    if oracle_span(ts) != j {
        return false;
    }
    for a in 0..m {
        for b in a + 1..m {
            let common = ts[a].iter().filter(|v| ts[b].contains(v)).count();
            if common >= 2 {
                return false;
            }
        }
    }
    for mask in 0u32..(1 << m) {
        let w = mask.count_ones() as usize;
        if w >= 2 && w + 3 <= j {
            let sub: Vec<[u32; 3]> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| ts[i]).collect();
            if oracle_span(&sub) < w + 3 {
                return false;
            }
        }
    }
    true
}

/// erd_j by brute force over all (j−3)-subsets of the other triples on [j].
fn erd_oracle(j: usize) -> u64 {
    let mut all = Vec::new();
    for a in 0..j as u32 {
        for b in a + 1..j as u32 {
            for c in b + 1..j as u32 {
                all.push([a, b, c]);
            }
        }
    }
    let others: Vec<[u32; 3]> = all.into_iter().filter(|t| *t != [0, 1, 2]).collect();
    let mut count = 0;
    k_subsets(others.len(), j - 3, &mut |idx| {
        let mut ts = vec![[0, 1, 2]];
        ts.extend(idx.iter().map(|&i| others[i]));
        if oracle_is_erdos(&ts) {
            count += 1;
        }
    });
    count
}

fn affine_plane_3() -> Vec<[u32; 3]> {
    // points (x, y) of Z_3^2 labelled 3x + y; lines {p, p+d, p+2d}
    let mut lines = std::collections::BTreeSet::new();
    for x in 0..3u32 {
        for y in 0..3u32 {
            for (dx, dy) in [(0, 1), (1, 0), (1, 1), (1, 2)] {
                let mut l: Vec<u32> = (0..3).map(|k| 3 * ((x + k * dx) % 3) + (y + k * dy) % 3).collect();
                l.sort();
                lines.insert([l[0], l[1], l[2]]);
            }
        }
    }
    lines.into_iter().collect()
}

fn to_sys(n: u32, ts: &[[u32; 3]]) -> TripleSystem {
    TripleSystem::from_triples(n, ts.iter().map(|t| Triple::new(t[0], t[1], t[2]))).unwrap()
}

fn random_partial_system(rng: &mut ChaCha8Rng) -> (u32, Vec<[u32; 3]>) {
    let n = rng.gen_range(6..=20u32);
    let m = rng.gen_range(1..=40usize);
    let linear = rng.gen_bool(0.7);
    let mut ts: Vec<[u32; 3]> = Vec::new();
    let mut tries = 0;
    while ts.len() < m && tries < 4000 {
        tries += 1;
        let mut v: Vec<u32> = (0..n).collect();
        v.shuffle(rng);
        let mut t = [v[0], v[1], v[2]];
        t.sort();
        if ts.contains(&t) {
            continue;
        }
        if linear && ts.iter().any(|s| s.iter().filter(|x| t.contains(x)).count() >= 2) {
            continue;
        }
        ts.push(t);
    }
    (n, ts)
}

// ---------- frozen values ----------

const ERD_6: u64 = 6;

#[test]
fn erd_6_matches_brute_force_and_is_pinned() {
    let oracle = erd_oracle(6);
    assert_eq!(oracle, ERD_6);
    assert_eq!(count_erd_j(6).unwrap(), ERD_6);
}

#[test]
fn erd_7_and_8_match_brute_force() {
    assert_eq!(count_erd_j(7).unwrap(), erd_oracle(7));
    assert_eq!(count_erd_j(8).unwrap(), erd_oracle(8));
}

#[test]
fn fano_pasch_configurations_match_brute_force() {
    let f = fano();
    let ts: Vec<[u32; 3]> = f.triples().map(|t| t.0).collect();
    let mut expected = Vec::new();
    k_subsets(7, 4, &mut |idx| {
        let sub: Vec<[u32; 3]> = idx.iter().map(|&i| ts[i]).collect();
        if oracle_is_erdos(&sub) {
            expected.push(sub);
        }
    });
    let got = find_erdos_configs(&f, 6, 6, None).unwrap();
    let got: Vec<Vec<[u32; 3]>> = got.iter().map(|c| c.triples.iter().map(|t| t.0).collect()).collect();
    assert_eq!(got, expected);
    assert_eq!(got.len(), 7);
}

#[test]
fn affine_plane_is_steiner() {
    let ag = affine_plane_3();
    assert_eq!(ag.len(), 12);
    assert!(verify_steiner(&to_sys(9, &ag)).is_steiner);
}

#[test]
fn girth_agrees_with_subset_scan_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let (n, ts) = random_partial_system(&mut rng);
        let sys = to_sys(n, &ts);
        let cert = girth(&sys, 8).unwrap();
        match girth_oracle(n as usize, &ts, 8) {
            Some(j) => {
                assert_eq!(cert.girth, Girth::Finite(j as u32), "system {ts:?}");
                let w = cert.witness.unwrap();
                assert_eq!((w.len(), w.vertex_span), (j - 2, j));
            }
            None => assert_eq!(cert.girth, Girth::Exceeds(8)),
        }
    }
}

#[test]
fn erdos_configs_satisfy_minimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let (n, ts) = random_partial_system(&mut rng);
        let sys = to_sys(n, &ts);
        for c in find_erdos_configs(&sys, 5, 8, None).unwrap() {
            let j = c.len() + 2;
            let raw: Vec<[u32; 3]> = c.triples.iter().map(|t| t.0).collect();
            assert!(oracle_is_erdos(&raw));
            for mask in 1u32..(1 << c.len()) {
                let w = mask.count_ones() as usize;
                let sub: Vec<[u32; 3]> = (0..c.len()).filter(|i| mask >> i & 1 == 1).map(|i| raw[i]).collect();
                assert!(oracle_span(&sub) >= w + 2);
                if (2..=j - 3).contains(&w) {
                    assert!(oracle_span(&sub) >= w + 3);
                }
            }
        }
    }
}

#[test]
fn anchored_search_is_a_filter_of_full_search() {
    let f = fano();
    let all = find_erdos_configs(&f, 5, 7, None).unwrap();
    for t in f.triples() {
        let anchored = find_erdos_configs(&f, 5, 7, Some(&[*t])).unwrap();
        let filtered: Vec<_> = all.iter().filter(|c| c.triples.contains(t)).cloned().collect();
        assert_eq!(anchored, filtered);
    }
}

#[test]
fn bound_dual_path_small_n() {
    let erd = BTreeMap::from([(6u32, ERD_6)]);
    for n in [7u64, 9, 13, 15] {
        let log = counting_lower_bound_log(n, 6, &erd, 1.0).unwrap();
        let nf = n as f64;
        let base = (1.0 - 1.0 / nf) * nf * (-2.0 - ERD_6 as f64 / 24.0f64).exp();
        let linear = base.powf(nf * nf / 6.0);
        assert!((linear.ln() - log).abs() <= 1e-9 * log.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn girth_relabel_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, ts) = random_partial_system(&mut rng);
        let sys = to_sys(n, &ts);
        let mut perm: Vec<u32> = (0..n).collect();
        perm.shuffle(&mut rng);
        let a = girth(&sys, 8).unwrap().girth;
        let b = girth(&sys.relabel(&perm).unwrap(), 8).unwrap().girth;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn girth_exceeds_iff_no_erdos_and_linear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, ts) = random_partial_system(&mut rng);
        let sys = to_sys(n, &ts);
        let g = rng.gen_range(5..=8u32);
        let big = girth(&sys, g).unwrap().girth.exceeds(g);
        let other = sys.is_partial_steiner() && find_erdos_configs(&sys, 5, g as usize, None).unwrap().is_empty();
        prop_assert_eq!(big, other);
    }

    #[test]
    fn index_is_inverse_of_triples(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, ts) = random_partial_system(&mut rng);
        let mut sys = to_sys(n, &ts);
        if let Some(t) = ts.first() {
            sys.remove(&Triple::new(t[0], t[1], t[2]));
        }
        prop_assert!(sys.index_consistent());
    }
}
