use hgsts::process::erdos_family_complete;
use hgsts::weights::*;
use hgsts::Triple;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};

type Q = Ratio<i64>;

struct Instance {
    ground: usize,
    weights: Vec<Q>,
    sets: Vec<(Vec<usize>, u64)>,
    d: usize,
}

/// Dyadic weights keep every product and sum exact in a double.
fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let ground = rng.gen_range(1..=12);
    let d = rng.gen_range(1..=4usize);
    let weights = (0..ground).map(|_| Q::new(rng.gen_range(0..=16), 8)).collect();
    let count = rng.gen_range(0..=20);
    let sets = (0..count)
        .map(|_| {
            let size = rng.gen_range(1..=d.min(ground));
            let mut s: Vec<usize> = Vec::new();
            while s.len() < size {
                let e = rng.gen_range(0..ground);
                if !s.contains(&e) {
                    s.push(e);
                }
            }
            (s, rng.gen_range(1..=3))
        })
        .collect();
    Instance { ground, weights, sets, d }
}

fn oracle_psi(inst: &Instance, h_mask: u32) -> Q {
    let mut total = Q::from_integer(0);
    for (s, mult) in &inst.sets {
        let s_mask: u32 = s.iter().map(|&e| 1u32 << e).sum();
        if s_mask & h_mask != h_mask {
            continue;
        }
        let mut prod = Q::from_integer(*mult as i64);
        for e in 0..inst.ground {
            if s_mask >> e & 1 == 1 && h_mask >> e & 1 == 0 {
                prod *= inst.weights[e];
            }
        }
        total += prod;
    }
    total
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn multiset(inst: &Instance) -> ConfigMultiset {
    let mut x = ConfigMultiset::new(inst.d);
    for (s, m) in &inst.sets {
        x.push(s.clone(), *m).unwrap();
    }
    x
}

fn mask_to_set(ground: usize, mask: u32) -> Vec<usize> {
    (0..ground).filter(|&e| mask >> e & 1 == 1).collect()
}

#[test]
fn psi_and_kappa_match_subset_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let x = multiset(&inst);
        let wf = WeightSystem::new(inst.weights.iter().map(|&q| to_f64(q)).collect()).unwrap();
        let wq = WeightSystem::new(inst.weights.clone()).unwrap();
        let mut best = Q::from_integer(0);
        for mask in 0u32..(1 << inst.ground) {
            let want = oracle_psi(&inst, mask);
            let h = mask_to_set(inst.ground, mask);
            assert_eq!(psi(&wq, &x, &h).unwrap(), want);
            assert_eq!(psi(&wf, &x, &h).unwrap(), to_f64(want));
            if want > best {
                best = want;
            }
        }
        let (k, arg) = kappa(&wf, &x).unwrap();
        assert_eq!(k, to_f64(best));
        assert_eq!(psi(&wf, &x, &arg).unwrap(), k);
        let (kq, _) = kappa(&wq, &x).unwrap();
        assert_eq!(kq, best);
    }
}

#[test]
fn psi_rejects_out_of_range_elements() {
    let ws = WeightSystem::new(vec![0.5; 3]).unwrap();
    let x = ConfigMultiset::from_sets(2, [vec![0, 5]]).unwrap();
    assert!(psi(&ws, &x, &[]).is_err());
    assert!(WeightSystem::new(vec![-1.0]).is_err());
    assert!(ConfigMultiset::from_sets(1, [vec![0, 1]]).is_err());
}

struct SpreadOracle {
    min_z: f64,
    min_y: f64,
}

/// WS1, WS2 and WS4 for the trivial vortex recomputed by full scans.
fn spread_oracle(fam: &[Vec<Triple>], n: f64) -> SpreadOracle {
    let j = fam[0].len() + 2;
    let sorted: Vec<Vec<Triple>> = fam
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort();
            c
        })
        .collect();
    let mut rs: BTreeMap<Vec<Triple>, ()> = BTreeMap::new();
    for c in &sorted {
        for mask in 1u32..(1 << c.len()) {
            rs.insert((0..c.len()).filter(|i| mask >> i & 1 == 1).map(|i| c[i]).collect(), ());
        }
    }
    let mut min_z: f64 = 0.0;
    let mut min_y: f64 = 0.0;
    for r in rs.keys() {
        let count = sorted.iter().filter(|c| r.iter().all(|t| c.contains(t))).count() as f64;
        let v = if r.len() == 1 || r.len() == j - 2 { r.len() + 2 } else { r.len() + 3 };
        min_z = min_z.max(count / n.powi(j as i32 - v as i32));
        if r.len() == 1 {
            min_y = min_y.max(count / n.powi(j as i32 - 3));
        }
    }
    let mut pairs: HashMap<(Triple, Triple), u64> = HashMap::new();
    for a in &sorted {
        for b in &sorted {
            let common = a.iter().filter(|t| b.contains(t)).count();
            if common + 1 == a.len() {
                let ta = *a.iter().find(|t| !b.contains(t)).unwrap();
                let tb = *b.iter().find(|t| !a.contains(t)).unwrap();
                *pairs.entry((ta, tb)).or_default() += 1;
            }
        }
    }
    for &c in pairs.values() {
        min_z = min_z.max(c as f64 / n.powi(j as i32 - 4));
    }
    SpreadOracle { min_z, min_y }
}

#[test]
fn well_spread_threshold_on_k10_pasch_family() {
    let fam = erdos_family_complete(10, 6).unwrap();
    let configs = fam.configs().to_vec();
    assert_eq!(configs.len(), 210 * 30);
    let oracle = spread_oracle(&configs, 10.0);
    let ctx = VortexContext::trivial(10);
    let rep = check_well_spread(&configs, 6, &ctx, oracle.min_y, oracle.min_z).unwrap();
    assert!((rep.min_z - oracle.min_z).abs() <= 1e-12 * oracle.min_z);
    assert!((rep.min_y - oracle.min_y).abs() <= 1e-12 * oracle.min_y);
    assert!(rep.pass, "{rep:?}");
    let tight = check_well_spread(&configs, 6, &ctx, oracle.min_y, 0.99 * oracle.min_z).unwrap();
    assert!(!tight.pass);
    let loose_y = check_well_spread(&configs, 6, &ctx, 0.99 * oracle.min_y, oracle.min_z).unwrap();
    assert!(!loose_y.pass);
}

#[test]
fn well_spread_rejects_shared_edges_and_bad_sizes() {
    let ctx = VortexContext::trivial(6);
    let bad = vec![vec![Triple::new(0, 1, 2), Triple::new(0, 1, 3)]];
    let rep = check_well_spread(&bad, 4, &ctx, 1e9, 1e9).unwrap();
    assert!(!rep.pass);
    assert!(!rep.passed[&Ws::Ws0]);
    assert!(check_well_spread(&bad, 5, &ctx, 1.0, 1.0).is_err());
    assert!(check_well_spread(&bad, 3, &ctx, 1.0, 1.0).is_err());
}

#[test]
fn v_j_values() {
    assert_eq!(v_j(6, 1), 3);
    assert_eq!(v_j(6, 2), 5);
    assert_eq!(v_j(6, 3), 6);
    assert_eq!(v_j(6, 4), 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_scales_with_lambda(seed in any::<u64>(), num in 1i64..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let x = multiset(&inst);
        let wq = WeightSystem::new(inst.weights.clone()).unwrap();
        let lambda = Q::new(num, 4);
        let scaled = wq.scaled(lambda);
        for mask in [0u32, 1, 3] {
            let h = mask_to_set(inst.ground, mask);
            // Each configuration S contributes Π over S∖H, so the scale is λ^{|S∖H|}.
            let mut want = Q::from_integer(0);
            for (s, m) in &inst.sets {
                if h.iter().all(|e| s.contains(e)) {
                    let mut prod = Q::from_integer(*m as i64);
                    for e in s.iter().filter(|e| !h.contains(e)) {
                        prod *= inst.weights[*e] * lambda;
                    }
                    want += prod;
                }
            }
            prop_assert_eq!(psi(&scaled, &x, &h).unwrap(), want);
        }
    }

    #[test]
    fn kappa_dominates_every_psi(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let x = multiset(&inst);
        let wq = WeightSystem::new(inst.weights.clone()).unwrap();
        let (k, _) = kappa(&wq, &x).unwrap();
        for (s, _) in &inst.sets {
            prop_assert!(psi(&wq, &x, s).unwrap() <= k);
        }
        prop_assert!(psi(&wq, &x, &[]).unwrap() <= k);
    }
}
