//! Prints erd_j for 5 ≤ j ≤ 10 with timings. Run with `--release`; j = 10
//! takes about half a minute.

fn main() {
    for j in 5..=10 {
        let t = std::time::Instant::now();
        println!("{j} {} {:?}", hgsts::triples::count_erd_j(j).unwrap(), t.elapsed());
    }
}
