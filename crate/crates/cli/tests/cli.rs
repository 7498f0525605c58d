use hgsts::format::{read_sts, write_sts};
use hgsts::triples::{fano, girth, verify_steiner};
use std::path::Path;
use std::process::{Command, Output};

fn hgsts(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgsts")).current_dir(dir).env_remove("HGSTS_SEED").args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest_map(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap_or_else(|| panic!("not a key = value line: {l}"));
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn get<'a>(m: &'a [(String, String)], key: &str) -> Option<&'a str> {
    m.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

#[test]
fn verify_fano() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("fano.sts"), write_sts(&fano())).unwrap();
    let six = hgsts(dir.path(), &["verify", "fano.sts", "--g-max", "6"]);
    assert_eq!(code(&six), 2, "{}", stderr(&six));
    assert!(stdout(&six).contains("girth = 6"));
    assert!(stdout(&six).contains("witness = "));
    assert!(stdout(&six).contains("result = fail"));
    let five = hgsts(dir.path(), &["verify", "fano.sts", "--g-max", "5"]);
    assert_eq!(code(&five), 0);
    assert!(stdout(&five).contains("steiner = true"));
    // the verify manifest goes to stderr and records the input digest
    let m = manifest_map(stderr(&five).trim());
    assert_eq!(get(&m, "command"), Some("verify"));
    assert!(get(&m, "input.fano.sts").unwrap().starts_with("sha256:"));
}

#[test]
fn malformed_files_cite_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.sts"), "sts 7 2\n0 1 2\n0 3 x\n").unwrap();
    let o = hgsts(dir.path(), &["verify", "bad.sts", "--g-max", "5"]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let missing = hgsts(dir.path(), &["verify", "nope.sts", "--g-max", "5"]);
    assert_eq!(code(&missing), 4);
}

#[test]
fn non_steiner_system_is_negative() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.sts"), "sts 7 1\n0 1 2\n").unwrap();
    let o = hgsts(dir.path(), &["verify", "p.sts", "--g-max", "5"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("uncovered_pairs = 18"));
}

#[test]
fn count_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = hgsts(dir.path(), &["count-erdos", "--j", "5"]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "0"));
    let o = hgsts(dir.path(), &["count-erdos", "--j", "6"]);
    assert_eq!(stdout(&o).trim(), "6");
    let o = hgsts(dir.path(), &["bound", "--n", "13", "--g", "6"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let o = hgsts(dir.path(), &["bound", "--n", "14", "--g", "5"]);
    assert_eq!(code(&o), 4);
    std::fs::write(dir.path().join("erd.txt"), "6 6\n6 7\n").unwrap();
    let o = hgsts(dir.path(), &["bound", "--n", "13", "--g", "6", "--erd-file", "erd.txt"]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn gadgets() {
    let dir = tempfile::tempdir().unwrap();
    let o = hgsts(dir.path(), &["gadget", "sphere", "--g", "5", "--out", "s.txt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("s.txt")).unwrap();
    assert!(text.starts_with("gadget sphere g=5 anchor=0,1,2 new_vertices=9\n"));
    assert!(dir.path().join("s.txt.manifest").exists());
    let o = hgsts(dir.path(), &["gadget", "pathcover", "--x", "2", "--out", "p.txt"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("p.txt")).unwrap();
    assert!(text.starts_with("gadget pathcover x=2 midpoints=24\n"));
    let o = hgsts(dir.path(), &["gadget", "wheel", "--out", "w.txt"]);
    assert_eq!(code(&o), 4);
    // a triangle is even; the decomposition covers it together with ∧X
    std::fs::write(dir.path().join("l.graph"), "graph 3 3\n0 1\n0 2\n1 2\n").unwrap();
    let o = hgsts(dir.path(), &["gadget", "cycledecomp", "--input", "l.graph", "--out", "c.txt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    std::fs::write(dir.path().join("odd.graph"), "graph 3 2\n0 1\n1 2\n").unwrap();
    assert_eq!(code(&hgsts(dir.path(), &["gadget", "cycledecomp", "--input", "odd.graph", "--out", "d.txt"])), 4);
    std::fs::write(dir.path().join("z.sts"), "sts 6 1\n0 1 2\n").unwrap();
    let o = hgsts(dir.path(), &["gadget", "spherecover", "--g", "6", "--input", "z.sts", "--out", "sc.txt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn nibble_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = hgsts(dir.path(), &["nibble", "--n", "30", "--g", "6", "--seed", "4", "--cutoff", "fraction:0.5", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("t,p,rho,f_edge,f_threat,A_size,"));
    let sts = std::fs::read_to_string(dir.path().join("r.sts")).unwrap();
    let partial = read_sts(&sts).unwrap();
    assert!(partial.is_partial_steiner());
    assert!(girth(&partial, 6).unwrap().girth.exceeds(6));
    let m = manifest_map(&std::fs::read_to_string(dir.path().join("r.manifest")).unwrap());
    assert_eq!(get(&m, "seed"), Some("4"));
    assert_eq!(get(&m, "param.n"), Some("30"));
    assert!(get(&m, "output.r.csv").unwrap().starts_with("sha256:"));
    assert!(get(&m, "wall_clock_s").is_some());
    // the removal baseline: g = 4 only forbids shared edges
    let o = hgsts(dir.path(), &["nibble", "--n", "20", "--g", "4", "--cutoff", "exhaust", "--out", "b"]);
    assert!(matches!(code(&o), 0 | 3), "{}", stderr(&o));
    assert_eq!(code(&hgsts(dir.path(), &["nibble", "--n", "20", "--cutoff", "nope"])), 4);
    assert_eq!(code(&hgsts(dir.path(), &["nibble", "--g", "6"])), 4);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let seed_of = |args: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_hgsts"));
        c.current_dir(dir.path()).env_remove("HGSTS_SEED").args(args);
        if let Some(s) = env {
            c.env("HGSTS_SEED", s);
        }
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let m = manifest_map(&std::fs::read_to_string(dir.path().join("s.manifest")).unwrap());
        get(&m, "seed").unwrap().to_string()
    };
    let base = ["nibble", "--n", "15", "--cutoff", "steps:3", "--out", "s"];
    assert_eq!(seed_of(&base, None), "0");
    assert_eq!(seed_of(&base, Some("17")), "17");
    std::fs::write(dir.path().join("c.cfg"), "# run\nseed = 9\nn = 15\n").unwrap();
    let with_cfg = ["nibble", "--config", "c.cfg", "--cutoff", "steps:3", "--out", "s"];
    assert_eq!(seed_of(&with_cfg, Some("17")), "9");
    let mut flag = with_cfg.to_vec();
    flag.extend(["--seed", "3"]);
    assert_eq!(seed_of(&flag, Some("17")), "3");
    std::fs::write(dir.path().join("bad.cfg"), "n = 15\nwhat\n").unwrap();
    let o = hgsts(dir.path(), &["nibble", "--config", "bad.cfg"]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("line 2"));
    let o = Command::new(env!("CARGO_BIN_EXE_hgsts"))
        .current_dir(dir.path())
        .env("HGSTS_SEED", "x")
        .args(base)
        .output()
        .unwrap();
    assert_eq!(code(&o), 4);
}

#[test]
fn trials_are_suffixed_and_independent_of_jobs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["nibble", "--n", "21", "--seed", "2", "--cutoff", "steps:20", "--trials", "3", "--out", "t"];
    assert_eq!(code(&hgsts(a.path(), &args)), 0);
    let mut more = args.to_vec();
    more.extend(["--jobs", "3"]);
    assert_eq!(code(&hgsts(b.path(), &more)), 0);
    for i in 0..3 {
        let f = format!("t_trial{i}.csv");
        assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap());
    }
    assert_ne!(std::fs::read(a.path().join("t_trial0.sts")).unwrap(), std::fs::read(a.path().join("t_trial1.sts")).unwrap());
}

#[test]
fn generate_writes_only_verified_systems() {
    let dir = tempfile::tempdir().unwrap();
    let o = hgsts(dir.path(), &["generate", "--n", "7", "--g", "5", "--out", "f.sts"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sys = read_sts(&std::fs::read_to_string(dir.path().join("f.sts")).unwrap()).unwrap();
    assert!(verify_steiner(&sys).is_steiner);
    assert_eq!(girth(&sys, 6).unwrap().girth, hgsts::triples::Girth::Finite(6));
    let o = hgsts(dir.path(), &["generate", "--n", "7", "--g", "6", "--out", "p.sts"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("stage"), "{}", stderr(&o));
    assert!(!dir.path().join("p.sts").exists());
    assert!(dir.path().join("p.sts.report").exists());
    let o = hgsts(dir.path(), &["generate", "--n", "15", "--g", "6", "--out", "a.sts"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = hgsts(dir.path(), &["verify", "a.sts", "--g-max", "6"]);
    assert_eq!(code(&v), 0);
    assert_eq!(code(&hgsts(dir.path(), &["generate", "--n", "8", "--out", "x.sts"])), 4);
    std::fs::write(dir.path().join("g.cfg"), "n = 9\ng = 6\n").unwrap();
    let o = hgsts(dir.path(), &["generate", "--config", "g.cfg", "--n", "15", "--out", "c.sts"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest_map(&std::fs::read_to_string(dir.path().join("c.sts.manifest")).unwrap());
    assert_eq!(get(&m, "param.n"), Some("15"));
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hgsts(dir.path(), &["frobnicate"])), 4);
    assert_eq!(code(&hgsts(dir.path(), &["--help"])), 0);
    assert_eq!(code(&hgsts(dir.path(), &["verify"])), 4);
}
