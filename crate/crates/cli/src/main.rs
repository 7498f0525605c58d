mod manifest;

use clap::{Args, Parser, Subcommand};
use hgsts::coverdown::{generate, PipelineConfig};
use hgsts::format::{gadget_header, read_cfgfam, read_graph, read_sts, write_graph, write_sts, write_sts_with};
use hgsts::gadgets::{build_path_cover, build_sphere, decompose_short_cycles, sphere_cover_decompose, VertexAllocator};
use hgsts::process::{fmt_real, run_process, Cutoff, Forbidden, ForbiddenFamily, Outcome, ProcessInput, ProcessOptions};
use hgsts::rng::child_seed;
use hgsts::triples::{count_erd_j, counting_lower_bound_log, girth, verify_steiner};
use hgsts::{Error, Triple};
use manifest::Manifest;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 2;
pub const EXIT_STAGE: u8 = 3;
pub const EXIT_PARAM: u8 = 4;
pub const EXIT_PARSE: u8 = 5;
const EXIT_CRASH: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "hgsts", version, about = "High-girth Steiner triple systems: verification, the triple process, gadgets, bounds and generation")]
struct Cli {
    /// Write the run manifest here instead of next to the primary output.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check that a file is a Steiner triple system of girth > g_max.
    Verify {
        path: PathBuf,
        #[arg(long)]
        g_max: u32,
    },
    /// Run the high-girth triple process on K_n.
    Nibble(NibbleArgs),
    /// Emit an absorber gadget.
    Gadget {
        #[command(subcommand)]
        kind: GadgetKind,
    },
    /// erd_j: Erdős j-configurations on {0..j−1} through {0,1,2}.
    CountErdos {
        #[arg(long)]
        j: u32,
    },
    /// Logarithm of the lower bound on the number of STS(N) of girth > g.
    Bound {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        g: u32,
        /// Correction exponent in (1 − N^{−c}); 0 drops the factor.
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        /// Lines `j value` giving erd_j for 6 ≤ j ≤ g.
        #[arg(long)]
        erd_file: Option<PathBuf>,
    },
    /// Best-effort construction of an STS(n) of girth > g.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone)]
struct TrialArgs {
    /// Independent seeded runs; outputs get a `_trial<i>` suffix.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Worker threads for the trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug, Clone)]
struct NibbleArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    g: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// steps:<k>, beta:<b>, fraction:<f> or exhaust.
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    threat_samples: Option<usize>,
    /// Error factor C of the edge threshold.
    #[arg(long)]
    c: Option<f64>,
    /// Explicit forbidden family (cfgfam file) instead of all Erdős configurations.
    #[arg(long)]
    family: Option<PathBuf>,
    /// Output prefix: <out>.csv, <out>.sts, <out>.manifest.
    #[arg(long, default_value = "nibble")]
    out: PathBuf,
    #[command(flatten)]
    trials: TrialArgs,
}

#[derive(Args, Debug, Clone)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    g: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p_target: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    retries: Option<usize>,
    /// Output STS file; the report and manifest go next to it.
    #[arg(long, default_value = "generated.sts")]
    out: PathBuf,
    #[command(flatten)]
    trials: TrialArgs,
}

#[derive(Subcommand, Debug)]
enum GadgetKind {
    /// ∧X: 6|X|² paths of length 2 between every pair of X = {0..x−1}.
    Pathcover {
        #[arg(long)]
        x: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// g-sphere on the anchor triple {0,1,2}.
    Sphere {
        #[arg(long)]
        g: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decomposition of L ∪ (all g-spheres on Z) for the triples of an STS file on Z.
    Spherecover {
        #[arg(long)]
        g: u32,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Short-cycle decomposition of L ∪ ∧X for an even graph L on X.
    Cycledecomp {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A command failure with its exit code.
struct Fail {
    code: u8,
    msg: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => EXIT_PARSE,
            Error::Invariant(_) => EXIT_CRASH,
            _ => EXIT_PARAM,
        };
        Fail { code, msg: e.to_string() }
    }
}

fn fail(code: u8, msg: impl Into<String>) -> Fail {
    Fail { code, msg: msg.into() }
}

type CmdResult = Result<u8, Fail>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_OK,
                _ => EXIT_PARAM,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Verify { path, g_max } => cmd_verify(&cli, path, *g_max),
        Cmd::Nibble(a) => cmd_nibble(&cli, a),
        Cmd::Gadget { kind } => cmd_gadget(&cli, kind),
        Cmd::CountErdos { j } => cmd_count_erdos(&cli, *j),
        Cmd::Bound { n, g, c, erd_file } => cmd_bound(&cli, *n, *g, *c, erd_file.as_deref()),
        Cmd::Generate(a) => cmd_generate(&cli, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn read_file(path: &Path, m: &mut Manifest) -> Result<String, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(EXIT_PARAM, format!("{}: {e}", path.display())))?;
    m.input(path, text.as_bytes());
    Ok(text)
}

fn write_file(path: &Path, text: &str, m: &mut Manifest) -> Result<(), Fail> {
    std::fs::write(path, text).map_err(|e| fail(EXIT_PARAM, format!("{}: {e}", path.display())))?;
    m.output(path, text.as_bytes());
    Ok(())
}

/// `<path>.<ext>` keeping the full file name.
fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn trial_path(path: &Path, trial: usize, trials: usize) -> PathBuf {
    if trials <= 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_trial{trial}.{}", ext.to_string_lossy()),
        None => format!("{stem}_trial{trial}"),
    };
    path.with_file_name(name)
}

fn finish(cli: &Cli, m: &Manifest, default: Option<PathBuf>) -> Result<(), Fail> {
    let text = m.render();
    match cli.manifest.clone().or(default) {
        Some(p) => std::fs::write(&p, text).map_err(|e| fail(EXIT_PARAM, format!("{}: {e}", p.display()))),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn default_seed() -> Result<u64, Fail> {
    match std::env::var("HGSTS_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| fail(EXIT_PARAM, format!("HGSTS_SEED is not an integer: {s:?}"))),
        Err(_) => Ok(0),
    }
}

/// `key = value` lines with 1-based line numbers kept for errors.
fn read_kv(text: &str) -> Result<BTreeMap<String, (usize, String)>, Fail> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse { line: i + 1, msg: format!("expected `key = value`, got `{line}`") }.into());
        };
        out.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

fn cmd_verify(cli: &Cli, path: &Path, g_max: u32) -> CmdResult {
    let mut m = Manifest::new("verify");
    m.param("path", path.display());
    m.param("g_max", g_max);
    let text = read_file(path, &mut m)?;
    let sys = read_sts(&text)?;
    let st = verify_steiner(&sys);
    let cert = girth(&sys, g_max)?;
    println!("n = {}", sys.n());
    println!("triples = {}", sys.len());
    println!("steiner = {}", st.is_steiner);
    println!("uncovered_pairs = {}", st.n_uncovered);
    println!("multiply_covered_pairs = {}", st.n_multiply_covered);
    for e in &st.uncovered {
        println!("uncovered = {e}");
    }
    for (e, k) in &st.multiply_covered {
        println!("multiply_covered = {e} x{k}");
    }
    println!("girth = {}", cert.girth);
    if let Some(w) = &cert.witness {
        let ts: Vec<String> = w.triples.iter().map(|t| t.to_string()).collect();
        println!("witness = {}", ts.join(";"));
    }
    let ok = st.is_steiner && cert.girth.exceeds(g_max);
    println!("result = {}", if ok { "pass" } else { "fail" });
    m.param("result", if ok { "pass" } else { "fail" });
    finish(cli, &m, None)?;
    Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
}

#[derive(Clone, Debug)]
struct NibbleConfig {
    n: u32,
    g: u32,
    seed: u64,
    cutoff: String,
    record_every: Option<usize>,
    threat_samples: usize,
    c: f64,
}

fn parse_cutoff(s: &str) -> Result<Cutoff, Fail> {
    let bad = || fail(EXIT_PARAM, format!("bad cutoff `{s}` (steps:<k>, beta:<b>, fraction:<f>, exhaust)"));
    if s == "exhaust" {
        return Ok(Cutoff::Exhaust);
    }
    let (k, v) = s.split_once(':').ok_or_else(bad)?;
    match k {
        "steps" => Ok(Cutoff::Steps(v.parse().map_err(|_| bad())?)),
        "beta" => Ok(Cutoff::Beta(v.parse().map_err(|_| bad())?)),
        "fraction" => Ok(Cutoff::EdgeFraction(v.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn nibble_config(a: &NibbleArgs, m: &mut Manifest) -> Result<NibbleConfig, Fail> {
    let mut c =
        NibbleConfig { n: 0, g: 6, seed: default_seed()?, cutoff: "fraction:0.9".into(), record_every: None, threat_samples: 64, c: 2.0 };
    let mut have_n = false;
    if let Some(p) = &a.config {
        let text = read_file(p, m)?;
        for (k, (line, v)) in read_kv(&text)? {
            let perr = |msg: String| Fail::from(Error::Parse { line, msg });
            let num = |v: &str| v.parse::<f64>().map_err(|_| perr(format!("bad value `{v}` for {k}")));
            match k.as_str() {
                "n" => {
                    c.n = num(&v)? as u32;
                    have_n = true;
                }
                "g" => c.g = num(&v)? as u32,
                "seed" => c.seed = v.parse().map_err(|_| perr(format!("bad seed `{v}`")))?,
                "cutoff" => c.cutoff = v,
                "record_every" => c.record_every = Some(num(&v)? as usize),
                "threat_samples" => c.threat_samples = num(&v)? as usize,
                "c" => c.c = num(&v)?,
                _ => return Err(perr(format!("unknown key `{k}`"))),
            }
        }
    }
    if let Some(n) = a.n {
        c.n = n;
        have_n = true;
    }
    if !have_n {
        return Err(fail(EXIT_PARAM, "n is required (--n or config)"));
    }
    if let Some(g) = a.g {
        c.g = g;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(s) = &a.cutoff {
        c.cutoff = s.clone();
    }
    if a.record_every.is_some() {
        c.record_every = a.record_every;
    }
    if let Some(s) = a.threat_samples {
        c.threat_samples = s;
    }
    if let Some(x) = a.c {
        c.c = x;
    }
    Ok(c)
}

fn cmd_nibble(cli: &Cli, a: &NibbleArgs) -> CmdResult {
    let mut m = Manifest::new("nibble");
    let cfg = nibble_config(a, &mut m)?;
    let cutoff = parse_cutoff(&cfg.cutoff)?;
    let forbidden = match &a.family {
        Some(p) => {
            let (_, configs) = read_cfgfam(&read_file(p, &mut m)?)?;
            Forbidden::Explicit(ForbiddenFamily::new(configs)?)
        }
        None => Forbidden::Erdos { g: cfg.g },
    };
    m.param("n", cfg.n);
    m.param("g", cfg.g);
    m.param("cutoff", &cfg.cutoff);
    m.param("record_every", cfg.record_every.map_or("auto".to_string(), |x| x.to_string()));
    m.param("threat_samples", cfg.threat_samples);
    m.param("c", fmt_real(cfg.c));
    m.param("family", a.family.as_ref().map_or("erdos".to_string(), |p| p.display().to_string()));
    m.param("trials", a.trials.trials);
    m.seed(cfg.seed);
    let input = ProcessInput::complete(cfg.n, forbidden)?;
    let opts = ProcessOptions { record_every: cfg.record_every, threat_samples: cfg.threat_samples, c: cfg.c, predict: true };
    let trials = a.trials.trials.max(1);
    let seeds: Vec<u64> =
        (0..trials).map(|i| if trials == 1 { cfg.seed } else { child_seed(cfg.seed, "trial", i as u64) }).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.trials.jobs.max(1)).build().map_err(|e| fail(EXIT_PARAM, e.to_string()))?;
    let runs: Vec<_> = pool.install(|| seeds.par_iter().map(|&s| run_process(&input, cutoff, &opts, s)).collect());
    let mut code = EXIT_OK;
    for (i, run) in runs.into_iter().enumerate() {
        let run = run?;
        let prefix = trial_path(&a.out, i, trials);
        write_file(&sibling(&prefix, "csv"), &run.trace.to_csv(), &mut m)?;
        let comments = vec![format!("seed={}", seeds[i]), format!("outcome={:?}", run.outcome)];
        write_file(&sibling(&prefix, "sts"), &write_sts_with(cfg.n, run.chosen.iter().copied(), &comments), &mut m)?;
        match run.outcome {
            Outcome::ReachedCutoff { t } => println!("trial {i}: seed {} reached cutoff at t = {t}", seeds[i]),
            Outcome::Starved { t } => {
                println!("trial {i}: seed {} starved at t = {t}", seeds[i]);
                code = EXIT_STAGE;
            }
        }
    }
    finish(cli, &m, Some(sibling(&a.out, "manifest")))?;
    Ok(code)
}

fn cmd_gadget(cli: &Cli, kind: &GadgetKind) -> CmdResult {
    let mut m = Manifest::new("gadget");
    let (out, text) = match kind {
        GadgetKind::Pathcover { x, out } => {
            m.param("kind", "pathcover");
            m.param("x", x);
            let base: Vec<u32> = (0..*x).collect();
            let mut alloc = VertexAllocator::new(*x);
            let pc = build_path_cover(&base, &mut alloc)?;
            let mids: usize = pc.aug_paths.values().map(|v| v.len()).sum();
            let g = hgsts::Graph::from_edges(alloc.peek(), pc.edges());
            let mut s = gadget_header("pathcover", &[("x", x.to_string()), ("midpoints", mids.to_string())]);
            s.push_str(&write_graph(&g));
            (out, s)
        }
        GadgetKind::Sphere { g, out } => {
            m.param("kind", "sphere");
            m.param("g", g);
            let mut alloc = VertexAllocator::new(3);
            let sp = build_sphere(Triple::new(0, 1, 2), *g, &mut alloc)?;
            let n = alloc.peek();
            let mut s = gadget_header(
                "sphere",
                &[("g", g.to_string()), ("anchor", "0,1,2".into()), ("new_vertices", sp.new_vertices().len().to_string())],
            );
            s.push_str(&write_graph(&hgsts::Graph::from_edges(n, sp.edges.iter().copied())));
            s.push_str(&write_sts_with(n, sp.in_decomp.iter().copied(), &["in-decomposition".into()]));
            s.push_str(&write_sts_with(n, sp.out_decomp.iter().copied(), &["out-decomposition".into()]));
            (out, s)
        }
        GadgetKind::Spherecover { g, input, out } => {
            m.param("kind", "spherecover");
            m.param("g", g);
            let z = read_sts(&read_file(input, &mut m)?)?;
            let sc = sphere_cover_decompose(&z, *g)?;
            let mut s = gadget_header(
                "spherecover",
                &[("g", g.to_string()), ("z", z.n().to_string()), ("spheres", sc.spheres.len().to_string()), ("in", sc.in_count.to_string())],
            );
            s.push_str(&write_sts(&sc.system));
            (out, s)
        }
        GadgetKind::Cycledecomp { input, out } => {
            m.param("kind", "cycledecomp");
            let l = read_graph(&read_file(input, &mut m)?)?;
            let base: Vec<u32> = (0..l.n()).collect();
            let mut alloc = VertexAllocator::new(l.n());
            let pc = build_path_cover(&base, &mut alloc)?;
            let d = decompose_short_cycles(&l.edges(), &pc)?;
            let mut all = l.edges();
            all.extend(pc.edges());
            let mut s = gadget_header(
                "cycledecomp",
                &[
                    ("x", l.n().to_string()),
                    ("cycles", d.cycles.len().to_string()),
                    ("c3", d.count_len(3).to_string()),
                    ("c4", d.count_len(4).to_string()),
                    ("c5", d.count_len(5).to_string()),
                ],
            );
            s.push_str(&write_graph(&hgsts::Graph::from_edges(alloc.peek(), all)));
            let _ = writeln!(s, "cycles {}", d.cycles.len());
            for c in &d.cycles {
                let vs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{}", vs.join(" "));
            }
            (out, s)
        }
    };
    write_file(out, &text, &mut m)?;
    finish(cli, &m, Some(sibling(out, "manifest")))?;
    Ok(EXIT_OK)
}

fn cmd_count_erdos(cli: &Cli, j: u32) -> CmdResult {
    let mut m = Manifest::new("count-erdos");
    m.param("j", j);
    let v = count_erd_j(j)?;
    println!("{v}");
    m.param("value", v);
    finish(cli, &m, None)?;
    Ok(EXIT_OK)
}

fn read_erd_file(text: &str) -> Result<BTreeMap<u32, u64>, Fail> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let w: Vec<&str> = line.split_whitespace().collect();
        let parsed = match w.as_slice() {
            [j, v] => j.parse::<u32>().ok().zip(v.parse::<u64>().ok()),
            _ => None,
        };
        let Some((j, v)) = parsed else {
            return Err(Error::Parse { line: i + 1, msg: format!("expected `j value`, got `{line}`") }.into());
        };
        if out.insert(j, v).is_some() {
            return Err(Error::Parse { line: i + 1, msg: format!("erd_{j} given twice") }.into());
        }
    }
    Ok(out)
}

fn cmd_bound(cli: &Cli, n: u64, g: u32, c: f64, erd_file: Option<&Path>) -> CmdResult {
    let mut m = Manifest::new("bound");
    m.param("n", n);
    m.param("g", g);
    m.param("c", fmt_real(c));
    if g < 5 {
        return Err(fail(EXIT_PARAM, format!("g = {g} must be at least 5")));
    }
    let erd = match erd_file {
        Some(p) => read_erd_file(&read_file(p, &mut m)?)?,
        None if g >= 6 => return Err(fail(EXIT_PARAM, format!("g = {g} needs --erd-file with erd_6..erd_{g}"))),
        None => BTreeMap::new(),
    };
    let v = counting_lower_bound_log(n, g, &erd, c)?;
    println!("log_lower_bound = {}", fmt_real(v));
    m.param("log_lower_bound", fmt_real(v));
    finish(cli, &m, None)?;
    Ok(EXIT_OK)
}

fn generate_config(a: &GenerateArgs, m: &mut Manifest) -> Result<PipelineConfig, Fail> {
    let mut c = PipelineConfig { seed: default_seed()?, ..Default::default() };
    if let Some(p) = &a.config {
        let text = read_file(p, m)?;
        let mut parsed = PipelineConfig::parse(&text)?;
        if !text.lines().any(|l| l.split('#').next().unwrap().trim_start().starts_with("seed")) {
            parsed.seed = c.seed;
        }
        c = parsed;
    }
    if let Some(v) = a.n {
        c.n = v;
    }
    if let Some(v) = a.g {
        c.g = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.p_target {
        c.p_target = v;
    }
    if let Some(v) = a.theta {
        c.theta = v;
    }
    if let Some(v) = a.gamma {
        c.gamma = v;
    }
    if let Some(v) = a.rho {
        c.rho = v;
    }
    if let Some(v) = a.nu {
        c.nu = v;
    }
    if let Some(v) = a.beta {
        c.beta = v;
    }
    if let Some(v) = a.retries {
        c.retries = v;
    }
    c.validate()?;
    Ok(c)
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> CmdResult {
    let mut m = Manifest::new("generate");
    let cfg = generate_config(a, &mut m)?;
    m.param("n", cfg.n);
    m.param("g", cfg.g);
    m.param("p_target", fmt_real(cfg.p_target));
    m.param("theta", fmt_real(cfg.theta));
    m.param("gamma", fmt_real(cfg.gamma));
    m.param("rho", fmt_real(cfg.rho));
    m.param("nu", fmt_real(cfg.nu));
    m.param("beta", fmt_real(cfg.beta));
    m.param("retries", cfg.retries);
    m.param("trials", a.trials.trials);
    m.seed(cfg.seed);
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let trials = a.trials.trials.max(1);
    let cfgs: Vec<PipelineConfig> = (0..trials)
        .map(|i| PipelineConfig { seed: if trials == 1 { cfg.seed } else { child_seed(cfg.seed, "trial", i as u64) }, ..cfg.clone() })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.trials.jobs.max(1)).build().map_err(|e| fail(EXIT_PARAM, e.to_string()))?;
    let reports: Vec<_> = pool.install(|| cfgs.par_iter().map(generate).collect());
    let mut code = EXIT_OK;
    let mut failures = Vec::new();
    for (i, rep) in reports.into_iter().enumerate() {
        let rep = rep?;
        let out = trial_path(&a.out, i, trials);
        write_file(&sibling(&out, "report"), &rep.to_text(), &mut m)?;
        match &rep.system {
            Some(sys) => {
                // write-after-verify: the file must pass its own verifier
                let text = write_sts(sys);
                let back = read_sts(&text)?;
                if !verify_steiner(&back).is_steiner || !girth(&back, cfg.g)?.girth.exceeds(cfg.g) {
                    return Err(fail(EXIT_CRASH, "generated system failed verification; nothing written"));
                }
                write_file(&out, &text, &mut m)?;
                println!("trial {i}: seed {} wrote {} ({} triples, girth > {})", cfgs[i].seed, out.display(), sys.len(), cfg.g);
            }
            None => {
                let (stage, attempts) = rep.failure.clone().unwrap_or(("unknown".into(), 0));
                failures.push(format!("trial {i}: stage {stage} failed after {attempts} attempts"));
                code = EXIT_STAGE;
            }
        }
    }
    for f in &failures {
        eprintln!("{f}");
    }
    finish(cli, &m, Some(sibling(&a.out, "manifest")))?;
    Ok(code)
}
