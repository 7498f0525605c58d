//! Run manifests: line-oriented `key = value` records of a command's
//! parameters, seed, file digests, version and wall clock.

use sha2::{Digest, Sha256};
use std::fmt::Display;
use std::path::Path;
use std::time::Instant;

pub struct Manifest {
    command: String,
    seed: Option<u64>,
    params: Vec<(String, String)>,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
    start: Instant,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            seed: None,
            params: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.params.push((key.into(), value.to_string()));
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push((path.display().to_string(), sha256_hex(bytes)));
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) {
        self.outputs.push((path.display().to_string(), sha256_hex(bytes)));
    }

    pub fn render(&self) -> String {
        let mut s = format!("command = {}\nversion = {}\n", self.command, env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.seed {
            s.push_str(&format!("seed = {seed}\n"));
        }
        for (k, v) in &self.params {
            s.push_str(&format!("param.{k} = {v}\n"));
        }
        for (p, d) in &self.inputs {
            s.push_str(&format!("input.{p} = sha256:{d}\n"));
        }
        for (p, d) in &self.outputs {
            s.push_str(&format!("output.{p} = sha256:{d}\n"));
        }
        s.push_str(&format!("wall_clock_s = {:.3}\n", self.start.elapsed().as_secs_f64()));
        s
    }
}
