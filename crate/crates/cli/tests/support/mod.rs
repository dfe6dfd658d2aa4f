#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

pub const SPEC: &str = r#"{
  "variables": [
    { "name": "group", "role": "protected", "kind": "categorical", "levels": ["north", "south"] },
    { "name": "sex", "role": "adjust", "kind": "binary", "levels": ["F", "M"] },
    { "name": "age", "role": "adjust", "kind": "continuous", "pre_transform": "log" },
    { "name": "priors", "role": "adjust", "kind": "count", "model": "poisson" },
    { "name": "outcome", "role": "outcome", "kind": "binary" }
  ],
  "m": 3,
  "seed": 17
}"#;

/// A small CSV in which every feature depends on `group`.
pub fn biased_csv(n: usize, seed: u64) -> String {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.25).unwrap();
    let mut out = String::from("id,group,sex,age,priors,outcome\n");
    for i in 0..n {
        let south = r.random::<f64>() < 0.5;
        let g = south as u8 as f64;
        let sex = if r.random::<f64>() < 0.3 + 0.4 * g { "M" } else { "F" };
        let age = (3.3 + 0.3 * g + noise.sample(&mut r)).exp().round().max(18.0);
        let priors: f64 = Poisson::new((0.2 + 1.0 * g).exp()).unwrap().sample(&mut r);
        let eta = -1.0 + 0.4 * priors - 0.02 * (age - 30.0);
        let y = (r.random::<f64>() < 1.0 / (1.0 + (-eta).exp())) as u8;
        let group = if south { "south" } else { "north" };
        out.push_str(&format!("{i},{group},{sex},{age},{priors},{y}\n"));
    }
    out
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(csv: &str, spec: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data.csv"), csv).unwrap();
        std::fs::write(dir.path().join("spec.json"), spec).unwrap();
        Workspace { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn run(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairchain"));
        cmd.current_dir(self.dir.path()).args(args);
        cmd.env_remove("FAIRCHAIN_THREADS").env_remove("SOURCE_DATE_EPOCH");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    pub fn adjust(&self, out: &str, env: &[(&str, &str)]) -> Output {
        self.run(&["adjust", "--data", "data.csv", "--spec", "spec.json", "--out", out], env)
    }
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// File names and contents of a directory, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}
