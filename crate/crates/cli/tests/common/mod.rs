#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chartrefine::commands::{cmd_generate, GenerateArgs};
use chartrefine::manifest::RUN_MANIFEST;

pub fn generate_args(out: &Path, n: u64, seed: u64) -> GenerateArgs {
    GenerateArgs {
        config: None,
        count: n,
        seed: Some(seed),
        out: out.to_path_buf(),
        jobs: None,
        with_training_samples: false,
    }
}

pub fn generate(out: &Path, n: u64, seed: u64) {
    cmd_generate(&generate_args(out, n, seed)).unwrap();
}

/// Every file under `dir` except run manifests, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().unwrap() != RUN_MANIFEST {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Relative paths whose contents differ or exist on one side only.
pub fn snapshot_diff(a: &Path, b: &Path) -> Vec<PathBuf> {
    let (a, b) = (snapshot(a), snapshot(b));
    let mut diff: Vec<PathBuf> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    diff.extend(b.keys().filter(|k| !a.contains_key(*k)).cloned());
    diff
}

pub fn write(path: &Path, text: &str) -> PathBuf {
    fs::write(path, text).unwrap();
    path.to_path_buf()
}

pub const NOISELESS_SIMULATOR: &str = "[simulator]
fix_prob = 1.0
false_confirm_prob = 0.0
decode_noise = 0.0
initial = { omission_rate = 0.0, shift_sigma_px = 0.0, hallucination_rate = 0.0, duplicate_rate = 0.0 }
";
