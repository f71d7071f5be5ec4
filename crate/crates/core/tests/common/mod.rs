#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn vadtl(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vadtl"))
        .current_dir(root)
        .env("VADTL_OUTPUT_ROOT", root)
        .env_remove("RUST_LOG")
        .args(args)
        .output()
        .expect("spawn vadtl")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Noise file plus an extracted corpus built from it.
pub fn make_corpus(root: &Path, name: &str, kind: &str, noise_seed: u64, counts: &str, seed: u64) -> PathBuf {
    let wav = format!("{name}.wav");
    let o = vadtl(root, &["gen-noise", "--kind", kind, "--duration", "30", "--seed", &noise_seed.to_string(), "--out", &wav]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = vadtl(
        root,
        &["gen-corpus", "--noise", &wav, "--name", name, "--counts", counts, "--seed", &seed.to_string(), "--out", name],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = vadtl(root, &["extract", "--corpus", name]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    root.join(name)
}

pub fn write_config(root: &Path, file: &str, json: &str) -> PathBuf {
    let p = root.join(file);
    std::fs::write(&p, json).unwrap();
    p
}

/// Results CSV with the timing columns removed.
pub fn without_timings(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let keep: Vec<usize> = header.iter().enumerate().filter(|(_, h)| !h.ends_with("_s")).map(|(i, _)| i).collect();
    let mut out = String::new();
    for line in std::iter::once(header.join(",").as_str()).chain(lines).collect::<Vec<_>>() {
        let cells: Vec<&str> = line.split(',').collect();
        out.push_str(&keep.iter().map(|&i| cells[i]).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}
