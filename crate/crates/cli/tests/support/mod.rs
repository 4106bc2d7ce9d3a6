//! Helpers for driving the command line in-process and inspecting run
//! directories.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use ncdial_cli::error::CliError;
use ncdial_cli::{run, Cli};

/// Runs one command with `input` as standard input, returning what it
/// printed.
pub fn ncdial_with_input(args: &[&str], input: &str) -> Result<String, CliError> {
    let mut argv = vec!["ncdial"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = Vec::new();
    run(cli, input.as_bytes(), &mut out)?;
    Ok(String::from_utf8(out).expect("utf-8 output"))
}

pub fn ncdial(args: &[&str]) -> Result<String, CliError> {
    ncdial_with_input(args, "")
}

pub fn ok(args: &[&str]) -> String {
    ncdial(args).unwrap_or_else(|e| panic!("ncdial {}: {e}", args.join(" ")))
}

/// gen-data and train for a small run in `dir`.
pub fn prepare(dir: &Path, dialogues: usize) {
    let d = dir.to_str().unwrap();
    let n = dialogues.to_string();
    ok(&["--out", d, "gen-data", "--dialogues", &n, "--traps", "0.3"]);
    ok(&["--out", d, "train"]);
}

/// Every file below `dir` by relative path, except timing sidecars.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if !p.to_string_lossy().ends_with(".timing.json") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

/// Compares with a frozen file; `NCDIAL_BLESS` rewrites it instead.
pub fn check_golden(name: &str, actual: &str) {
    let path = fixture_path(name);
    if std::env::var_os("NCDIAL_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert_eq!(actual, expected, "golden file {} differs", path.display());
}
