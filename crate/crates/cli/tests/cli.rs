use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use fracvolt::selftest::{criterion, SelftestOptions};
use fracvolt::ExperimentConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fracvolt"))
        .args(args)
        .output()
        .unwrap();
    let text =
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

/// Writes `body` as a config into `dir` with `out_dir` pointing inside it.
fn config_in(dir: &Path, name: &str, body: &str) -> PathBuf {
    let out = dir.join("out");
    let text = body.replace(
        "out_dir = \"runs\"",
        &format!("out_dir = {:?}", out.to_str().unwrap()),
    );
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const CP: &str = r#"
experiment = "cp-check"
seed = 3
out_dir = "runs"
alpha = ALPHA
[grid]
t_end = 2.0
steps = 2000
"#;

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut n = 0;
    for e in fs::read_dir(configs()).unwrap() {
        let p = e.unwrap().path();
        let c = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
        n += 1;
    }
    assert_eq!(n, fracvolt::experiment_names().len());
}

#[test]
fn cp_check_verdicts_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for (alpha, verdict) in [
        ("0.5", "verdict: completely_positive_on_grid"),
        ("1.5", "verdict: violated"),
    ] {
        let p = config_in(dir.path(), "cp.toml", &CP.replace("ALPHA", alpha));
        let (code, text) = bin(&["run", p.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
        let summary = fs::read_to_string(dir.path().join("out/cp-check/summary.txt")).unwrap();
        assert!(summary.contains(verdict), "{summary}");
    }
}

#[test]
fn converge_with_zero_operator_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
experiment = "converge"
seed = 1
out_dir = "runs"
alpha = 0.7
n_list = [1.0, 4.0]
[grid]
t_end = 1.0
steps = 50
[operator]
kind = "spectral"
eigenvalues = [0.0, 0.0]
"#;
    let p = config_in(dir.path(), "c.toml", body);
    let (code, text) = bin(&["run", p.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let csv = fs::read_to_string(dir.path().join("out/converge/converge.csv")).unwrap();
    let mut rd = csv::Reader::from_reader(csv.as_bytes());
    let col = rd
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "err")
        .unwrap();
    let errs: Vec<f64> = rd
        .records()
        .map(|r| r.unwrap()[col].parse().unwrap())
        .collect();
    assert_eq!(errs, vec![0.0, 0.0]);
}

#[test]
fn invalid_config_exits_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bodies = [
        CP.replace("ALPHA", "-0.5"),
        CP.replace("alpha = ALPHA", ""),
        CP.replace("ALPHA", "0.5\nunknown_key = 1"),
        CP.replace("ALPHA", "0.5").replace("cp-check", "simulate"),
    ];
    for b in bodies {
        let p = config_in(dir.path(), "bad.toml", &b);
        let (code, text) = bin(&["run", p.to_str().unwrap()]);
        assert_eq!(code, 2, "{b}\n{text}");
    }
    let (code, _) = bin(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn failing_thread_override_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_fracvolt"))
        .args(["list"])
        .env(fracvolt::THREADS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn tree(root: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for e in fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(tree(&p));
        }
        v.push(p);
    }
    v.sort();
    v
}

#[test]
fn runs_write_only_inside_out_dir_and_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(configs().join("simulate.toml"))
        .unwrap()
        .replace("paths = 2000", "paths = 50");
    let p = config_in(dir.path(), "sim.toml", &body);
    let (code, first) = bin(&["run", p.to_str().unwrap()]);
    assert_eq!(code, 0, "{first}");
    let outside: Vec<_> = tree(dir.path())
        .into_iter()
        .filter(|q| !q.starts_with(dir.path().join("out")) && q != &p)
        .collect();
    assert!(outside.is_empty(), "{outside:?}");
    assert_eq!(
        tree(&dir.path().join("out"))
            .iter()
            .filter(|q| q.is_dir())
            .count(),
        1
    );
    let sums = fs::read_to_string(dir.path().join("out/simulate/SHA256SUMS")).unwrap();
    let (_, second) = bin(&["run", p.to_str().unwrap()]);
    assert_eq!(
        fs::read_to_string(dir.path().join("out/simulate/SHA256SUMS")).unwrap(),
        sums
    );
    let hash = |t: &str| {
        t.lines()
            .find(|l| l.starts_with("bundle"))
            .unwrap()
            .rsplit(' ')
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(hash(&first), hash(&second));

    let (_, other) = bin(&[
        "run",
        config_in(
            dir.path(),
            "sim.toml",
            &body.replace("seed = 7", "seed = 8"),
        )
        .to_str()
        .unwrap(),
    ]);
    assert_ne!(hash(&first), hash(&other));
}

#[test]
fn manifest_records_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = config_in(dir.path(), "cp.toml", &CP.replace("ALPHA", "0.5"));
    let (b, out) = fracvolt::run(&p).unwrap();
    let text = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(text.contains("experiment = \"cp-check\""), "{text}");
    assert_eq!(b.manifest.config, Some(ExperimentConfig::load(&p).unwrap()));
}

#[test]
fn criterion_outcomes_are_reproducible() {
    let opts = SelftestOptions { paths: 40, seed: 5 };
    assert_eq!(criterion(9, &opts).unwrap(), criterion(9, &opts).unwrap());
    assert!(criterion(11, &opts).is_err());
}
