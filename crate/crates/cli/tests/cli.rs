use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/ieee33.toml")
}

fn evcd(args: &[&str], out: &Path, cfg: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evcd"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn subcommands_compose_to_pipeline() {
    let (whole, staged) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = evcd(&["pipeline"], whole.path(), &config());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("DRCC+PM"), "{text}");
    for stage in ["simulate", "moments", "solve", "evaluate"] {
        assert!(
            evcd(&[stage], staged.path(), &config()).status.success(),
            "{stage}"
        );
    }
    let files = listing(whole.path());
    assert_eq!(files.len(), 9);
    assert!(files == listing(staged.path()));
}

#[test]
fn thread_cap_does_not_change_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(evcd(&["pipeline"], a.path(), &config()).status.success());
    assert!(evcd(&["pipeline", "--threads", "1"], b.path(), &config())
        .status
        .success());
    assert!(listing(a.path()) == listing(b.path()));
}

#[test]
fn mode_and_seed_overrides() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(evcd(
        &["pipeline", "--mode", "deterministic,drcc"],
        a.path(),
        &config()
    )
    .status
    .success());
    assert!(a.path().join("dispatch_drcc.csv").exists());
    assert!(!a.path().join("dispatch_drcc_pm.csv").exists());
    assert!(evcd(&["simulate", "--seed", "7"], b.path(), &config())
        .status
        .success());
    assert_ne!(
        fs::read(a.path().join("scenarios.csv")).unwrap(),
        fs::read(b.path().join("scenarios.csv")).unwrap()
    );
}

#[test]
fn missing_upstream_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = evcd(&["solve"], dir.path(), &config());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("missing scenarios.csv"), "{err}");
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = evcd(&["pipeline", "--mode", "stochastic"], dir.path(), &config());
    assert_eq!(o.status.code(), Some(2));
    let o = evcd(&["pipeline", "--threads", "0"], dir.path(), &config());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = fs::read_to_string(config())
        .unwrap()
        .replacen("seed = 1", "seed = \"one\"", 1);
    assert!(text.contains("seed = \"one\""));
    fs::write(&cfg, text).unwrap();
    let o = evcd(&["simulate"], &dir.path().join("out"), &cfg);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line"), "{err}");
}
