use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use induction_lab::pipeline::verify_artifacts;

const BIN: &str = env!("CARGO_BIN_EXE_induction-lab");

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str], out: &Path) {
    let o = lab(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
}

#[test]
fn induce_before_pretrain_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate"], dir.path());
    let o = lab(&["induce"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("checkpoint.bin") && err.contains("pretrain"), "{err}");
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "seed = 1\ntau = 0.4\n").unwrap();
    let o = lab(&["generate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tau"), "{}", stderr(&o));

    fs::write(&cfg, "seed = 1\nwidth = 3\n").unwrap();
    let o = lab(&["generate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("huge.conf");
    fs::write(&cfg, "init_scale = 1e150\n").unwrap();
    let path = cfg.to_str().unwrap();
    ok(&["generate", "--config", path], dir.path());
    let o = lab(&["pretrain", "--config", path], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("checkpoint.bin").exists());
}

#[test]
fn changed_config_is_refused_downstream() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--seed", "3"], dir.path());
    let o = lab(&["pretrain", "--seed", "4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("re-run `generate`"), "{}", stderr(&o));
}

#[test]
fn tampered_artifact_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate"], dir.path());
    let bank = dir.path().join("bank.txt");
    let mut text = fs::read_to_string(&bank).unwrap();
    text.push_str("# edited\n");
    fs::write(&bank, text).unwrap();
    let o = lab(&["pretrain"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("digest mismatch"), "{}", stderr(&o));
}

#[test]
fn full_chain_then_battery_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["generate", "pretrain", "induce", "battery"] {
        ok(&[stage, "--seed", "2", "--jobs", "2"], dir.path());
    }
    let first = fs::read(dir.path().join("phenomena.json")).unwrap();
    let manifest = fs::read(dir.path().join("manifest.json")).unwrap();
    ok(&["battery", "--seed", "2", "--jobs", "1"], dir.path());
    assert_eq!(first, fs::read(dir.path().join("phenomena.json")).unwrap());
    assert_eq!(manifest, fs::read(dir.path().join("manifest.json")).unwrap());
    assert!(verify_artifacts(dir.path()).unwrap().values().all(|ok| *ok));

    let o = lab(&["report", "--seed", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    for needle in [
        "similarity",
        "typicality",
        "diversity",
        "monotonicity",
        "control",
        "rsa",
    ] {
        assert!(report.contains(needle), "report lacks {needle}:\n{report}");
    }
    assert_eq!(report, fs::read_to_string(dir.path().join("report.txt")).unwrap());
}

#[test]
fn rerunning_an_early_stage_drops_later_ones() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate"], dir.path());
    ok(&["pretrain"], dir.path());
    ok(&["generate"], dir.path());
    assert!(!dir.path().join("checkpoint.bin").exists());
    let o = lab(&["induce"], dir.path());
    assert!(stderr(&o).contains("run `pretrain` first"), "{}", stderr(&o));
}

#[test]
fn explicit_premise_sets() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate"], dir.path());
    ok(&["pretrain"], dir.path());
    let bank = fs::read_to_string(dir.path().join("bank.txt")).unwrap();
    let concepts: Vec<String> = bank
        .lines()
        .filter_map(|l| l.strip_prefix("C\t"))
        .map(|l| l.split('\t').next_back().unwrap().to_string())
        .collect();
    assert!(concepts.len() >= 2, "{bank}");
    let spec = format!("{}+{};{}", concepts[0], concepts[1], concepts[1]);
    ok(&["induce", "--premises", &spec], dir.path());
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3, "{runs}");

    let o = lab(&["induce", "--premises", "nobody"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nobody"));
    ok(&["induce", "--premises", &spec], dir.path());
    let o = lab(&["battery"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("re-run `induce`"), "{}", stderr(&o));
}
