use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_replay-lab"));
    c.env("RUST_LOG", "warn");
    c
}

const CONFIG: &str = r#"
[experiment]
id = "cli"
seeds = [0, 1]
frameworks = ["per", "dalap"]
episodes = 6
budget = 2000

[agent]
batch_size = 8
capacity = 500
hidden = [8]
"#;

#[test]
fn run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");

    let run = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seeds", "0,1,2", "--frameworks", "dalap,per,pser", "--jobs", "2"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["runs.csv", "diag.csv", "summary.csv", "paired.csv", "curves.csv", "curves.spec.txt", "metadata.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 3 * 6);

    let compare = bin().args(["compare", "--in"]).arg(&out).output().unwrap();
    assert!(compare.status.success());
    let text = String::from_utf8(compare.stdout).unwrap();
    assert!(text.contains("dalap") && text.contains("pser") && text.contains("paired seeds"), "{text}");
}

#[test]
fn unknown_framework_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let run = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--frameworks", "dqn"])
        .output()
        .unwrap();
    assert!(!run.status.success());
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("dqn") && err.contains("uniform, per, lap, pser, alap, dalap"), "{err}");
}

#[test]
fn bad_config_key_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.toml");
    std::fs::write(&config, "[agent]\nbatch = 3\n").unwrap();
    let run = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!run.status.success());
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("batch") && err.contains("line 2"), "{err}");
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| !l.starts_with("FAIL")));
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 8);
}
