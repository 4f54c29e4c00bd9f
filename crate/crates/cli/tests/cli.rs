use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wasserflow"));
    c.args(["--threads", "1"]);
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wasserflow-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = scratch("simulate");
    let cfg = scenario("translation.cfg");
    for run in ["a", "b"] {
        ok(bin().arg("--config").arg(&cfg).arg("--out").arg(dir.join(run)).arg("simulate").output().unwrap());
    }
    let a = std::fs::read(dir.join("a/trajectory.csv")).unwrap();
    let b = std::fs::read(dir.join("b/trajectory.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let manifest = std::fs::read_to_string(dir.join("a/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 1"), "{manifest}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn ot_between_two_files() {
    let dir = scratch("ot");
    std::fs::write(dir.join("a.txt"), "measure atoms dim=2\natom 0 0 0.5\natom 1 0 0.5\n").unwrap();
    std::fs::write(dir.join("b.txt"), "measure atoms dim=2\natom 0 3 0.5\natom 1 3 0.5\n").unwrap();
    let plan = dir.join("plan.csv");
    let out = ok(bin().arg("ot").arg(dir.join("a.txt")).arg(dir.join("b.txt")).arg("--plan").arg(&plan).output().unwrap());
    assert!(out.contains("value 3.0"), "{out}");
    let rows = std::fs::read_to_string(&plan).unwrap();
    assert!(rows.starts_with("i,j,mass"), "{rows}");
    assert_eq!(rows.lines().count(), 3);

    let bad = bin().arg("ot").arg(dir.join("a.txt")).arg(dir.join("missing.txt")).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn counterexample_and_demo() {
    let dir = scratch("examples");
    let out = ok(bin()
        .arg("--out")
        .arg(dir.join("ce"))
        .args(["counterexample", "--truncation", "8", "--pairs", "20", "--dt", "0.05"])
        .output()
        .unwrap());
    assert!(!out.contains("fail"), "{out}");
    assert!(dir.join("ce/l1_lipschitz.csv").exists() && dir.join("ce/wp_ratio.csv").exists());

    let out = ok(bin().arg("--out").arg(dir.join("f1")).args(["demo", "f1-discontinuity", "--resolution", "10"]).output().unwrap());
    assert!(out.trim_end().ends_with("pass"), "{out}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn configuration_errors_are_reported() {
    let dir = scratch("errors");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "scheme { kind = lagrangian, T = 1, dt = 0.3, dx = 0.1 }\ninitial { density = \"1\", bbox = [0, 1] }\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("--out").arg(dir.join("o")).arg("simulate").output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("0.3"), "{err}");

    let none = bin().arg("simulate").output().unwrap();
    assert!(String::from_utf8_lossy(&none.stderr).contains("--config"));
    std::fs::remove_dir_all(&dir).unwrap();
}
