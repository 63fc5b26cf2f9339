use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparse-circulant"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn lam_leung_example() {
    let o = run(&["lam-leung", "--n", "6", "--d", "5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0 ∈ 5·R_6: true");
    let o = run(&["lam-leung", "--n", "6", "--d", "1"]);
    assert!(stdout(&o).contains("false"));
}

#[test]
fn limit_law_prints_constant_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--out", dir.path().to_str().unwrap(), "limit-law", "--m", "3", "--d", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("c = 0.231049"));
    let atoms = fs::read_to_string(dir.path().join("atoms.csv")).unwrap();
    assert_eq!(atoms.lines().count(), 7);
    let c: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
    assert_eq!(c[0]["flag"], "finite");
}

#[test]
fn moments_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "moments",
        "--group",
        "3^4",
        "--d",
        "2",
        "--k",
        "2",
        "--z",
        "1/2,0",
        "--trials",
        "500",
        "--seed",
        "11",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("3467/432"), "{text}");
    assert!(text.contains("bruteforce: E[W] = 8.0254629630"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert!(dir.path().join("moments.json").exists());
}

#[test]
fn linsys_duality() {
    let o = run(&["linsys-check", "--matrix", "2,0;0,3", "--group", "6,6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("P(Ax = 0) = 1/36"));
    assert!(text.contains("duality holds: true"));
}

#[test]
fn invalid_input_exits_2() {
    for args in [
        &["lam-leung", "--n", "x", "--d", "1"][..],
        &["spectrum", "--group", "0", "--d", "2", "--seed", "1"],
        &["moments", "--group", "3", "--d", "0", "--k", "1", "--seed", "1"],
        &["linsys-check", "--matrix", "1,2;3", "--group", "5"],
        &["esd-experiment", "--family", "nope", "--d", "2", "--n-list", "3", "--trials", "1", "--seed", "1"],
        &["--zero-tol", "-1", "lam-leung", "--n", "6", "--d", "5"],
        &["--workers", "0", "lam-leung", "--n", "6", "--d", "5"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let cases: [&[&str]; 3] = [
        &["esd-experiment", "--family", "homocyclic:3", "--d", "3", "--n-list", "2,3", "--trials", "8", "--seed", "3"],
        &["det-experiment", "--family", "cyclic", "--d", "3", "--n-list", "50,200", "--trials", "8", "--seed", "3"],
        &["spectrum", "--group", "4^3", "--d", "3", "--seed", "9", "--sampler", "distinct"],
    ];
    for case in cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for (dir, workers) in [(&a, "1"), (&b, "4")] {
            let mut args = vec!["--out", dir.path().to_str().unwrap(), "--workers", workers];
            args.extend_from_slice(case);
            let o = run(&args);
            assert!(o.status.success(), "{case:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
        assert!(fa.len() >= 3);
        assert_eq!(fa, fb, "{case:?}");
        let manifest: serde_json::Value = serde_json::from_str(
            std::str::from_utf8(&fa.iter().find(|(n, _)| n == "manifest.json").unwrap().1).unwrap(),
        )
        .unwrap();
        assert!(manifest["seed"].is_u64());
    }
}

#[test]
fn env_supplies_defaults() {
    let o = Command::new(env!("CARGO_BIN_EXE_sparse-circulant"))
        .args(["lam-leung"])
        .env_clear()
        .env("SPARSE_CIRCULANT_N", "6")
        .env("SPARSE_CIRCULANT_D", "5")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("true"));
}
