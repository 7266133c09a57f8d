use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wzsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wzsim"))
        .args(args)
        .env("WZ_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn box_run_is_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "box.json",
        r#"{"experiment": "box-evolve", "qubits_per_axis": 6, "snapshot_times": [0.002]}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = wzsim(&["box-evolve", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in [
        "box_snapshot_000.csv",
        "box_snapshot_001.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(a.join("box_snapshot_000.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    assert!(first.split(',').skip(1).all(|v| v.contains('e')), "{first}");

    let replay = tmp.path().join("replay");
    let o = wzsim(&[
        "replay",
        "--manifest",
        s(&a.join("manifest.json")),
        "--out",
        s(&replay),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // a tampered output hash is reported
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    let tampered = config(
        tmp.path(),
        "bad_manifest.json",
        &manifest.replacen("\"sha256\": \"", "\"sha256\": \"0", 1),
    );
    let o = wzsim(&["replay", "--manifest", s(&tampered), "--out", s(&replay)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn zero_time_box_is_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "box.json",
        r#"{"qubits_per_axis": 4, "total_time": 0.0}"#,
    );
    let out = tmp.path().join("o");
    let o = wzsim(&["box-evolve", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("box_snapshot_000.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let p: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((p - 1.0 / 16.0).abs() < 1e-15);
    }
}

#[test]
fn overrides_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "sample.json",
        r#"{"qubits_per_axis": 3, "total_time": 0.0}"#,
    );
    let out = tmp.path().join("o");
    let o = wzsim(&[
        "sample",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--shots",
        "500",
        "--set",
        "seed=9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["shots"], 500);
    assert_eq!(summary["seed"], 9);

    // validation
    let o = wzsim(&[
        "sample",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--set",
        "nonsense=1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let bad = config(tmp.path(), "bad.json", r#"{"qubits_per_axis": 0}"#);
    let o = wzsim(&["box-evolve", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = wzsim(&[
        "box-evolve",
        "--config",
        s(&tmp.path().join("missing.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    // resource guard: two electrons on a 2D grid of 2^8 x 2^8 cells
    let big = config(
        tmp.path(),
        "big.json",
        r#"{"dims": 2, "qubits_per_axis": 8,
            "particles": [{"species": "electron"}, {"species": "electron"}],
            "electron_region": [[0, 3], [0, 3]]}"#,
    );
    let o = wzsim(&["molecule2d", "--config", s(&big), "--out", s(&out)]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    // numerical abort: a packet too narrow to be sampled on any cell center
    let narrow = config(
        tmp.path(),
        "narrow.json",
        r#"{"qubits_per_axis": 3, "total_time": 0.0,
            "initial_state": {"kind": "gaussian", "center": [0.5], "width": 1e-9}}"#,
    );
    let o = wzsim(&["sample", "--config", s(&narrow), "--out", s(&out)]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn synth_report_writes_circuit_text() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "synth.json", "{}");
    let out = tmp.path().join("o");
    let o = wzsim(&["synth-report", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("redundant_circuit.txt")).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("WIDTH 3\nCNOT 1 0\n"));
    let counts = fs::read_to_string(out.join("gate_counts.csv")).unwrap();
    assert!(counts.contains("\n2,3,48,"));
}

#[test]
fn molecule_zero_time_keeps_region() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "h.json",
        r#"{"dims": 2, "qubits_per_axis": 3, "box_length": 4.0, "total_time": 0.0, "steps": 10,
            "particles": [{"species": "electron"}, {"species": "nucleus", "cell": [4, 4]}],
            "electron_region": [[3, 5], [3, 5]]}"#,
    );
    let out = tmp.path().join("o");
    let o = wzsim(&["molecule2d", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("electron_0_density.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (ix, iy): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let p: f64 = f[4].parse().unwrap();
        let inside = (3..=5).contains(&ix) && (3..=5).contains(&iy);
        let expect = if inside { 1.0 / 9.0 } else { 0.0 };
        assert!((p - expect).abs() < 1e-15, "{ix},{iy}: {p}");
    }
}
