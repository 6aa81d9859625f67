use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracluster"));
    c.env_remove("FRACLUSTER_CACHE_DIR");
    c
}

fn config(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn twophase_config_gives_flat_interface() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let st = bin().args(["minimize", "--grid", "16", "--config"]).arg(config("twophase.json")).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["junction"]["triple_points"].as_array().unwrap().len(), 0);

    // labels.pgm: 16 x 16, left half phase 0 (byte 1), right half phase 1 (byte 2)
    let pgm = std::fs::read(out.join("labels.pgm")).unwrap();
    let pixels = &pgm[pgm.len() - 256..];
    for (k, &b) in pixels.iter().enumerate() {
        assert_eq!(b, if k % 16 < 8 { 1 } else { 2 }, "pixel {k}");
    }
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("sweep,energy\n"));
}

#[test]
fn cone_angles_csv() {
    let out = bin().args(["cone-angles", "--s", "0.5,0.9", "--weights", "1,1,1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let alpha1 = rdr.headers().unwrap().iter().position(|h| h == "alpha1").unwrap();
    for r in rows {
        let a: f64 = r[alpha1].parse().unwrap();
        assert!((a - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-8);
    }
}

#[test]
fn bad_inputs_fail_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"s\": 0.5,\n  \"bogus\": 1\n}").unwrap();
    let out = bin().args(["minimize", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let out = bin().args(["classical-angles", "--weights", "1,-1,1"]).output().unwrap();
    assert!(!out.status.success());
}
