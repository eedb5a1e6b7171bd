//! End-to-end runs of the `cavishift` binary on the example configurations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavishift"))
        .args(args)
        .env_remove("CAVISHIFT_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn phase(dir: &Path, file: &str, name: &str) -> f64 {
    json(&dir.join(file))["phases"][name].as_f64().unwrap()
}

#[test]
fn resonances_warm_cache_is_identical_and_faster() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, cache) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("cache"));
    let cfg = example("disk_dipole.toml");
    for out in [&a, &b] {
        let o = run(&["resonances", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--cache", cache.to_str().unwrap()]);
        assert!(o.status.success(), "{}", text(&o));
    }
    let ja = std::fs::read(a.join("resonances.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("resonances.json")).unwrap());
    assert_eq!(std::fs::read(a.join("resonances.csv")).unwrap(), std::fs::read(b.join("resonances.csv")).unwrap());

    let cold = phase(&a, "resonances.timing.json", "assembly");
    let warm = phase(&b, "resonances.timing.json", "assembly");
    assert_eq!(phase(&b, "resonances.timing.json", "cache_misses"), 0.0);
    assert!(cold >= 5.0 * warm, "cold {cold} s, warm {warm} s");

    let v = json(&a.join("resonances.json"));
    assert_eq!(v["schema"], "cavishift.result/1");
    let res = v["payload"]["resonances"].as_array().unwrap();
    assert_eq!(res.len(), 1);
    let w = &res[0]["omega0"];
    assert!(w[1].as_f64().unwrap() < 0.0);
    let m = &res[0]["multilayer"];
    assert_eq!(m["order"], 1);
    assert!(m["relative_difference"].as_f64().unwrap() < 1e-3);
    let scatter = std::fs::read_to_string(a.join("resonances_scatter.csv")).unwrap();
    assert!(scatter.contains(",multilayer"));
}

#[test]
fn corrupted_cache_gives_the_same_answer() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let cfg = example("disk_dipole.toml");
    let go = |out: &str| {
        let o = run(&["resonances", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join(out).to_str().unwrap(), "--cache", cache.to_str().unwrap()]);
        assert!(o.status.success(), "{}", text(&o));
        std::fs::read(tmp.path().join(out).join("resonances.json")).unwrap()
    };
    let first = go("a");
    for entry in std::fs::read_dir(&cache).unwrap() {
        let p = entry.unwrap().path();
        let mut bytes = std::fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 100] ^= 1;
        std::fs::write(&p, bytes).unwrap();
    }
    assert_eq!(go("b"), first);
    assert!(phase(&tmp.path().join("b"), "resonances.timing.json", "cache_misses") > 0.0);
}

#[test]
fn negative_tau_is_rejected_with_field_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = std::fs::read_to_string(example("disk_dipole.toml")).unwrap().replace("tau = 10.0", "tau = -1.0");
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let o = run(&["resonances", "--config", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = text(&o);
    assert!(msg.contains("line 7:") && msg.contains("cavity.tau"), "{msg}");
}

#[test]
fn internal_particle_gives_one_prediction() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(example("internal_convergence.toml"))
        .unwrap()
        .replace("deltas = [0.05, 0.035, 0.02, 0.014, 0.01]", "delta = 0.02")
        .replace("oracle = \"concentric\"\n", "")
        .replace("resolution = 32", "resolution = 16");
    let path = tmp.path().join("one.toml");
    std::fs::write(&path, cfg).unwrap();
    let o = run(&["shift", "--config", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let v = json(&tmp.path().join("shift.json"));
    let preds = v["payload"]["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 1);
    assert_eq!(preds[0]["prediction"]["case"], "internal");
    assert_eq!(preds[0]["prediction"]["roots"].as_array().unwrap().len(), 1);
    assert!(v["payload"].get("convergence").is_none());
}

#[test]
fn delta_list_writes_convergence_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = example("internal_convergence.toml");
    let o = run(&["shift", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let csv = std::fs::read_to_string(tmp.path().join("shift_convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let v = json(&tmp.path().join("shift.json"));
    let slope = v["payload"]["convergence"]["fit"]["slope"].as_f64().unwrap();
    assert!(slope >= 2.5, "slope {slope}");
    assert!(text(&o).contains("slope"));
}

#[test]
fn matched_drude_particle_is_degenerate_enhanced() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = example("plasmonic_wgm.toml");
    let o = run(&["shift", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let v = json(&tmp.path().join("shift.json"));
    let pr = &v["payload"]["predictions"][0]["prediction"];
    assert_eq!(pr["case"], "plasmonic");
    assert_eq!(pr["flags"][0], "degenerate-enhanced");
    let roots = pr["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 2);
    for k in 0..2 {
        let s = roots[0][k].as_f64().unwrap() + roots[1][k].as_f64().unwrap();
        assert!(s.abs() < 1e-15, "roots are not a symmetric pair");
    }
}

#[test]
fn polarization_of_rotated_ellipse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = example("ellipse_polarization.toml");
    let o = run(&["polarization", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let v = json(&tmp.path().join("polarization.json"));
    let pv = &v["payload"]["principal_values"];
    // k = 4, semi-axes 1 and 1/2: pi a b (k - 1)(a + b) / (a + k b) and the swap
    let (a, b, k) = (1.0f64, 0.5f64, 4.0f64);
    let area = std::f64::consts::PI * a * b;
    let m1 = area * (k - 1.0) * (a + b) / (b + k * a);
    let m2 = area * (k - 1.0) * (a + b) / (a + k * b);
    let got = [pv[0].as_f64().unwrap(), pv[1].as_f64().unwrap()];
    let mut want = [m1, m2];
    want.sort_by(|x, y| y.total_cmp(x));
    let mut got_sorted = got;
    got_sorted.sort_by(|x, y| y.total_cmp(x));
    for i in 0..2 {
        assert!((got_sorted[i] - want[i]).abs() < 1e-8, "{got:?} vs {want:?}");
    }
}

#[test]
fn tightened_tolerances_fail_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["validate", "--quick", "--tolerance-scale", "0.01", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let msg = text(&o);
    assert!(msg.contains("FAIL  2") && msg.contains("FAIL  5"), "{msg}");
    let v = json(&tmp.path().join("validation.json"));
    assert_eq!(v["payload"]["passed"], false);
    let csv = std::fs::read_to_string(tmp.path().join("validation.csv")).unwrap();
    assert!(csv.contains(",FAIL,"));
}
