use std::path::Path;
use std::process::{Command, Output};

use shrinker_core::io::read_obj;
use shrinker_core::solver::topology;

fn shrinker(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinker")).args(args).output().expect("spawn shrinker")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_handle_count_is_a_usage_error() {
    let o = shrinker(&["build-core"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--n"));
}

#[test]
fn unknown_class_lists_the_valid_ones() {
    let o = shrinker(&["spectrum", "--class", "diagonal"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for name in ["xz-inv-yz-anti", "xz-anti-yz-inv", "all"] {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn verify_passes_and_breaking_a_check_fails_it() {
    let ok = shrinker(&["verify"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    for name in ["minimality", "scaling", "supersolution"] {
        let o = shrinker(&["verify", "--break", name]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains(&format!("failed invariant: {name}")), "{}", stderr(&o));
    }
}

#[test]
fn verify_writes_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("verify.json");
    let o = shrinker(&["verify", "--break", "conformality", "--json", path(&file)]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(v["pass"], false);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    for c in checks {
        assert_eq!(c["pass"], c["name"] != "conformality");
    }
}

#[test]
fn core_obj_has_the_expected_topology() {
    let dir = tempfile::tempdir().unwrap();
    let o = shrinker(&["build-core", "--n", "8", "--refinement", "3", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (v, t) = read_obj(dir.path().join("core.obj")).unwrap();
    let (chi, loops) = topology(v.len(), &t);
    assert_eq!(chi, -16);
    assert_eq!(loops, 4);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("core.json")).unwrap()).unwrap();
    assert_eq!(report["genus"], 7);
    assert_eq!(report["solved"], false);
}

#[test]
fn same_seed_gives_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = shrinker(&["solve", "--f", "random", "--seed", "11", "--refinement", "3", "--out", path(d.path())]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ra = std::fs::read(a.path().join("solve.json")).unwrap();
    let rb = std::fs::read(b.path().join("solve.json")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(std::fs::read(a.path().join("graph.ply")).unwrap(), std::fs::read(b.path().join("graph.ply")).unwrap());
}

#[test]
fn config_file_fills_in_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "refinement = 3\nk = 2\nphi0 = [0.3]\nclass = \"xz-inv-yz-inv\"\n").unwrap();
    let out = dir.path().join("sp");
    let o = shrinker(&["--config", path(&cfg), "spectrum", "--k", "3", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "phi0,class,refinement,lambda_1,lambda_2,lambda_3,kernel_gap");
    assert!(lines.next().unwrap().starts_with("0.3,xz-inv-yz-inv,3,"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "taw = 0.1\n").unwrap();
    let o = shrinker(&["--config", path(&cfg), "verify"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("taw"), "{}", stderr(&o));
}

#[test]
fn sphere_export_round_trips_through_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("sphere");
    let o = shrinker(&["export", "--refinement", "3", "--out", path(&stem)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mesh = shrinker_core::io::load_mesh(dir.path().join("sphere.obj")).unwrap();
    assert_eq!(mesh.refinement, 3);
    assert_eq!(mesh.euler_characteristic(), -2);
}
