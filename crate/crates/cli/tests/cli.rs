use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn conekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conekit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().find(|l| l.starts_with('{')).expect("json on stdout");
    serde_json::from_str(line).expect("valid json")
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn angles_of_coordinate_planes() {
    let dir = tempfile::tempdir().unwrap();
    let t = 0.3f64;
    let a = write(dir.path(), "a.json", &json!({"ambient": 3, "frame": [[1.0, 0.0, 0.0]]}));
    let b = write(dir.path(), "b.json", &json!({"ambient": 3, "frame": [[t.cos(), t.sin(), 0.0]]}));
    let v = stdout_json(&conekit(&["compute", "angles", &a, &b]));
    let angles = v["angles"].as_array().unwrap();
    assert_eq!(angles.len(), 1);
    assert!((angles[0].as_f64().unwrap() - t).abs() < 1e-12);
    assert!((v["hausdorff"].as_f64().unwrap() - t.sin()).abs() < 1e-12);
}

#[test]
fn generated_cone_feeds_sigma_mu() {
    let dir = tempfile::tempdir().unwrap();
    let cone = path(dir.path(), "cone.json");
    let v = stdout_json(&conekit(&[
        "gen", "--m", "3", "--n", "2", "--N", "2", "--angle", "0.4", "--seed", "5", "--out", &cone,
    ]));
    assert_eq!(v["N"], 2);
    let s = stdout_json(&conekit(&["compute", "sigma-mu", &cone]));
    let sigma = s["sigma"].as_f64().unwrap();
    let mu = s["mu"].as_f64().unwrap();
    let expected = (0.4f64).sin();
    assert!((sigma - expected).abs() < 1e-10, "{sigma}");
    assert!((mu - expected).abs() < 1e-10, "{mu}");
}

#[test]
fn prune_reports_one_based_indices() {
    let dir = tempfile::tempdir().unwrap();
    let gaps = write(
        dir.path(),
        "g.json",
        &json!([[0.0, 1.0, 1.0], [1.0, 0.0, 0.01], [1.0, 0.01, 0.0]]),
    );
    let v = stdout_json(&conekit(&["compute", "prune", "--gaps", &gaps, "--D", "0.001", "--delta", "0.5"]));
    assert_eq!(v["holds"], true);
    let mut all: Vec<u64> = v["I"]
        .as_array()
        .unwrap()
        .iter()
        .chain(v["removed"].as_array().unwrap())
        .map(|x| x.as_u64().unwrap())
        .collect();
    all.sort();
    assert_eq!(all, vec![1, 2, 3]);
}

#[test]
fn prune_above_scale_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let gaps = write(dir.path(), "g.json", &json!([[0.0, 1.0], [1.0, 0.0]]));
    let out = conekit(&["compute", "prune", "--gaps", &gaps, "--D", "10", "--delta", "0.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_json_is_a_parse_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = path(dir.path(), "bad.json");
    std::fs::write(&p, "{ not json").unwrap();
    let out = conekit(&["compute", "sigma-mu", &p]);
    assert_eq!(out.status.code(), Some(1));
    let missing = conekit(&["compute", "sigma-mu", &path(dir.path(), "absent.json")]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn invalid_subspace_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", &json!({"ambient": 2, "frame": [[1.0, 1.0]]}));
    let out = conekit(&["compute", "angles", &a, &a]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn current_roundtrips_through_both_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let cone = path(dir.path(), "cone.json");
    let mut results = Vec::new();
    for body in ["csv", "binary"] {
        let cur = path(dir.path(), &format!("t.{body}"));
        let gen = stdout_json(&conekit(&[
            "gen", "--m", "2", "--n", "2", "--N", "2", "--current", "--cone-out", &cone, "--h", "0.02", "--noise",
            "0.01", "--density", "200", "--seed", "9", "--body", body, "--out", &cur,
        ]));
        let e = stdout_json(&conekit(&["compute", "excess", "--current", &cur, "--cone", &cone]));
        results.push((gen["mass"].as_f64().unwrap(), e));
    }
    let (m0, e0) = &results[0];
    let (m1, e1) = &results[1];
    assert!((m0 - m1).abs() <= 1e-12 * m0.abs());
    for key in ["one_sided", "two_sided"] {
        let (a, b) = (e0[key].as_f64().unwrap(), e1[key].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12), "{key}: {a} vs {b}");
    }
}

#[test]
fn verify_lists_and_runs_campaigns() {
    let out = conekit(&["verify", "--list"]);
    assert!(out.status.success());
    let listing = String::from_utf8_lossy(&out.stdout);
    for name in ["angles", "prune", "layers", "whitney", "spine"] {
        assert!(listing.contains(name), "{name} missing from listing");
    }

    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "report.json");
    let out = conekit(&["verify", "prune", "--trials", "50", "--seed", "3", "--out", &report]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.lines().any(|l| l.starts_with("prune 50/50")), "{summary}");
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["passed"], 50);

    // same seed, same report apart from timing
    let again = path(dir.path(), "again.json");
    conekit(&["verify", "prune", "--trials", "50", "--seed", "3", "--out", &again]);
    let load = |p: &str| {
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("wall_clock_secs");
        v
    };
    assert_eq!(load(&report), load(&again));
}

#[test]
fn unknown_campaign_fails() {
    let out = conekit(&["verify", "no-such-campaign", "--trials", "1"]);
    assert!(!out.status.success());
}

#[test]
fn whitney_structure_counts() {
    let v = stdout_json(&conekit(&["compute", "whitney", "--m", "4", "--depth", "3"]));
    let gens = v["generations"].as_array().unwrap();
    let counts: Vec<u64> = gens.iter().map(|g| g["cubes"].as_u64().unwrap()).collect();
    assert_eq!(counts, vec![1, 4, 16, 64]);
    for g in gens {
        assert_eq!(g["measure"], v["root_measure"]);
    }
}
