use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn regdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regdist"))
        .args(args)
        .output()
        .expect("spawn regdist")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.cfg"))
        .to_string_lossy()
        .into_owned()
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("regdist-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in manifest"))
        .to_string()
}

#[test]
fn flat_constant_scenario_vanishes() {
    let out = scratch("flat");
    let o = regdist(&["run", &scenario("flat_constant"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sup: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("carleson sup = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(sup <= 1e-8, "sup {sup}");
    for f in ["field.csv", "carleson.csv", "cones.csv", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(manifest_value(&out, "name"), "flat_constant");
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn missing_table_is_a_config_error() {
    let o = regdist(&["field", "--kernel", "table:nope/k.table", "--set", "measure.type=circle"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope/k.table"), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(regdist(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(regdist(&["field", "--set", "novalue"]).status.code(), Some(2));
    assert_eq!(regdist(&["orth", "--alpha", "-1"]).status.code(), Some(2));
}

#[test]
fn point_on_support_is_a_numerical_failure() {
    let o = regdist(&["field", "--config", &scenario("flat_constant"), "--set", "field.points=0,0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("numerical failure in field"), "{}", stderr(&o));
}

#[test]
fn orth_of_constant_is_one() {
    let o = regdist(&["orth", "--kernel", "const:1", "--d", "2", "--r", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1.0");
}

#[test]
fn dini_reports_convergence() {
    let o = regdist(&["dini", "--kernel", "radial:1 + exp(-log(t)^2)"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("m = 0: 1.25331413732 (convergent)"), "{s}");
    let o = regdist(&["dini", "--kernel", "radial:1 + 0.5*sin(log(t))"]);
    assert!(stdout(&o).contains("divergent"), "{}", stdout(&o));
}

#[test]
fn small_bench_writes_csv() {
    let out = scratch("bench");
    let o = regdist(&["bench", "--atoms", "1024", "--queries", "20", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,atoms,queries,seconds,max_rel_err_r,max_rel_err_grad"));
    let tree = lines.find(|l| l.starts_with("tree,")).unwrap();
    let err: f64 = tree.split(',').nth(4).unwrap().parse().unwrap();
    assert!(err <= 1e-6);
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn manifest_hash_tracks_config() {
    let a = scratch("hash-a");
    let b = scratch("hash-b");
    let c = scratch("hash-c");
    let sc = scenario("log_gaussian");
    regdist(&["run", &sc, "--out", a.to_str().unwrap()]);
    regdist(&["run", &sc, "--out", b.to_str().unwrap()]);
    regdist(&["run", &sc, "--out", c.to_str().unwrap(), "--set", "gamma.j_hi=5"]);
    let (ha, hb, hc) = (
        manifest_value(&a, "config_hash"),
        manifest_value(&b, "config_hash"),
        manifest_value(&c, "config_hash"),
    );
    assert_eq!(ha, hb);
    assert_ne!(ha, hc);
    for d in [a, b, c] {
        let _ = std::fs::remove_dir_all(d);
    }
}
