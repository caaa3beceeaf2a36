use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reachkit::export::parse_csv_slice;
use reachkit::{RunConfig, ValueField};

fn reachkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachkit"))
        .args(args)
        .current_dir(dir)
        .env_remove("REACHKIT_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field_line(o: &Output, key: &str) -> String {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}` line in {}", stdout(o)))
}

const SINGLE: &str = r#"
output = "single"
dt = 0.005
domain = [[-2.0, 2.0]]
grid = [401]
controls = [2]

[system]
name = "single_integrator"

[target]
variant = "box"
bounds = [[-0.2, 0.2]]

[query]
kind = "max_reach"
horizon = 1.0
"#;

const DUBINS_SMALL: &str = r#"
output = "out/dubins"
dt = 0.1
domain = [[-2.0, 2.0], [-2.0, 2.0], [-3.0, 3.0]]
grid = [11, 11, 11]
controls = [2]

[system]
name = "dubins_car"
preset = "unit"

[target]
variant = "box"
bounds = [[-0.6, 0.6], [-0.6, 0.6], [-3.0, 3.0]]

[query]
kind = "max_reach"
horizon = 0.5
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_then_query_single_integrator() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "single.toml", SINGLE);
    let out = reachkit(&["solve", "single.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = std::fs::read_to_string(dir.path().join("single.manifest")).unwrap();
    assert!(manifest.contains("config_hash "));
    assert!(manifest.contains("recursions 201"));
    assert_eq!(manifest.lines().filter(|l| l.starts_with("step_sum ")).count(), 201);

    let q = reachkit(&["query", "single.field", "--state", "0.5", "--horizon", "1"], dir.path());
    assert!(q.status.success(), "{}", stderr(&q));
    let v: f64 = field_line(&q, "value").parse().unwrap();
    assert!((v - 0.3).abs() <= 0.025, "value {v}");
    assert_eq!(field_line(&q, "member"), "true");

    let q = reachkit(&["query", "single.field", "--state", "-0.1", "--horizon", "1"], dir.path());
    assert_eq!(field_line(&q, "value"), "0.0");
    assert_eq!(field_line(&q, "member"), "true");

    let q = reachkit(&["query", "single.field", "--state", "-1.9", "--horizon", "1"], dir.path());
    let v: f64 = field_line(&q, "value").parse().unwrap();
    assert_eq!(v, 201.0 * 0.005);
    assert_eq!(field_line(&q, "member"), "false");

    let q = reachkit(&["query", "single.field", "--state", "0.5", "--horizon", "1.01"], dir.path());
    assert_eq!(q.status.code(), Some(2));
    assert!(stderr(&q).contains("k*dt"), "{}", stderr(&q));

    let q = reachkit(&["query", "single.field", "--state", "0.5,0.1", "--horizon", "0.5"], dir.path());
    assert_eq!(q.status.code(), Some(2));
}

#[test]
fn zero_recursions_give_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "zero.toml", &SINGLE.replace("controls = [2]", "controls = [2]\nrecursions = 0"));
    let out = reachkit(&["solve", "zero.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let f = ValueField::<f64>::load(&dir.path().join("single.field")).unwrap();
    assert_eq!(f.k(), 0);
    assert!(f.values().iter().all(|&v| v == 0.0));
}

#[test]
fn invalid_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", &SINGLE.replace("grid = [401]", "grid = [1]"));
    let out = reachkit(&["solve", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grid[0]"), "{}", stderr(&out));

    write(dir.path(), "bad2.toml", &SINGLE.replace("[system]", "[system]\npreset = \"table1\""));
    let out = reachkit(&["solve", "bad2.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("system.preset"), "{}", stderr(&out));

    let out = reachkit(&["solve", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = reachkit(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn model_failure_exits_3() {
    // Grid nodes at alpha = +-pi/2 make the constant-speed thrust singular.
    let cfg = r#"
output = "sing"
dt = 0.01
domain = [[-1.5707963267948966, 1.5707963267948966], [-0.5, 0.5], [-0.5, 0.5]]
grid = [3, 3, 3]
controls = [3]

[system]
name = "longitudinal_flight"
preset = "table1"

[target]
variant = "box"
bounds = [[-0.05, 0.05], [-0.1, 0.1], [-0.1, 0.1]]

[query]
kind = "max_reach"
horizon = 0.05
"#;
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sing.toml", cfg);
    let out = reachkit(&["solve", "sing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("grid node"), "{}", stderr(&out));
    assert!(!dir.path().join("sing.field").exists());
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "single.toml", SINGLE);
    let out = Command::new(env!("CARGO_BIN_EXE_reachkit"))
        .args(["solve", "single.toml"])
        .current_dir(dir.path())
        .env("REACHKIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("REACHKIT_THREADS"));
}

#[test]
fn export_vtk_and_csv_slice() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "dubins.toml", DUBINS_SMALL);
    let out = reachkit(&["solve", "dubins.toml"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let field_path = dir.path().join("out/dubins.field");
    let field = ValueField::<f64>::load(&field_path).unwrap();

    let out = reachkit(&["export", "out/dubins.field", "--format", "vtk"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let vtk = std::fs::read_to_string(dir.path().join("out/dubins.vtk")).unwrap();
    assert!(vtk.lines().any(|l| l == "DIMENSIONS 11 11 11"));
    assert!(vtk.lines().any(|l| l == "SCALARS value double 1"));

    let out = reachkit(
        &["export", "out/dubins.field", "--format", "csv_slice", "--axis", "2", "--index", "5", "-o", "slice.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = parse_csv_slice(&std::fs::read_to_string(dir.path().join("slice.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 121);
    let mut n = 0;
    for i in 0..11 {
        for j in 0..11 {
            let stored = field.value_at(&[i, j, 5]).unwrap();
            assert_eq!(rows[n][2].to_bits(), stored.to_bits());
            n += 1;
        }
    }

    for bad in [["--axis", "3", "--index", "0"], ["--axis", "0", "--index", "11"]] {
        let mut args = vec!["export", "out/dubins.field", "--format", "csv_slice"];
        args.extend(bad);
        let out = reachkit(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = reachkit(&["export", "out/dubins.field", "--format", "csv_slice"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_single_integrator_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = SINGLE
        .replace("dt = 0.005", "dt = 0.1")
        .replace("grid = [401]", "grid = [41]");
    write(dir.path(), "coarse.toml", &coarse);
    let out = reachkit(&["verify", "coarse.toml", "--samples", "41"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = stdout(&out);
    assert!(summary.contains("41 sampled"), "{summary}");
    let csv = std::fs::read_to_string(dir.path().join("single.verify.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("node,solver,oracle,agree"));
    assert_eq!(lines.count(), 41);
    let pct: f64 = summary
        .split("off-boundary")
        .nth(1)
        .and_then(|s| s.split('(').nth(1))
        .and_then(|s| s.split('%').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(pct >= 99.0, "{summary}");
}

#[test]
fn verify_zero_samples() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = SINGLE.replace("dt = 0.005", "dt = 0.1").replace("grid = [401]", "grid = [41]");
    write(dir.path(), "coarse.toml", &coarse);
    let out = reachkit(&["verify", "coarse.toml", "--samples", "0", "--seed", "7"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).lines().any(|l| l == "0 sampled"), "{}", stdout(&out));
    let csv = std::fs::read_to_string(dir.path().join("single.verify.csv")).unwrap();
    assert_eq!(csv, "node,solver,oracle,agree\n");
}

#[test]
fn verify_guard_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "single.toml", SINGLE);
    let out = reachkit(&["verify", "single.toml", "--samples", "5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("enumeration limit"), "{}", stderr(&out));
}

#[test]
fn verify_dubins_bang_bang() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs.join("dubins_verify.toml")).unwrap();
    write(dir.path(), "dubins.toml", &text);
    let out = reachkit(&["verify", "dubins.toml", "--samples", "500", "--seed", "3"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = stdout(&out);
    let rows = std::fs::read_to_string(dir.path().join("out/dubins.verify.csv")).unwrap();
    assert_eq!(rows.lines().count(), 501);
    let pct: f64 = summary
        .split("off-boundary")
        .nth(1)
        .and_then(|s| s.split('(').nth(1))
        .and_then(|s| s.split('%').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(pct >= 95.0, "{summary}");
}

#[test]
fn verify_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "dubins.toml", DUBINS_SMALL);
    let run = |seed: &str| {
        let out = reachkit(&["verify", "dubins.toml", "--samples", "50", "--seed", seed], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read_to_string(dir.path().join("out/dubins.verify.csv")).unwrap()
    };
    assert_eq!(run("11"), run("11"));
    assert_ne!(run("11"), run("12"));
}

#[test]
fn shipped_configs_build() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            let cfg = RunConfig::load(&path).unwrap();
            cfg.build::<f64>(&configs).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
            n += 1;
        }
    }
    assert!(n >= 6);
}
