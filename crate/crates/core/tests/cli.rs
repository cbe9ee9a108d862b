use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kinnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinnet")).args(args).output().expect("run kinnet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> String {
    let prefix = format!("{key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key} in\n{text}")).to_string()
}

fn columns(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace().map(|t| t.parse::<f64>().unwrap());
            let row = (it.next().unwrap(), it.next().unwrap());
            assert!(it.next().is_none());
            row
        })
        .collect()
}

#[test]
fn delta_prints_value_and_chain() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.txt");
    let o = kinnet(&["delta", "--family", "legendre", "--n", "3", "--N", "100", "--output", chain.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("delta=0.7307"));
    assert_eq!(value(&text, "chain").split(',').count(), 99);
    assert_eq!(columns(&chain).len(), 99);
}

#[test]
fn delta_rejects_small_n() {
    let o = kinnet(&["delta", "--family", "legendre", "--n", "3", "--N", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N must be >= 2"));
}

#[test]
fn unknown_arguments_are_usage_errors() {
    assert_eq!(kinnet(&["delta", "--family", "hermite", "--n", "3", "--N", "4", "extra"]).status.code(), Some(1));
    assert_eq!(kinnet(&["frobnicate"]).status.code(), Some(1));
    for sub in ["delta", "sweep", "node-solve", "simulate", "compare", "audit"] {
        let o = kinnet(&[sub, "--help"]);
        assert!(o.status.success(), "{sub} --help");
    }
}

#[test]
fn sweep_writes_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("delta.txt");
    let inc = dir.path().join("increment.txt");
    let o = kinnet(&[
        "sweep", "--family", "legendre", "--n", "3", "--N-min", "2", "--N-max", "100",
        "--delta-out", d.to_str().unwrap(), "--increment-out", inc.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rows = columns(&d);
    assert_eq!(rows.len(), 99);
    assert_eq!(rows[0].0, 2.0);
    assert!((rows.last().unwrap().1 - 0.7307).abs() < 5e-4);
    assert!(!columns(&inc).is_empty());

    let o = kinnet(&["sweep", "--family", "hermite", "--n", "3", "--N-min", "12", "--N-max", "5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn hermite_sweep_increments_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let inc = dir.path().join("inc.txt");
    let o = kinnet(&["sweep", "--family", "hermite", "--n", "3", "--N-min", "2", "--N-max", "120", "--increment-out", inc.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "increments_decreasing_beyond_20"), "true");
    let tail: Vec<f64> = columns(&inc).into_iter().filter(|r| r.0 > 20.0).map(|r| r.1).collect();
    assert!(tail.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn node_solve_reports_node_density() {
    let dir = tempfile::tempdir().unwrap();
    let o = kinnet(&["node-solve", "--family", "hermite", "--N", "100", "--rho-init", "1,0,2", "--dist-dir", dir.path().to_str().unwrap(), "--filter"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rho2: f64 = value(&text, "rho2_x0").parse().unwrap();
    assert!((rho2 - 0.80036).abs() < 2e-3);
    let macro2: f64 = value(&text, "rho2_macro").parse().unwrap();
    let delta: f64 = value(&text, "delta").parse().unwrap();
    assert!((macro2 - 1.0 / (1.0 + delta)).abs() < 1e-12);
    assert_eq!(columns(&dir.path().join("node_dist_edge2_filtered.txt")).len(), 801);
}

#[test]
fn simulate_writes_profiles_for_each_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    for eps in ["1e-1", "1e-2", "5e-3"] {
        let out = dir.path().join(eps);
        let o = kinnet(&[
            "simulate", "--family", "hermite", "--N", "8", "--rho-init", "1,0,2", "--epsilon", eps,
            "--dx", "2e-3", "--length", "0.2", "--final-time", "0.05", "--times", "0.025",
            "--out-dir", out.to_str().unwrap(), "--with-macro", "--node-dist",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for name in ["kinetic_edge2_t0p05.txt", "kinetic_edge3_t0p025.txt", "macro_edge1_t0p05.txt", "node_dist_edge1.txt", "node_dist_edge1_filtered.txt"] {
            assert!(out.join(name).exists(), "{eps}: missing {name}");
        }
        let profile = columns(&out.join("kinetic_edge2_t0p05.txt"));
        assert_eq!(profile.len(), 100);
        assert!((profile[0].0 - 1e-3).abs() < 1e-15);
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = kinnet(&[
            "compare", "--family", "legendre", "--N", "6", "--rho-init", "0.5,1,1.5,2", "--epsilon", "1e-2",
            "--dx", "2e-3", "--length", "0.1", "--final-time", "0.03", "--out-dir", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        files.push((stdout(&o), fs::read(out.join("kinetic_edge4_t0p03.txt")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn audit_reports_invertible_rows() {
    let o = kinnet(&["audit", "--family", "legendre", "--N-min", "2", "--N-max", "50", "--n-min", "2", "--n-max", "6"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(value(&text, "rows"), "245");
    assert_eq!(value(&text, "all_passed"), "true");
    assert_eq!(text.lines().filter(|l| l.contains(" invertible")).count(), 245);
}

#[test]
fn config_file_is_merged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("delta.cfg");
    fs::write(&cfg, "family = hermite\nn = inf\nN = 300\n").unwrap();
    let o = kinnet(&["--config", cfg.to_str().unwrap(), "delta"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("delta=1.4368"));
    fs::write(&cfg, "family = hermite\ncolour = red\n").unwrap();
    assert_eq!(kinnet(&["--config", cfg.to_str().unwrap(), "delta", "--n", "3", "--N", "5"]).status.code(), Some(1));
}
