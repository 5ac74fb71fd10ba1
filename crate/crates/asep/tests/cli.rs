use std::process::Command;

use asep::cli::{run_from, Outcome};
use asep::table::Table;

fn run(args: &str) -> Outcome {
    run_from(std::iter::once("asep").chain(args.split_whitespace()))
}

fn ok_table(args: &str) -> Table {
    let out = run(args);
    assert_eq!(out.code, 0, "{args}: {:?}", out.message);
    Table::parse_csv(&out.output).unwrap()
}

fn meta_f64(t: &Table, key: &str) -> f64 {
    t.get_meta(key).unwrap_or_else(|| panic!("no {key} in header")).parse().unwrap()
}

#[test]
fn pmf_at_time_zero_is_a_point_mass() {
    let t = ok_table("pmf --p 0.3 --t 0 --x-min -3 --x-max 3");
    let col = t.column("value").unwrap();
    assert_eq!(col.len(), 7);
    for (x, v) in col {
        let want = if x == 0 { 1.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-10, "x={x}: {v}");
    }
    assert!(run("pmf --p 0.3 --t 0 --x-min -3 --x-max 3").output.contains("\n0,1.0\n"));
}

#[test]
fn cdf_is_monotone_and_reaches_one() {
    let t = ok_table("cdf --p 0.3 --t 1 --x-min -8 --x-max 8");
    let col = t.column("value").unwrap();
    for w in col.windows(2) {
        assert!(w[1].1 >= w[0].1 - 1e-12, "{w:?}");
    }
    assert!((col.last().unwrap().1 - 1.0).abs() < 1e-6);
    assert_eq!(t.get_meta("converged"), Some("true"));
}

#[test]
fn tasep_is_the_small_p_limit() {
    let a = ok_table("tasep --t 1 --quantity pmf --x-min -8 --x-max 8").column("value").unwrap();
    let b = ok_table("pmf --t 1 --p 0.001 --x-min -8 --x-max 8").column("value").unwrap();
    assert_eq!(a.len(), b.len());
    let d = a.iter().zip(&b).map(|(u, v)| (u.1 - v.1).abs()).fold(0.0, f64::max);
    assert!(d < 1e-2, "max diff {d}");
}

#[test]
fn simulate_at_time_zero() {
    let out = run("simulate --t 0 --paths 100");
    assert_eq!(out.code, 0);
    let rows: Vec<&str> = out.output.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, ["0,1.0,0.0"]);
    let t = Table::parse_csv(&out.output).unwrap();
    assert_eq!(t.column("pmf").unwrap(), vec![(0, 1.0)]);
}

#[test]
fn simulate_is_reproducible() {
    let dir = std::env::temp_dir().join(format!("asep-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for f in [&a, &b] {
        let out = run(&format!("simulate --t 1 --paths 3000 --seed 11 --out {}", f.display()));
        assert_eq!(out.code, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = run("simulate --t 1 --paths 3000 --seed 12");
    assert_ne!(other.output.as_bytes(), std::fs::read(&a).unwrap().as_slice());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn ctmc_boundary_mass_on_a_small_window() {
    let t = ok_table("ctmc --window -5:5 --t 0.5 --p 0.3");
    let total: f64 = t.column("pmf").unwrap().iter().map(|e| e.1).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let bm = meta_f64(&t, "boundary_mass");
    assert!(bm < 1e-6, "boundary_mass = {bm}");
}

#[test]
fn compare_fredholm_with_nested() {
    let out = run("compare --a fredholm --b nested --kmax 4 --t 0.5 --x-min -6 --x-max 6");
    assert_eq!(out.code, 0, "{:?}", out.message);
    let t = Table::parse_csv(&out.output).unwrap();
    assert!(meta_f64(&t, "max_abs_diff") < 1e-8);
    assert_eq!(t.get_meta("pass"), Some("true"));
}

#[test]
fn compare_series_with_ctmc() {
    let out = run("compare --a step-series --b ctmc --t 0.5");
    assert_eq!(out.code, 0, "{:?}", out.message);
    let t = Table::parse_csv(&out.output).unwrap();
    assert!(meta_f64(&t, "total_variation") < 1e-3);
}

#[test]
fn compare_fails_with_exit_three() {
    let out = run("compare --a graded --b ctmc --t 0.5 --window -2:2 --tol 1e-12");
    assert_eq!(out.code, 3);
    assert!(out.message.unwrap().contains("exceeds"));
}

#[test]
fn check_suites() {
    for suite in ["identities", "quadrature"] {
        let out = run(&format!("check {suite}"));
        assert_eq!(out.code, 0, "{suite}: {}", out.output);
        let j: serde_json::Value = serde_json::from_str(&out.output).unwrap();
        assert_eq!(j["pass"], true);
    }
    let out = run("check identities --inject-sign-flip");
    assert_eq!(out.code, 3);
    let j: serde_json::Value = serde_json::from_str(&out.output).unwrap();
    assert_eq!(j["pass"], false);
}

#[test]
fn invalid_configs_exit_one() {
    for (args, needle) in [
        ("pmf --p 0.6", "0 < p < 0.5"),
        ("pmf --p 0", "0 < p < 0.5"),
        ("cdf --t -1", "t"),
        ("pmf --R 0.5", "R > 1"),
        ("pmf --M 1000", "M"),
        ("simulate --paths 0", "n_paths"),
        ("ctmc --window 3:-3", "window"),
        ("pmf --threads 0", "threads"),
        ("pmf --bogus 1", "bogus"),
    ] {
        let out = run(args);
        assert_eq!(out.code, 1, "{args}");
        let m = out.message.unwrap();
        assert!(m.contains(needle), "{args}: {m}");
    }
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = std::env::temp_dir().join(format!("asep-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "p = 0.2\nt = 0.5\nx-min = -2\nx-max = 2\n").unwrap();
    let t = ok_table(&format!("pmf --config {} --p 0.25", cfg.display()));
    assert_eq!(t.get_meta("p"), Some("0.25"));
    assert_eq!(t.get_meta("t"), Some("0.5"));
    assert_eq!(t.rows.len(), 5);
    std::fs::write(&cfg, "p = 0.2\nwhatever = 1\n").unwrap();
    assert_eq!(run(&format!("pmf --config {}", cfg.display())).code, 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn rerun_line_reproduces_the_output() {
    for args in [
        "pmf --t 0.7 --x-min -4 --x-max 4",
        "cdf --p 0.2 --t 1.5 --engine nested --kmax 3 --x-min -2 --x-max 2",
        "tasep --t 1 --x-min -3 --x-max 3",
        "finite --y 1,3 --t 0.5 --quantity occupation --x-min 0 --x-max 4",
        "simulate --t 1 --paths 500 --seed 5",
        "ctmc --window -3:3 --t 0.4",
        "compare --t 0.5 --window -4:4 --x-min -3 --x-max 3",
        "compare --a fredholm --b nested --kmax 3 --t 0.5 --x-min -2 --x-max 2",
    ] {
        let first = run(args);
        assert!([0, 2, 3].contains(&first.code), "{args}: {:?}", first.message);
        let t = Table::parse_csv(&first.output).unwrap();
        let rerun = t.get_meta("rerun").unwrap();
        assert!(rerun.starts_with("asep "));
        let again = run_from(rerun.split_whitespace());
        assert_eq!((again.code, &again.output), (first.code, &first.output), "{args} vs {rerun}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    for args in ["simulate --t 1 --paths 2000 --seed 3", "pmf --t 1 --x-min -3 --x-max 3", "cdf --engine nested --kmax 3 --t 0.5 --x-min -2 --x-max 2"] {
        let a = run(&format!("{args} --threads 1"));
        let b = run(&format!("{args} --threads 4"));
        assert_ne!(a.code, 1, "{args}: {:?}", a.message);
        assert_eq!((a.code, &a.output), (b.code, &b.output), "{args}");
    }
}

#[test]
fn json_output() {
    let out = run("pmf --t 0 --x-min -1 --x-max 1 --format json");
    let j: serde_json::Value = serde_json::from_str(&out.output).unwrap();
    assert_eq!(j["columns"], serde_json::json!(["x", "value"]));
    assert_eq!(j["rows"][1], serde_json::json!([0, 1.0]));
}

#[test]
fn binary_exit_codes_and_streams() {
    let bin = env!("CARGO_BIN_EXE_asep");
    let ok = Command::new(bin).args(["pmf", "--t", "0", "--x-min", "0", "--x-max", "0"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8(ok.stdout).unwrap().ends_with("0,1.0\n"));
    let bad = Command::new(bin).args(["pmf", "--p", "0.7"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("0 < p < 0.5"));
    let unconverged = Command::new(bin).args(["cdf", "--kmax", "1", "--t", "2", "--x-min", "3", "--x-max", "3"]).output().unwrap();
    assert_eq!(unconverged.status.code(), Some(2));
}
