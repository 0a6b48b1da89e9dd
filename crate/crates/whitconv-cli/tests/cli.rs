use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whitconv")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o).lines().skip(2).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("whitconv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn eval_at_order_h_is_one() {
    let o = run(&["eval", "--alpha", "0", "--nu", "real:0.5", "--x-grid", "0:3:7"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("# whitconv "));
    let r = rows(&o);
    assert_eq!(r.len(), 7);
    for row in r {
        let v: f64 = row[1].parse().unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
}

#[test]
fn alpha_out_of_range_exits_2() {
    let o = run(&["eval", "--alpha", "0.6", "--nu", "real:0.5", "--x-grid", "0:1:3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn negative_alpha_is_accepted() {
    let o = run(&["eval", "--alpha", "-0.5", "--nu", "imag:1", "--x-grid", "0.5:1:2"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["eval", "--alpha", "0"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--alpha", "0", "--nu", "cplx:1", "--x-grid", "0:1:3"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn convolving_with_origin_shifts_nothing() {
    let o = run(&["convolve", "--alpha", "0", "--a", "dirac:0", "--b", "dirac:2"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&o);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][0], "atom");
    assert_eq!(r[0][1].parse::<f64>().unwrap(), 2.0);
    assert_eq!(r[0][2].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn simulate_is_reproducible_and_writes_manifest() {
    let (a, b) = (scratch("sim_a.csv"), scratch("sim_b.csv"));
    for f in [&a, &b] {
        let o = run(&[
            "simulate", "--alpha", "0", "--exponent", "gaussian:1", "--t", "1", "--steps", "4", "--paths", "50", "--seed", "7",
            "--out", f.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 2 + 50 * 5);
    let man: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scratch("sim_a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(man["ensemble"]["seed"], 7);
    assert_eq!(man["ensemble"]["alpha"], 0.0);
    assert_eq!(man["command"], "simulate");
}

#[test]
fn walk_writes_one_row_per_chain_and_step() {
    let o = run(&["walk", "--alpha", "0", "--step", "atoms:0.5@0.5,1.5@0.5", "--n", "64", "--chains", "500", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&o).len(), 500 * 65);
}

#[test]
fn verify_kernel_passes() {
    let o = run(&["verify", "kernel", "--alpha", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["pass"], true);
}

#[test]
fn verify_rejects_bad_requests() {
    assert_eq!(run(&["verify", "martingale", "--alpha", "0"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "nonsense", "--alpha", "0"]).status.code(), Some(2));
}

#[test]
fn semigroup_compound_poisson_has_atom_at_origin() {
    let o = run(&["semigroup", "--alpha", "0", "--exponent", "cp:1:dirac:1", "--t", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&o);
    let atom = r.iter().find(|r| r[0] == "atom" && r[1].parse::<f64>().unwrap() == 0.0).unwrap();
    let w: f64 = atom[2].parse().unwrap();
    assert!((w - (-0.5f64).exp()).abs() < 1e-12, "{w}");
}
