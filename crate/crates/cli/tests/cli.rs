use proptest::prelude::*;
use spinfactory::entanglement::PairSelector;
use spinfactory_cli::config::SchemaError;
use spinfactory_cli::output::float;
use spinfactory_cli::{parse_config, parse_pairs, parse_range};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_spinfactory");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(BIN)
        .args(args)
        .env("SPINFACTORY_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CHAIN6: &str = r#"{
  "sites": [{"spin": 0.5}, {"spin": 0.5}, {"spin": 0.5}, {"spin": 0.5}, {"spin": 0.5}, {"spin": 0.5}],
  "bonds": [{"i": 0, "j": 1}, {"i": 1, "j": 2}, {"i": 2, "j": 3}, {"i": 3, "j": 4}, {"i": 4, "j": 5}],
  "options": {"seed": 42}
}"#;

/// Designs a random-direction chain and returns the path of the design file.
fn designed(dir: &Path, h_par: &str) -> PathBuf {
    let state = write(dir, "state.json", CHAIN6);
    let out = dir.join("design.json");
    let o = run(&["design", "--state", s(&state), "--h-par", h_par, "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn minimal_pair_config_parses() {
    let cfg = parse_config(
        r#"{"sites": [{"spin": 0.5, "theta": 0.3, "phi": 1.0}, {"spin": 1}],
            "bonds": [{"i": 0, "j": 1, "coupling": [1, 0.5, -0.2]}]}"#,
    )
    .unwrap();
    assert_eq!(cfg.len(), 2);
    assert_eq!(cfg.bonds.len(), 1);
    assert_eq!(cfg.sites[1].twice_spin(), 2);
    assert!(cfg.angles[1].is_none());
    assert_eq!(cfg.options.seed, 42);
    let m = cfg.bonds[0].matrix.unwrap();
    assert_eq!(m[(2, 2)], -0.2);
    assert_eq!(m[(0, 1)], 0.0);
    assert_eq!(cfg.hash.len(), 64);
}

#[test]
fn full_matrix_bond_parses() {
    let cfg = parse_config(
        r#"{"sites": [{"spin": 0.5}, {"spin": 0.5}],
            "bonds": [{"i": 0, "j": 1, "matrix": [[1, 0.1, 0], [0, 1, 0], [0, 0, 1]]}]}"#,
    )
    .unwrap();
    assert_eq!(cfg.bonds[0].matrix.unwrap()[(0, 1)], 0.1);
}

#[test]
fn non_integral_twice_spin_is_rejected() {
    let err = parse_config(r#"{"sites": [{"spin": 0.5}, {"spin": 0.7}]}"#).unwrap_err();
    match err {
        SchemaError::Field { field, .. } => assert_eq!(field, "sites[1].spin"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn schema_errors_carry_location() {
    let err = parse_config("{\n  \"sites\": [{\"spin\": 0.5}],\n  \"bogus\": 1\n}").unwrap_err();
    match err {
        SchemaError::Syntax { line, message, .. } => {
            assert_eq!(line, 3);
            assert!(message.contains("bogus"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
    let cases = [
        (r#"{"sites": []}"#, "sites"),
        (r#"{"sites": [{"spin": 0.5}], "bonds": [{"i": 0, "j": 3}]}"#, "bonds[0].j"),
        (r#"{"sites": [{"spin": 0.5}, {"spin": 0.5}], "bonds": [{"i": 0, "j": 1, "coupling": [1,1,1], "matrix": [[1,0,0],[0,1,0],[0,0,1]]}]}"#, "bonds[0]"),
        (r#"{"sites": [{"spin": 0.5, "theta": 1.0}]}"#, "sites[0]"),
        (r#"{"sites": [{"spin": 0.5}], "fields": [[0,0,1],[0,0,1]]}"#, "fields"),
        (r#"{"sites": [{"spin": 0.5}], "h_parallel": [1, 2]}"#, "h_parallel"),
        (r#"{"sites": [{"spin": 0.5}], "options": {"tolerance": -1}}"#, "options.tolerance"),
    ];
    for (text, want) in cases {
        match parse_config(text).unwrap_err() {
            SchemaError::Field { field, .. } => assert_eq!(field, want, "{text}"),
            other => panic!("{text}: unexpected {other:?}"),
        }
    }
}

#[test]
fn reference_infer_config_enumerates_all_branches() {
    let dir = TempDir::new().unwrap();
    // J = (1, 0.75, -0.2) on each bond, seed direction θ = π/3, φ = π/5
    let text = r#"{
      "sites": [{"spin": 0.5, "theta": 1.0471975511965976, "phi": 0.6283185307179586},
                {"spin": 0.5}, {"spin": 0.5}, {"spin": 0.5}],
      "bonds": [{"i": 0, "j": 1, "coupling": [1, 0.75, -0.2]},
                {"i": 2, "j": 1, "coupling": [1, 0.75, -0.2]},
                {"i": 2, "j": 3, "coupling": [1, 0.75, -0.2]}]
    }"#;
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.bonds.len(), 3);
    let sys = write(dir.path(), "fig.json", text);
    let out = dir.path().join("inf.csv");
    let o = run(&["infer", "--system", s(&sys), "--seed-site", "0", "--branches", "all", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# spinfactory "));
    assert_eq!(lines[1], "branch_word,site,theta,phi,nx,ny,nz,free,max_residual");
    // 2^3 branch words, 4 sites each
    assert_eq!(lines.len() - 2, 8 * 4);
    for row in &lines[2..] {
        let residual: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(residual < 1e-10, "{row}");
    }

    let o = run(&["infer", "--system", s(&sys), "--branches", "101", "--out", s(&out)]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.starts_with("101,")));
    assert_eq!(csv.lines().count() - 2, 4);

    let o = run(&["infer", "--system", s(&sys), "--branches", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_accepts_designs_and_rejects_tampering() {
    let dir = TempDir::new().unwrap();
    let design = designed(dir.path(), "1.5");
    let o = run(&["verify", "--system", s(&design)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let residual: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("residual "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual < 1e-10);

    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&design).unwrap()).unwrap();
    let h = doc["fields"][2][0].as_f64().unwrap();
    doc["fields"][2][0] = serde_json::json!(h + 0.05);
    let tampered = write(dir.path(), "tampered.json", &doc.to_string());
    let o = run(&["verify", "--system", s(&tampered)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_needs_explicit_state() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", CHAIN6);
    assert_eq!(run(&["verify", "--system", s(&cfg)]).status.code(), Some(1));
    let bad = write(dir.path(), "bad.json", r#"{"sites": [{"spin": 1.25}]}"#);
    assert_eq!(run(&["verify", "--system", s(&bad)]).status.code(), Some(1));
    assert_eq!(run(&["verify", "--system", "/nonexistent/x.json"]).status.code(), Some(1));
}

#[test]
fn parallel_sweep_shows_factorization_above_threshold() {
    let dir = TempDir::new().unwrap();
    let design = designed(dir.path(), "0");
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep", "--system", s(&design), "--mode", "parallel", "--range", "0:4:5", "--pairs", "all", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with(&format!("# spinfactory {} config=", env!("CARGO_PKG_VERSION"))));
    assert_eq!(lines.next().unwrap(), "param,i,j,concurrence,gs_energy,gap");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5 * 15);
    // far above the threshold the ground state is the product state
    let top: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == 4.0).collect();
    assert_eq!(top.len(), 15);
    assert!(top.iter().all(|r| r[3] < 1e-10 && r[5] > 0.0));
    // at zero parallel field some pair is entangled
    assert!(rows.iter().filter(|r| r[0] == 0.0).any(|r| r[3] > 1e-3));
}

#[test]
fn field_sweep_entangles_neighbours() {
    let dir = TempDir::new().unwrap();
    let design = designed(dir.path(), "4");
    let o = run(&["sweep", "--system", s(&design), "--mode", "field", "--range", "-0.02:0.02:3", "--pairs", "0,1;1,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> = stdout
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for r in rows {
        if r[0] == 0.0 {
            assert!(r[3] < 1e-10);
        } else {
            assert!(r[3] > 0.0);
        }
    }
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let design = designed(dir.path(), "1");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "sweep".to_string(), "--system".into(), s(&design).into(), "--mode".into(), "coupling".into(),
            "--range".into(), "-0.1:0.1:7".into(), "--out".into(), s(out).into(),
        ]
    };
    let argv_a = args(&a);
    let argv_b = args(&b);
    let ra: Vec<&str> = argv_a.iter().map(String::as_str).collect();
    let rb: Vec<&str> = argv_b.iter().map(String::as_str).collect();
    assert!(run_with_threads(&ra, "1").status.success());
    assert!(run_with_threads(&rb, "4").status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let d2 = dir.path().join("design2.json");
    let state = dir.path().join("state.json");
    assert!(run(&["design", "--state", s(&state), "--h-par", "1", "--out", s(&d2)]).status.success());
    assert_eq!(std::fs::read(&design).unwrap(), std::fs::read(&d2).unwrap());

    assert_eq!(run_with_threads(&ra, "zero").status.code(), Some(1));
}

#[test]
fn spectrum_reports_product_ground_state_at_large_field() {
    let dir = TempDir::new().unwrap();
    let design = designed(dir.path(), "0");
    let o = run(&["spectrum", "--system", s(&design), "--h-par", "-1:5:3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[1], "h_par,gs_energy,gap,ground_degeneracy,theta_energy,theta_overlap");
    let last: Vec<f64> = lines[4].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 5.0);
    assert!((last[1] - last[4]).abs() < 1e-10);
    assert_eq!(last[3], 1.0);
    assert!((last[5] - 1.0).abs() < 1e-10);
}

#[test]
fn spiral_design_verifies() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("spiral.json");
    let o = run(&["spiral", "--n", "6", "--k", "1", "--theta", "1.2", "--j", "1", "--h-par", "0", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["bonds"].as_array().unwrap().len(), 6);
    for f in doc["fields"].as_array().unwrap() {
        for x in f.as_array().unwrap() {
            assert!(x.as_f64().unwrap().abs() < 1e-12);
        }
    }
    assert_eq!(run(&["verify", "--system", s(&out)]).status.code(), Some(0));

    let o = run(&["spiral", "--n", "6", "--k", "1", "--theta", "1.2", "--j", "1", "--h-par", "0.5", "--open", "--out", s(&out)]);
    assert!(o.status.success());
    assert_eq!(run(&["verify", "--system", s(&out)]).status.code(), Some(0));

    let o = run(&["spiral", "--n", "6", "--k", "6", "--theta", "1.2", "--j", "1", "--h-par", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn complexity_prints_counts() {
    let o = run(&["complexity", "--scenario", "tunable-cyclic-chain", "--n", "5"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "scenario,n,m,k\ntunable-cyclic-chain,5,4,5\n");
    assert_eq!(run(&["complexity", "--scenario", "warp-drive", "--n", "5"]).status.code(), Some(1));
    assert_eq!(run(&["complexity", "--scenario", "fixed-open-chain", "--n", "2"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--mode", "field"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn range_and_pair_arguments() {
    let r = parse_range("-0.5:1.5:5").unwrap();
    assert_eq!((r.lo, r.hi, r.steps), (-0.5, 1.5, 5));
    assert!(parse_range("0:1").is_err());
    assert!(parse_range("0:1:0").is_err());
    assert!(parse_range("a:1:2").is_err());
    assert_eq!(parse_pairs("all").unwrap(), PairSelector::All);
    assert_eq!(parse_pairs("0,1; 2,5").unwrap(), PairSelector::List(vec![(0, 1), (2, 5)]));
    assert!(parse_pairs("0-1").is_err());
    assert!(parse_pairs("").is_err());
}

proptest! {
    #[test]
    fn printed_floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn ranges_round_trip(lo in -1e3f64..1e3, hi in -1e3f64..1e3, steps in 1usize..1000) {
        let r = parse_range(&format!("{}:{}:{}", float(lo), float(hi), steps)).unwrap();
        prop_assert_eq!((r.lo, r.hi, r.steps), (lo, hi, steps));
    }
}
