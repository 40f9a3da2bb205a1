use std::path::Path;
use std::process::Command;

use ipa_core::oracle::{exhaustive_minima, flat_to_slots};
use ipa_core::potentials::PolynomialPotential;
use ipa_core::qtt::{GridSpec, ProductGrid};
use serde_json::Value;

fn ipa(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ipa"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf-8"),
        String::from_utf8(out.stderr).expect("utf-8"),
    )
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).expect("valid json")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn dna_two_dims_finds_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let trace = dir.path().join("t.csv");
    let (code, _, _) = ipa(&[
        "--workload", "dna", "--dims", "2",
        "--out", out.to_str().unwrap(),
        "--trace", trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = json(&read(&out));
    assert_eq!(r["converged"], true);
    for x in r["minima"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() + 1.0).abs() < 1e-3);
    }
    let csv = read(&trace);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["iteration", "eta", "x0", "x1", "max_rank"]);
    let mut rows = 0;
    for line in lines {
        assert_eq!(line.split(',').count(), header.len());
        rows += 1;
    }
    assert_eq!(rows, r["iterations"].as_u64().unwrap() as usize);
}

#[test]
fn json_round_trips_and_is_deterministic() {
    let args = ["--workload", "dna", "--dims", "3", "--depth", "6", "--seed", "7"];
    let (c1, a, _) = ipa(&args);
    let (c2, b, _) = ipa(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let v = json(&a);
    assert_eq!(json(&serde_json::to_string(&v).unwrap()), v);
    assert!(v.get("timing").is_none());
}

#[test]
fn timing_is_opt_in() {
    let (code, out, _) = ipa(&["--workload", "dna", "--dims", "1", "--timing"]);
    assert_eq!(code, 0);
    let t = &json(&out)["timing"];
    for phase in ["cross", "iterations", "measurement"] {
        assert!(t[phase].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn unconverged_exits_two_with_flag() {
    let (code, out, _) = ipa(&["--workload", "dna", "--dims", "2", "--max-iters", "3"]);
    assert_eq!(code, 2);
    let v = json(&out);
    assert_eq!(v["converged"], false);
    assert_eq!(v["stop"], "iteration_cap");
}

#[test]
fn config_errors_exit_one() {
    for args in [
        vec!["--workload", "dna", "--beta", "0"],
        vec!["--workload", "dna", "--beta", "-3"],
        vec!["--workload", "factor"],
        vec!["--workload", "factor", "--N", "12x"],
        vec!["--workload", "factor", "--N", "1"],
        vec!["--workload", "dna", "--domain", "2", "1"],
        vec!["--workload", "custom", "--domain", "0", "1"],
        vec!["--workload", "teapot"],
        vec!["--workload", "dna", "--biprime"],
    ] {
        let (code, _, err) = ipa(&args);
        assert_eq!(code, 1, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn factor_187() {
    for extra in [&[][..], &["--biprime"][..]] {
        let mut args = vec!["--workload", "factor", "--N", "187", "--p-max", "200"];
        args.extend_from_slice(extra);
        let (code, out, _) = ipa(&args);
        assert_eq!(code, 0);
        let v = json(&out);
        assert_eq!(v["factors"], serde_json::json!([11, 17]));
        assert_eq!(v["exponents"], serde_json::json!([1, 1]));
        assert_eq!(v["status"], "factored");
    }
}

#[test]
fn biprime_without_p_max_uses_cofactor() {
    let (code, out, _) = ipa(&["--workload", "factor", "--biprime", "--N", "9998000099"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["factors"], serde_json::json!([99989]));
    assert_eq!(v["cofactor"], "99991");
    assert_eq!(v["cofactor_is_prime"], true);
    assert_eq!(v["iterations"], 1);
}

#[test]
fn factor_without_zero_minima_lists_closest_primes() {
    let (code, out, _) = ipa(&["--workload", "factor", "--N", "1000003", "--p-max", "100"]);
    assert_eq!(code, 2);
    let v = json(&out);
    assert_eq!(v["status"], "no_minima_at_zero");
    assert_eq!(v["factors"], serde_json::json!([]));
    assert_eq!(v["minimal_remainder"], 1.0);
    // oracle: primes up to 100 leaving remainder 1
    let want: Vec<u64> = (2..=100u64)
        .filter(|p| (2..*p).all(|d| p % d != 0))
        .filter(|p| 1_000_003 % p == 1)
        .collect();
    let got: Vec<u64> = v["minimal_remainder_primes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert_eq!(got, want);
}

#[test]
fn custom_dna_matches_dna() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dna.poly");
    std::fs::write(&file, "# double well\nall: 0 0.429 -1.126 -0.143 0.563\n").unwrap();
    let (c1, custom, _) = ipa(&[
        "--workload", "custom", "--dims", "2", "--domain", "-1.5", "2.5",
        "--conv-tol", "3.4e-5", "--potential-file", file.to_str().unwrap(),
    ]);
    let (c2, dna, _) = ipa(&["--workload", "dna", "--dims", "2"]);
    assert_eq!((c1, c2), (0, 0));
    let (mut a, mut b) = (json(&custom), json(&dna));
    a.as_object_mut().unwrap().remove("workload");
    b.as_object_mut().unwrap().remove("workload");
    assert_eq!(a, b);
}

#[test]
fn custom_quadratic_within_one_spacing() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("q.poly");
    std::fs::write(&file, "0: 0.25 -1 1\n").unwrap();
    let (code, out, _) = ipa(&[
        "--workload", "custom", "--domain", "-1", "2", "--potential-file", file.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let x = json(&out)["minima"][0].as_f64().unwrap();
    assert!((x - 0.5).abs() <= 3.0 / 255.0);
}

#[test]
fn custom_flipped_double_well_matches_oracle() {
    let text = "all: 0 -0.429 -1.126 0.143 0.563\n";
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("flip.poly");
    std::fs::write(&file, text).unwrap();
    let (code, out, _) = ipa(&[
        "--workload", "custom", "--domain", "-2.5", "1.5", "--max-iters", "400",
        "--potential-file", file.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let x = json(&out)["minima"][0].as_f64().unwrap();
    let grid = ProductGrid::uniform(GridSpec::new(-2.5, 1.5, 8).unwrap(), 1).unwrap();
    let pot = PolynomialPotential::parse(text, 1).unwrap();
    let best = exhaustive_minima(&pot, &grid).unwrap();
    let want = grid.axes()[0].coord(flat_to_slots(&grid, best[0])[0]);
    assert!(want > 0.0);
    assert!((x - want).abs() <= 4.0 / 255.0, "{x} vs {want}");
}

#[test]
fn malformed_potential_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.poly");
    std::fs::write(&file, "# ok\nall: 1 2\n0: 1 two\n").unwrap();
    let (code, _, err) = ipa(&[
        "--workload", "custom", "--domain", "0", "1", "--potential-file", file.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn dump_potential_writes_log1p() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("v.csv");
    let (code, _, _) = ipa(&[
        "--workload", "factor", "--N", "187", "--p-max", "200", "--dump-potential", dump.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = read(&dump);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 64);
    for r in &rows {
        let p: f64 = r[1].parse().unwrap();
        let v: f64 = r[2].parse().unwrap();
        if p <= 200.0 {
            assert!((v - ((187 % p as u64) as f64).ln_1p()).abs() < 1e-12);
        }
    }
}

#[test]
fn in_process_entry_matches_binary() {
    let code = ipa_core::cli::main_from(["ipa", "--workload", "dna", "--beta", "nan"]);
    assert_eq!(code, ipa_core::cli::EXIT_CONFIG);
}
