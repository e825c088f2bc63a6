use std::process::{Command, Output};

use gswcert::Scalar;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gswcert"))
        .args(args)
        .env_remove("GSWCERT_PRECISION")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap()
        .to_string()
}

#[test]
fn verify_three_passes() {
    let out = run(&["verify", "--n", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn verify_all_identities_passes() {
    let out = run(&["verify", "--n", "4", "--all-identities"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS minimax"));
}

#[test]
fn horizon_two_is_a_usage_error() {
    let out = run(&["build", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon below 3"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["root"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--precision", "32", "root", "--n", "3"]).status.code(), Some(2));
}

#[test]
fn root_three() {
    let out = run(&["root", "--n", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rho: f64 = field(&text, "rho").parse().unwrap();
    assert!((rho - 0.6703).abs() < 5e-5);
    let alpha: f64 = field(&text, "alpha").parse().unwrap();
    assert!((alpha - 1.6703).abs() < 5e-5);
}

#[test]
fn precision_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_gswcert"))
        .args(["root", "--n", "3", "--tolerance-exp", "60"])
        .env("GSWCERT_PRECISION", "128")
        .output()
        .unwrap();
    assert!(out.status.success());
    let short = field(&stdout(&out), "rho");
    let long = field(&stdout(&run(&["root", "--n", "3"])), "rho");
    assert!(short.len() < long.len());
    assert_eq!(&short[..30], &long[..30]);
}

#[test]
fn build_json_round_trips() {
    let out = run(&["build", "--n", "5", "--json"]);
    assert!(out.status.success());
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["n"], 5);
    assert_eq!(record["precision_bits"], 256);
    let bits = record["precision_bits"].as_u64().unwrap() as u32;
    for key in ["d", "c", "a", "b"] {
        for x in record[key].as_array().unwrap() {
            let text = x.as_str().unwrap();
            let value = Scalar::parse_decimal(text, bits).unwrap();
            assert!(value.is_positive());
            assert_eq!(value.to_decimal_string(), text);
        }
    }
    let checks = record["checks"].as_object().unwrap();
    for name in gswcert::suite::CORE_CHECKS {
        assert_eq!(checks[name], true, "{name}");
    }
}

#[test]
fn build_csv_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.csv");
    let out = run(&["build", "--n", "3", "--csv", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("field,index,value"));
    assert!(text.lines().any(|l| l.starts_with("d,1,")));
    assert!(text.lines().any(|l| l == "check,ledger,true"));
}

#[test]
fn table_is_ordered_and_deterministic() {
    let first = run(&["table", "--n-min", "3", "--n-max", "8", "--format", "json"]);
    let second = run(&["table", "--n-min", "3", "--n-max", "8", "--format", "json"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let rows: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    let ns: Vec<u64> = rows.as_array().unwrap().iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, vec![3, 4, 5, 6, 7, 8]);
    assert!(rows.as_array().unwrap().iter().all(|r| r["all_checks_pass"] == true));

    let csv = stdout(&run(&["table", "--n-min", "3", "--n-max", "4"]));
    assert_eq!(csv.lines().next(), Some("n,rho,alpha,rate,residual_max_over_R,all_checks_pass"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn envelope_rows() {
    let out = run(&["envelope", "--n", "3", "--alpha-min", "-1", "--alpha-max", "3", "--points", "5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,quad,huber,envelope,rate");
    assert_eq!(lines.len(), 6);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[2], "");
    assert!((first[3].parse::<f64>().unwrap() - 32.0).abs() < 1e-12);
}

#[test]
fn simulate_huber_at_zero_step() {
    let out = run(&["simulate", "--n", "3", "--alpha", "0", "--function", "huber", "--format", "json"]);
    assert!(out.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["iterates"].as_array().unwrap().len(), 4);
    assert!((rec["final_gap"].as_str().unwrap().parse::<f64>().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn faces_report_no_violations() {
    let out = run(&["faces", "--n", "4", "--samples", "200", "--seed", "11"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("seed = 11"));
    assert!(text.contains("violations = 0"));
}
