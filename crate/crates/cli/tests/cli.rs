use std::path::Path;
use std::process::{Command, Output};

use nlneumann_cli::spec::{
    FieldSpec, FluxSpec, GaugeSpec, GridSpec, SolverKind, SourceSpec, TolerancesSpec,
};
use nlneumann_cli::ProblemSpec;
use proptest::prelude::*;

fn nlneumann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlneumann"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

const HAND: &str = r#"{
  "field": {"q": 2, "n": 1, "alpha": 2.0},
  "grid": {"N": 0, "M": 1, "nu": 1},
  "f": {"kind": "values", "values": [1.0, -1.0]},
  "g": {"kind": "zero"},
  "solver": "fredholm",
  "gauge": {"kind": "zero_mean"}
}"#;

#[test]
fn solve_hand_example_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "hand.json", HAND);
    let out = nlneumann(&["solve", "--spec", &spec]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["u"], serde_json::json!([0.25, -0.25]));
    assert_eq!(v["h"], 0.0);
    assert!(v["residuals"]["pde_max"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["pass"], true);
}

#[test]
fn solve_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "hand.json",
        &HAND.replace("fredholm", "galerkin"),
    );
    let csv = dir.path().join("u.csv");
    let out = nlneumann(&[
        "solve",
        "--spec",
        &spec,
        "--out",
        csv.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("coset_id,level_region,value"));
    assert_eq!(lines.next(), Some("00,omega,0.25"));
    assert_eq!(lines.next(), Some("01,omega,-0.25"));
    assert!(lines.next().unwrap().starts_with("10,shell1,"));
    assert!(text.contains("\nouter,"));
    assert!(text.lines().any(|l| l.starts_with("# pde_residual,")));
}

#[test]
fn incompatible_data_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "bad.json",
        &HAND.replace("[1.0, -1.0]", "[1.0, 0.5]"),
    );
    let out = nlneumann(&["solve", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "incompatible");
    // int f = (1 + 0.5) * 1/2
    assert!((err["defect"].as_f64().unwrap() - 0.75).abs() < 1e-15);
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("compatibility condition"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let short = write_spec(
        dir.path(),
        "short.json",
        &HAND.replace("[1.0, -1.0]", "[1.0]"),
    );
    assert_eq!(
        nlneumann(&["solve", "--spec", &short]).status.code(),
        Some(1)
    );
    let unknown = write_spec(
        dir.path(),
        "unknown.json",
        &HAND.replace("\"solver\"", "\"extra\": 0, \"solver\""),
    );
    assert_eq!(
        nlneumann(&["solve", "--spec", &unknown]).status.code(),
        Some(1)
    );
    assert_eq!(
        nlneumann(&["solve", "--spec", "/nonexistent/spec.json"])
            .status
            .code(),
        Some(1)
    );
    let out = nlneumann(&["verify", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 1);
    assert_eq!(
        nlneumann(&["verify", "--trials", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(
        nlneumann(&["spectrum", "--cap", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        nlneumann(&["kernel", "--s-min", "3", "--s-max", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(nlneumann(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_negative_control() {
    assert_eq!(
        nlneumann(&["verify", "--trials", "10"]).status.code(),
        Some(0)
    );
    let out = nlneumann(&["verify", "--trials", "10", "--perturb", "1e-6"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",false"));
}

#[test]
fn small_gamma_warning_is_json() {
    let out = nlneumann(&["kernel", "--alpha", "1.0", "-N", "0", "--s-min", "-1"]);
    assert_eq!(out.status.code(), Some(0));
    let w: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(w["warning"].as_str().unwrap().contains("alpha"));
}

#[test]
fn random_source_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = HAND
        .replace(
            r#"{"kind": "values", "values": [1.0, -1.0]}"#,
            r#"{"kind": "zero_mean_random", "seed": 7}"#,
        )
        .replace(r#""N": 0, "M": 1, "nu": 1"#, r#""N": 1, "M": 2, "nu": 2"#);
    let spec = write_spec(dir.path(), "random.json", &spec);
    for format in ["json", "csv"] {
        let a = nlneumann(&["solve", "--spec", &spec, "--format", format]);
        let b = nlneumann(&["solve", "--spec", &spec, "--format", format]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout);
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite())
    ]
}

prop_compose! {
    fn arb_spec()(
        q in prop_oneof![Just(2u32), Just(3), Just(5)],
        n in 1u32..4,
        alpha in 0.1..8.0f64,
        domain_level in -3i32..3,
        extra in 0i32..3,
        nu in 0i32..3,
        f in prop_oneof![
            prop::collection::vec(finite(), 0..6).prop_map(|values| SourceSpec::Values { values }),
            any::<u64>().prop_map(|seed| SourceSpec::ZeroMeanRandom { seed }),
        ],
        g in prop_oneof![
            Just(FluxSpec::Zero {}),
            prop::collection::vec(finite(), 0..6).prop_map(|values| FluxSpec::Values { values }),
        ],
        solver in prop_oneof![Just(SolverKind::Galerkin), Just(SolverKind::Fredholm), Just(SolverKind::FredholmInhomogeneous)],
        gauge in prop_oneof![Just(GaugeSpec::ZeroMean {}), finite().prop_map(|h| GaugeSpec::FixOuter { h })],
        tolerances in prop::option::of((1e-16..1.0f64, 1e-16..1.0f64)),
    ) -> ProblemSpec {
        ProblemSpec {
            field: FieldSpec { q, n, alpha },
            grid: GridSpec { domain_level, outer_level: domain_level + extra, nu },
            f,
            g,
            solver,
            gauge,
            tolerances: tolerances.map(|(compat, residual)| TolerancesSpec { compat, residual }),
        }
    }
}

proptest! {
    #[test]
    fn spec_round_trips(spec in arb_spec()) {
        let text = spec.to_json();
        prop_assert_eq!(ProblemSpec::from_json(&text).unwrap(), spec.clone());
        let compact = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(ProblemSpec::from_json(&compact).unwrap(), spec);
    }
}
