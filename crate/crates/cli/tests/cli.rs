use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rabi-cf"))
        .args(args)
        .env_remove("RABI_CF_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&run(&all))).unwrap()
}

fn assert_schema(name: &str, doc: &serde_json::Value) {
    let path = repo_root().join(format!("docs/schema/{name}.schema.json"));
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

const TWO_PHOTON: [&str; 6] = ["--set", "model.family=k-photon", "--set", "model.g=0.2", "--set", "model.delta=0.3"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn regime_json_reports_roots() {
    let doc = json(&["regime", "--set", "model.g=0.5"]);
    assert_schema("regime", &doc);
    assert_eq!(doc["verdict"], "normalizable");
    assert_eq!(doc["ratio"], 0.5);
    assert!((doc["t1"].as_f64().unwrap() + 0.2679492).abs() < 1e-7);
    assert!((doc["t2"].as_f64().unwrap() + 3.7320508).abs() < 1e-7);
}

#[test]
fn regime_without_roots_still_validates() {
    for args in [
        vec!["regime", "--set", "model.family=k-photon", "--set", "model.k=3", "--set", "model.g=0.1"],
        vec!["regime", "--set", "model.family=k-photon", "--set", "model.k=1"],
        vec!["regime", "--set", "model.g=0"],
    ] {
        assert_schema("regime", &json(&args));
    }
}

#[test]
fn every_command_matches_its_schema() {
    let small = ["--set", "sectors.blocks=all:1", "--set", "window.levels=3"];
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("blocks", with(&["blocks"], &TWO_PHOTON)),
        ("spectrum", with(&["spectrum", "--trace"], &small)),
        ("spectrum", with(&with(&["spectrum"], &TWO_PHOTON), &small)),
        ("oracle", with(&["oracle"], &small)),
        ("oracle", with(&["oracle", "--set", "oracle.method=dense", "--set", "oracle.truncation=60"], &small)),
        ("compare", with(&with(&["compare"], &TWO_PHOTON), &small)),
        ("wavefunction", vec!["wavefunction", "--set", "wavefunction.samples=5"]),
        ("diverge", vec!["diverge", "--set", "model.g=1.5"]),
        (
            "diverge",
            vec!["diverge", "--set", "model.family=k-photon", "--set", "model.k=3", "--set", "model.g=0.1"],
        ),
        ("convergence", with(&["convergence", "--set", "convergence.truncations=[50,100]"], &small)),
    ];
    for (schema, args) in cases {
        assert_schema(schema, &json(&args));
    }
}

#[test]
fn csv_headers_are_frozen() {
    let spectrum = stdout(&run(&["spectrum", "--set", "sectors.blocks=1/2"]));
    assert_eq!(
        spectrum.lines().next().unwrap(),
        "block,parity,index,energy,f_residual,pincherle_residual"
    );
    let compare = stdout(&run(&["compare", "--set", "sectors.blocks=1/2"]));
    assert_eq!(
        compare.lines().next().unwrap(),
        "block,parity,index,energy,f_residual,pincherle_residual,oracle_energy,gap"
    );
    assert!(!spectrum.contains('\r'));
}

#[test]
fn compare_two_mode_gaps_below_tolerance() {
    let out = stdout(&run(&[
        "compare",
        "--set",
        "sectors.blocks=1/2",
        "--set",
        "window.e_min=-1",
        "--set",
        "window.e_max=9",
    ]));
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let gap: f64 = rec[7].parse().expect("every level matched");
        assert!(gap.abs() < 1e-8, "{rec:?}");
        rows += 1;
    }
    assert_eq!(rows, 12);
}

#[test]
fn k3_spectrum_exits_with_regime_code() {
    let out = run(&[
        "spectrum",
        "--set",
        "model.family=k-photon",
        "--set",
        "model.k=3",
        "--set",
        "model.g=0.1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be completely diagonalized"));
    assert!(out.stdout.is_empty());
}

#[test]
fn validation_errors_exit_two() {
    for args in [
        vec!["regime", "--set", "model.gg=1"],
        vec!["regime", "--set", "nosection=1"],
        vec!["regime", "--set", "model.omega=-1"],
        vec!["spectrum", "--set", "model.family=k-photon", "--set", "sectors.blocks=1/2"],
        vec!["spectrum", "--trace"],
        vec!["spectrum", "--set", "model.g=0"],
        vec!["frobnicate"],
        vec!["regime", "--config", "/nonexistent/run.toml"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn normalizable_diverge_is_a_regime_error() {
    assert_eq!(run(&["diverge"]).status.code(), Some(3));
}

#[test]
fn example_config_is_complete_and_documented() {
    let path = repo_root().join("docs/example-config.toml");
    let out = run(&["blocks", "--config", path.to_str().unwrap()]);
    stdout(&out);

    let help = stdout(&run(&["--help"]));
    let text = std::fs::read_to_string(&path).unwrap();
    // Commented-out keys count too: the example documents every key.
    let uncommented = text.replace("# energy =", "energy =");
    let table: toml::Table = uncommented.parse().unwrap();
    let mut keys = 0;
    for (section, fields) in &table {
        for field in fields.as_table().unwrap().keys() {
            let key = format!("{section}.{field}");
            assert!(help.contains(&key), "--help lacks {key}");
            keys += 1;
        }
    }
    assert_eq!(keys, 32);
    assert!(help.contains("[default: 1e-8]"));
    assert!(help.contains("RABI_CF_THREADS"));
}

#[test]
fn trace_goes_to_a_side_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec.csv");
    stdout(&run(&[
        "spectrum",
        "--trace",
        "--set",
        "sectors.blocks=1/2",
        "--set",
        "sectors.parity=plus",
        "--out",
        out.to_str().unwrap(),
    ]));
    let trace = std::fs::read_to_string(dir.path().join("spec.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "block,parity,energy,f,converged,suspected_pole");
    assert!(lines.count() > 100);
}

#[test]
fn output_independent_of_thread_count() {
    let args = ["compare", "--format", "json", "--set", "sectors.blocks=all:2"];
    let base = stdout(&run(&args));
    for threads in ["1", "3"] {
        let out = Command::new(env!("CARGO_BIN_EXE_rabi-cf"))
            .args(args)
            .env("RABI_CF_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(stdout(&out), base, "RABI_CF_THREADS={threads}");
    }
    let bad = Command::new(env!("CARGO_BIN_EXE_rabi-cf"))
        .args(["regime"])
        .env("RABI_CF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[model]\ng = 0.9\n[output]\nformat = \"csv\"\n").unwrap();
    let doc = json(&["regime", "--config", cfg.to_str().unwrap(), "--set", "model.g=0.25"]);
    assert_eq!(doc["g"], 0.25);
}
