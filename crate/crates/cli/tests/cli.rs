use std::process::Command;

const CONFIG: &str = "\
[experiment]
seed = 9
n_runs = 2
max_steps = 40

[scenario]
n_ap = 2

[filter]
n_gdfs = 80

[aoa]
mode = \"exact\"
gate = \"oracle\"
";

fn syncloc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_syncloc"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn run_writes_every_output_and_flags_win_over_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    let status = syncloc(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--gdfs",
        "30",
        "--sigma-t",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    for f in [
        "results.csv",
        "summary.json",
        "cdf_position.csv",
        "cdf_clock.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    let c = &summary["config"];
    assert_eq!(c["experiment"]["seed"], 9);
    assert_eq!(c["experiment"]["n_runs"], 2);
    assert_eq!(c["scenario"]["n_ap"], 2);
    assert_eq!(c["filter"]["n_gdfs"], 30);
    assert!((c["clock"]["sigma_t"].as_f64().unwrap() - 3e-9).abs() < 1e-20);
    assert_eq!(c["scenario"]["p_los"], 0.8);
    let rows = std::fs::read_to_string(out.join("results.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 2 * 40);
}

#[test]
fn invalid_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = syncloc(&["run", "--runs", "0", "--out", out.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
    let missing = syncloc(&[
        "run",
        "--config",
        dir.path().join("nope.toml").to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
}
