use std::fs;
use std::process::{Command, Output};

fn schro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schro-sde"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn help_lists_subcommands() {
    let text = stdout(&schro(&["--help"]));
    for cmd in ["run", "convergence", "complexity", "replay", "dump-noise"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn run_to_stdout_is_reproducible() {
    let args = ["run", "-p", "ou", "-n", "8", "--rows", "1e-2:0.1"];
    let a = stdout(&schro(&args));
    let b = stdout(&schro(&args));
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "preset,T,dt,dp,window,metric,value,n_samples,seed,imag_residual,stability_max"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].contains(",Int,MSE,"));
    assert!(lines[3].contains(",EM,MSE,"));
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("table");
    let out = schro(&[
        "run",
        "-p",
        "levy",
        "-n",
        "4",
        "--rows",
        "1e-2:0.1",
        "--no-em",
        "-o",
        base.to_str().unwrap(),
    ]);
    stdout(&out);
    let csv = fs::read_to_string(base.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.contains(",Int,MAE,"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(base.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["config"]["samples"], 4);
    assert!(json["timings"][0]["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "preset = \"gbm\"\nsamples = 50\n[[rows]]\ndt = 0.01\ndp = 0.2\n").unwrap();
    let text = stdout(&schro(&["run", "-c", cfg.to_str().unwrap(), "-n", "3"]));
    let row = text.lines().nth(1).unwrap();
    assert!(
        row.starts_with("gbm,") && row.contains(",Int2,") && row.contains(",3,"),
        "{row}"
    );
}

#[test]
fn dump_then_replay_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("noise.bin");
    let common = ["-p", "gbm", "-n", "5", "--rows", "1e-2:0.2"];
    let mut args = vec!["dump-noise"];
    args.extend(common);
    args.extend(["-o", dump.to_str().unwrap()]);
    stdout(&schro(&args));
    let mut args = vec!["replay"];
    args.extend(common);
    args.extend(["--dt", "1e-2", dump.to_str().unwrap()]);
    let replayed = stdout(&schro(&args));
    let mut args = vec!["run"];
    args.extend(common);
    assert_eq!(replayed, stdout(&schro(&args)));
}

#[test]
fn convergence_prints_fits() {
    let text = stdout(&schro(&["convergence", "-p", "gbm", "-n", "20"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pair,slope,intercept,r_squared");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("approx_vs_milstein,"));
}

#[test]
fn complexity_is_json() {
    let text = stdout(&schro(&["complexity", "-p", "ou", "-n", "3"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
    assert!(v[0]["gate_count"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_input_fails_cleanly() {
    for args in [
        &["run", "-n", "0"][..],
        &["run", "--rows", "0.3:0.04"],
        &["run", "--rows", "bad"],
        &["replay", "--dt", "1e-3", "/nonexistent/dump"],
    ] {
        let out = schro(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
