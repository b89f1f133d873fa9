use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use netanom::flow::write_packets;
use netanom::{IpAddress, PacketRecord};

fn netanom(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netanom"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = netanom(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

fn verdict_files(dir: &Path) -> Vec<String> {
    names(dir).into_iter().filter(|n| n.starts_with("verdicts_")).collect()
}

#[test]
fn run_all_methods_writes_five_verdict_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["run", "--preset", "atypical_user", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(
        verdict_files(dir.path()),
        ["verdicts_art.csv", "verdicts_flow_svm.csv", "verdicts_model_based.csv", "verdicts_model_free.csv", "verdicts_window_svm.csv"]
    );
    for f in ["summary.csv", "roc_art.csv", "roc_art_fused.csv", "tau_false_alarm.csv", "roc_art.svg", "plot_model_free.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("art_fused"));
}

#[test]
fn same_seed_same_bytes() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        ok(&["run", "--preset", "ddos_flood", "--seed", "11", "--out", d.path().to_str().unwrap()]);
    }
    let files = names(dirs[0].path());
    assert_eq!(files, names(dirs[1].path()));
    for f in &files {
        assert_eq!(fs::read(dirs[0].path().join(f)).unwrap(), fs::read(dirs[1].path().join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn flags_override_environment_which_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "[run]\npreset = large_download\nmethods = model_based\n").unwrap();
    let out_dir = dir.path().join("a");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];

    let out = netanom(&args, &[("NETANOM_RUN_METHODS", "model_free")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(verdict_files(&out_dir), ["verdicts_model_free.csv"]);

    let out_dir = dir.path().join("b");
    let mut args = args.to_vec();
    args[4] = out_dir.to_str().unwrap();
    args.extend(["--methods", "art"]);
    let out = netanom(&args, &[("NETANOM_RUN_METHODS", "model_free")]);
    assert!(out.status.success());
    assert_eq!(verdict_files(&out_dir), ["verdicts_art.csv"]);
}

#[test]
fn bad_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, "[run]\npreset = atypical_user\n[model]\nepsilon = 0.01\nepsilonn = 0.02\n").unwrap();
    let out = netanom(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("line 5") && err.contains("epsilon"), "{err}");
}

#[test]
fn invalid_values_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for bad in [
        vec!["run", "--preset", "no_such_scenario", "--out", d],
        vec!["run", "--preset", "atypical_user", "--epsilon", "1.5", "--out", d],
        vec!["run", "--preset", "atypical_user", "--methods", "magic", "--out", d],
        vec!["run", "--preset", "atypical_user", "--set", "window.h", "--out", d],
        vec!["detect", "--input", "/nonexistent/flows.csv", "--out", d],
    ] {
        let out = netanom(&bad, &[]);
        assert!(!out.status.success(), "{bad:?} succeeded");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.starts_with("netanom: ") && err.lines().count() == 1, "{bad:?}: {err}");
    }
}

#[test]
fn simulate_detect_evaluate_plot_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    ok(&["simulate", "--preset", "large_download", "--out", &p("sim")]);
    assert_eq!(names(&dir.path().join("sim")), ["flows.csv", "reference.csv"]);

    let (flows, reference) = (p("sim/flows.csv"), p("sim/reference.csv"));
    ok(&["detect", "--input", &flows, "--reference", &reference, "--methods", "model_free,art", "--out", &p("det")]);
    assert_eq!(verdict_files(&dir.path().join("det")), ["verdicts_art.csv", "verdicts_model_free.csv"]);

    let out = ok(&["evaluate", "--input", &flows, "--out", &p("det")]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("model_free") && stdout.contains("art_fused"), "{stdout}");
    let summary = fs::read_to_string(dir.path().join("det/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4, "{summary}");

    ok(&["plot", &p("det/verdicts_model_free.csv"), "--out", &p("w.svg")]);
    ok(&["plot", &p("det/roc_art.csv"), "--out", &p("r.svg"), "--title", "ART"]);
    for f in ["w.svg", "r.svg"] {
        let svg = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn packets_are_aggregated_before_detection() {
    let dir = tempfile::tempdir().unwrap();
    let mut packets = Vec::new();
    for i in 0..2000 {
        let user = IpAddress::new(10, 0, 0, 1 + (i % 4) as u8);
        // one packet per user every 40 s closes a flow each time
        packets.push(PacketRecord { user, size_bytes: 500.0 + (i % 7) as f64 * 100.0, start_time: i as f64 * 10.0 });
    }
    let path = dir.path().join("packets.csv");
    write_packets(fs::File::create(&path).unwrap(), &packets).unwrap();
    let out = dir.path().join("out");
    ok(&["detect", "--packets", path.to_str().unwrap(), "--methods", "model_free", "--out", out.to_str().unwrap()]);
    let verdicts = fs::read_to_string(out.join("verdicts_model_free.csv")).unwrap();
    assert!(verdicts.lines().count() > 10);
}
