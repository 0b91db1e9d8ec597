use std::path::Path;
use std::process::{Command, Output};

use fbd_cli::io::{format_channels, read_channels, read_interferograms};
use fbd_cli::{appendix_trials, EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use fbd_core::seqcore::max_normalize_interferograms;
use fbd_core::synth::{make_experiment, ExperimentId, ExperimentSpec};
use fbd_core::{build_interferograms, fibd, fpr, AltMinConfig, HomotopySchedule};
use tempfile::tempdir;

fn fbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbd"))
        .args(args)
        .env_remove("FBD_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_smoke_writes_every_output() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("e1");
    let o = fbd(&[
        "pipeline",
        "--experiment",
        "I",
        "--seed",
        "1",
        "--nr",
        "3",
        "--t",
        "120",
        "--max-iters",
        "60",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["ghat.csv", "shat.csv", "gij.csv", "sa.csv", "report.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(read_channels(&out.join("ghat.csv")).unwrap().nr(), 3);
    assert_eq!(read_interferograms(&out.join("gij.csv")).unwrap().maxlag(), 30);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 1);
    assert_eq!(report["config"]["max_iters"], 60);
    let stages: Vec<&str> = report["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["fibd", "fpr", "deconvolve"]);
    assert!(report["score"].as_f64().unwrap() > 0.0);
}

#[test]
fn fibd_matches_the_library_bit_for_bit() {
    let mut spec = ExperimentSpec::new(ExperimentId::I, 4);
    spec.nr = 3;
    spec.t = 120;
    let e = make_experiment(&spec).unwrap();
    let dir = tempdir().unwrap();
    let input = dir.path().join("d.csv");
    std::fs::write(&input, format_channels(&e.data)).unwrap();
    let out = dir.path().join("run");
    let o = fbd(&[
        "fibd",
        "--input",
        path(&input),
        "--tau",
        "30",
        "--alphas",
        "inf,0",
        "--seed",
        "9",
        "--max-iters",
        "40",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));

    let dij = max_normalize_interferograms(&build_interferograms(&e.data, spec.t).unwrap()).unwrap();
    let cfg = AltMinConfig {
        max_outer_iters: 40,
        seed: 9,
        ..AltMinConfig::default()
    };
    let (_, gij, _) = fibd(&dij, 30, &"inf,0".parse::<HomotopySchedule>().unwrap(), &cfg, 9).unwrap();
    assert_eq!(read_interferograms(&out.join("gij.csv")).unwrap(), gij);

    let out2 = dir.path().join("phase");
    let o = fbd(&[
        "fpr",
        "--input",
        path(&out.join("gij.csv")),
        "--front",
        "0",
        "--seed",
        "9",
        "--max-iters",
        "40",
        "--out",
        path(&out2),
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let (g, _) = fpr(&gij, 0, &HomotopySchedule::hard_then_free(), &cfg, 9).unwrap();
    assert_eq!(read_channels(&out2.join("ghat.csv")).unwrap(), g);
}

#[test]
fn seed_comes_from_the_environment_and_config_file_is_overridden_by_flags() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# small run\nexperiment = II\nnr = 3\nt = 100\nmax_iters = 2\nseed = 5\n",
    )
    .unwrap();
    let a = dir.path().join("a");
    let o = fbd(&["lsbd", "--config", path(&cfg), "--max-iters", "3", "--out", path(&a)]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["max_iters"], 3);
    assert_eq!(report["config"]["nr"], 3);
    assert_eq!(report["seed"], 5);

    let b = dir.path().join("b");
    let o = Command::new(env!("CARGO_BIN_EXE_fbd"))
        .args([
            "synth",
            "--experiment",
            "I",
            "--nr",
            "2",
            "--t",
            "60",
            "--out",
            path(&b),
        ])
        .env("FBD_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 42);
    for f in ["d.csv", "g.csv", "s.csv", "gij.csv"] {
        assert!(b.join(f).is_file());
    }
}

#[test]
fn appendix_check_reports_the_property() {
    let o = fbd(&["appendix-check", "--trials", "1000", "--seed", "7"]);
    assert_eq!(code(&o), EXIT_OK);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("1000 trials") && text.contains("holds"), "{text}");
    let s = appendix_trials(1000, 7).unwrap();
    assert!(s.holds());
    assert!(s.min_gap >= 0.0);
    assert_eq!(s.equalities, s.deltas);
}

#[test]
fn failures_map_to_documented_exit_codes() {
    assert_eq!(code(&fbd(&["fibd", "--bogus"])), EXIT_USAGE);
    assert_eq!(code(&fbd(&["pipeline"])), EXIT_USAGE);
    assert_eq!(
        code(&fbd(&["fibd", "--input", "/nonexistent/d.csv", "--tau", "3"])),
        EXIT_IO
    );
    assert_eq!(code(&fbd(&["fibd", "--experiment", "VII"])), EXIT_VALIDATION);
    assert_eq!(
        code(&fbd(&["fibd", "--experiment", "I", "--alphas", "0,inf"])),
        EXIT_VALIDATION
    );
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "# fbd-channelset nr=2 origin=0 len=3\n1,2\n").unwrap();
    assert_eq!(
        code(&fbd(&["lsbd", "--input", path(&bad), "--tau", "1"])),
        EXIT_VALIDATION
    );
    let o = fbd(&["--help"]);
    assert_eq!(code(&o), EXIT_OK);
    assert!(String::from_utf8_lossy(&o.stdout).contains("4  solver failure"));
}
