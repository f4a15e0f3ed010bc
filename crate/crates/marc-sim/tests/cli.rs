//! End-to-end checks of the command-line interface: subcommand wiring,
//! config override precedence, seeding, output schemas and error reporting.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_marc-sim"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).env_remove("MARC_SEED").output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_fail(args: &[&str]) -> Output {
    let out = bin().args(args).env_remove("MARC_SEED").output().unwrap();
    assert!(!out.status.success(), "command {args:?} unexpectedly succeeded");
    out
}

#[test]
fn gen_attack_emits_parseable_trace() {
    let text = run_ok(&["gen", "attack", "--sides", "3", "--duration", "600", "-o", "-"]);
    let expected = "# duration 600\n\
                    0 ACT 0 100\n\
                    60 ACT 0 101\n\
                    120 ACT 0 102\n\
                    180 ACT 0 100\n\
                    240 ACT 0 101\n\
                    300 ACT 0 102\n\
                    360 ACT 0 100\n\
                    420 ACT 0 101\n\
                    480 ACT 0 102\n\
                    540 ACT 0 100\n";
    assert_eq!(text, expected);
}

#[test]
fn gen_seed_determinism_and_env_default() {
    let a = run_ok(&["gen", "combo", "--acts", "50", "--seed", "11", "-o", "-"]);
    let b = run_ok(&["gen", "combo", "--acts", "50", "--seed", "11", "-o", "-"]);
    assert_eq!(a, b);
    let via_env = bin()
        .args(["gen", "combo", "--acts", "50", "-o", "-"])
        .env("MARC_SEED", "11")
        .output()
        .unwrap();
    assert!(via_env.status.success());
    assert_eq!(String::from_utf8(via_env.stdout).unwrap(), a);
    // An explicit flag beats the environment.
    let flag_wins = bin()
        .args(["gen", "combo", "--acts", "50", "--seed", "11", "-o", "-"])
        .env("MARC_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(flag_wins.stdout).unwrap(), a);
}

#[test]
fn run_reports_key_value_lines() {
    let trace = tmp("run_report.trace");
    run_ok(&[
        "gen", "attack", "--sides", "2", "--duration", "46800",
        "-o", trace.to_str().unwrap(),
    ]);
    let report = run_ok(&["run", "--trace", trace.to_str().unwrap()]);
    assert!(report.contains("acts=780\n"), "report was:\n{report}");
    assert!(report.contains("refs=3\n"));
    assert!(report.contains("max_exposure=390\n"));
    assert!(report.contains("verdict=level-a\n"));
    for key in ["duration=", "rfms=", "cures=", "rfm_share=", "arfm_level=", "recognition_rate="] {
        assert!(report.contains(key), "missing {key} in:\n{report}");
    }
}

#[test]
fn run_accepts_trace_on_stdin() {
    let mut child = bin()
        .args(["run", "--trace", "-", "-s", "run.marc=false"])
        .env_remove("MARC_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"# duration 200\n0 ACT 0 5\n100 ACT 0 5\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("acts=2\n"));
    assert!(!report.contains("verdict="), "detector disabled, no verdict expected");
}

#[test]
fn config_file_applies_and_cli_overrides_win() {
    let cfg = tmp("override.cfg");
    std::fs::write(
        &cfg,
        "# experiment\nmitigation.policy = counter\nmitigation.logic_threshold = 64\nrun.seed = 5\n",
    )
    .unwrap();
    let trace = tmp("override.trace");
    run_ok(&[
        "gen", "attack", "--sides", "2", "--duration", "46800",
        "-o", trace.to_str().unwrap(),
    ]);
    let base = run_ok(&[
        "run", "--trace", trace.to_str().unwrap(), "--config", cfg.to_str().unwrap(),
    ]);
    // threshold 64 is crossed by 195 activates per row: cures appear
    assert!(!base.contains("cures=0\n"), "counter policy from file should cure:\n{base}");
    let overridden = run_ok(&[
        "run", "--trace", trace.to_str().unwrap(), "--config", cfg.to_str().unwrap(),
        "-s", "mitigation.policy=none",
    ]);
    assert!(overridden.contains("cures=0\n"), "-s must override the file:\n{overridden}");
}

#[test]
fn detect_writes_timeline_csv() {
    let trace = tmp("detect.trace");
    run_ok(&[
        "gen", "attack", "--sides", "2", "--duration", "46800",
        "-o", trace.to_str().unwrap(),
    ]);
    let csv_path = tmp("detect.csv");
    run_ok(&[
        "detect", "--trace", trace.to_str().unwrap(), "-o", csv_path.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "window,short_count,below_min,dup,looping,attack,in_force,verdict"
    );
    assert_eq!(lines.clone().count(), 3);
    assert!(lines.next().unwrap().starts_with("0,259,0,true,"));
}

#[test]
fn run_window_log_matches_detect_timeline() {
    let trace = tmp("winlog.trace");
    run_ok(&[
        "gen", "attack", "--sides", "2", "--duration", "46800",
        "-o", trace.to_str().unwrap(),
    ]);
    let from_run = tmp("winlog_run.csv");
    run_ok(&[
        "run", "--trace", trace.to_str().unwrap(), "--windows", from_run.to_str().unwrap(),
    ]);
    let from_detect = tmp("winlog_detect.csv");
    run_ok(&[
        "detect", "--trace", trace.to_str().unwrap(), "-o", from_detect.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read_to_string(&from_run).unwrap(),
        std::fs::read_to_string(&from_detect).unwrap()
    );
}

#[test]
fn cure_log_has_declared_schema() {
    let trace = tmp("cures.trace");
    run_ok(&[
        "gen", "attack", "--sides", "2", "--duration", "312000",
        "-o", trace.to_str().unwrap(),
    ]);
    let log = tmp("cures.csv");
    run_ok(&[
        "run", "--trace", trace.to_str().unwrap(),
        "-s", "mitigation.policy=counter", "-s", "mitigation.logic_threshold=64",
        "--cures", log.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&log).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,bank,aggressor,victims");
    let first = lines.next().expect("at least one cure");
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 4);
    assert!(fields[3].split(';').all(|v| v.parse::<u64>().is_ok()));
}

#[test]
fn sweep_trc_csv_has_paired_rows() {
    let out = run_ok(&[
        "sweep-trc", "--trcs", "60,100", "--sides", "4", "--seeds", "2",
        "--duration", "312000", "-s", "mitigation.policy=prob", "-o", "-",
    ]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep,param,seeds,policy,attach,marc,acts,refs,rfms_mean,cures_mean,\
         max_exposure_mean,baseline_exposure,mer_mean,mer_min,mer_max"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("trc,60,2,probabilistic,dram-side,false,"));
    assert!(rows[1].starts_with("trc,60,2,probabilistic,dram-side,true,"));
    assert!(rows[2].starts_with("trc,100,2,probabilistic,dram-side,false,"));
    assert!(rows[3].starts_with("trc,100,2,probabilistic,dram-side,true,"));
    // The vanilla anchor row reads exactly 1.
    assert_eq!(rows[0].split(',').nth(12).unwrap(), "1.000000");
}

#[test]
fn sweep_aggr_csv_runs() {
    let out = run_ok(&[
        "sweep-aggr", "--sides", "2,4", "--baseline-sides", "4", "--seeds", "2",
        "--duration", "312000", "-s", "mitigation.policy=para",
        "-s", "mitigation.attach=mc-side", "-o", "-",
    ]);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.split(',').count() == 15));
    assert!(rows[0].starts_with("aggr,2,2,para,mc-side,false,"));
}

#[test]
fn bench_detect_csv_runs() {
    let out = run_ok(&[
        "bench-detect", "--n-values", "1,2", "--combos", "3", "--acts", "2000", "-o", "-",
    ]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n_distinct,combos,total_acts,mean_recognition,min_recognition,\
         mean_attack_window_fraction"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let trace = tmp("errcase.trace");
    run_ok(&["gen", "attack", "--duration", "600", "-o", trace.to_str().unwrap()]);

    let bad_key = run_fail(&["run", "--trace", trace.to_str().unwrap(), "-s", "bogus.key=1"]);
    let stderr = String::from_utf8(bad_key.stderr).unwrap();
    assert_eq!(stderr, "error: unknown setting 'bogus.key'\n");

    let bad_set = run_fail(&["run", "--trace", trace.to_str().unwrap(), "-s", "no-equals"]);
    let stderr = String::from_utf8(bad_set.stderr).unwrap();
    assert_eq!(stderr, "error: override 'no-equals' is not key=value\n");

    let bad_trace = tmp("errcase_malformed.trace");
    std::fs::write(&bad_trace, "0 ACT 0 5\n60 POP 0\n").unwrap();
    let parse_err = run_fail(&["run", "--trace", bad_trace.to_str().unwrap()]);
    let stderr = String::from_utf8(parse_err.stderr).unwrap();
    assert!(stderr.starts_with("error: line 2: unknown command"), "stderr: {stderr}");
    assert_eq!(stderr.lines().count(), 1);

    let missing = run_fail(&["run", "--trace", "/nonexistent/trace.txt"]);
    let stderr = String::from_utf8(missing.stderr).unwrap();
    assert!(stderr.starts_with("error: reading trace"));
}
