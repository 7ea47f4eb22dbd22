//! End-to-end checks of the command-line surface and its exit-code
//! contract: 0 = clean, 1 = events at or above caution, 2 = usage or
//! parse failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dga-monitor"))
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn gen(dir: &Path, profile: &str, seed: u64) -> PathBuf {
    let out = dir.join(format!("{profile}-{seed}.csv"));
    let status = bin()
        .args(["gen", "--profile", profile, "--seed", &seed.to_string(), "--out"])
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    out
}

#[test]
fn analyze_stable_profile_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "stable", 3);
    let output = bin()
        .arg("analyze")
        .arg(&input)
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    assert!(stdout(&output).contains("0 events"));
}

#[test]
fn analyze_failure_case_exits_one_and_lists_events() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let output = bin()
        .arg("analyze")
        .arg(&input)
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    let text = stdout(&output);
    assert!(text.contains("3 events"), "{text}");
    assert!(text.contains("severity warning"));
}

#[test]
fn analyze_missing_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("analyze")
        .arg(dir.path().join("nope.csv"))
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn analyze_json_output_is_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let output = bin()
        .arg("analyze")
        .arg(&input)
        .arg("--json")
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(doc["events"].as_array().unwrap().len(), 3);
    assert_eq!(doc["max_event_severity"], "warning");
    assert_eq!(doc["rejected"], 0);
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "stable", 11);
    let b = dir.path().join("again.csv");
    let status = bin()
        .args(["gen", "--profile", "stable", "--seed", "11", "--out"])
        .arg(&b)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap()
    );
}

#[test]
fn gen_rejects_unknown_profile() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args(["gen", "--profile", "wild", "--out"])
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn replay_rejects_nonpositive_speed() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "stable", 3);
    let output = bin()
        .arg("replay")
        .arg(&input)
        .args(["--speed", "0"])
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn replay_dispatches_notifications_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let output = bin()
        .arg("replay")
        .arg(&input)
        .args(["--speed", "max"])
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let text = stdout(&output);
    let subjects: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("Subject: "))
        .collect();
    assert_eq!(subjects.len(), 3, "{text}");
    assert!(subjects[0].contains("atypical"));
    assert!(subjects[2].contains("H2 warning TX-1C 2019-01-25T10:14:00Z"));
    assert!(text.contains("notifications: 3 delivered, 0 failed"));
}

#[test]
fn watch_stdin_pipe_emits_notifications_and_matches_backfill() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let data = std::fs::read_to_string(&input).unwrap();

    let mut child = bin()
        .arg("watch")
        .arg("--store")
        .arg(dir.path().join("watch.ndjson"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(data.as_bytes())
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    let text = stdout(&output);
    assert_eq!(text.matches("Subject: ").count(), 3, "{text}");

    // Same events as a batch analyze of the same file.
    let status = bin()
        .arg("analyze")
        .arg(&input)
        .arg("--store")
        .arg(dir.path().join("batch.ndjson"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let watch_store = dga_monitor::EventStore::open(dir.path().join("watch.ndjson")).unwrap();
    let batch_store = dga_monitor::EventStore::open(dir.path().join("batch.ndjson")).unwrap();
    assert_eq!(watch_store.event_ids(), batch_store.event_ids());
}

#[test]
fn watch_tails_a_growing_file_until_killed() {
    let dir = tempfile::tempdir().unwrap();
    let feed = dir.path().join("feed.csv");
    let store = dir.path().join("events.ndjson");
    std::fs::write(&feed, "timestamp,transformer_id,species,kind,value\n").unwrap();

    let mut child = bin()
        .arg("watch")
        .arg(&feed)
        .arg("--store")
        .arg(&store)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    // Append an escalating reading plus a newer sample that pushes the
    // watermark past it.
    let mut file = std::fs::OpenOptions::new().append(true).open(&feed).unwrap();
    writeln!(file, "2019-01-24T10:55:00Z,TX-1C,H2,concentration,85").unwrap();
    writeln!(file, "2019-01-24T10:55:00Z,TX-1C,H2,trend,31").unwrap();
    writeln!(file, "2019-01-24T11:55:00Z,TX-1C,H2,concentration,85").unwrap();
    writeln!(file, "2019-01-24T11:55:00Z,TX-1C,H2,trend,31").unwrap();
    drop(file);

    // Poll the store until the event lands (the tail poll loop runs on a
    // 200 ms cadence).
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(10);
    let seen = loop {
        if store.exists() {
            let stored = dga_monitor::EventStore::open(&store).unwrap();
            if stored.len() >= 1 {
                break true;
            }
        }
        if std::time::Instant::now() > deadline {
            break false;
        }
        std::thread::sleep(std::time::Duration::from_millis(100));
    };
    child.kill().unwrap();
    let _ = child.wait();
    assert!(seen, "tailed event never reached the store");
}

#[test]
fn watch_idle_source_heartbeats_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["watch", "--heartbeat-secs", "1", "--store"])
        .arg(dir.path().join("events.ndjson"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let stdin = child.stdin.take().unwrap();
    std::thread::sleep(std::time::Duration::from_millis(2500));
    drop(stdin); // EOF -> clean shutdown
    let output = child.wait_with_output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(
        err.matches("heartbeat: 0 samples processed").count() >= 2,
        "{err}"
    );
    assert_eq!(stdout(&output).matches("Subject: ").count(), 0);
}

#[test]
fn report_empty_store_prints_zero_events() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .arg("report")
        .arg("--store")
        .arg(dir.path().join("empty.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    assert!(stdout(&output).contains("0 events"));
}

#[test]
fn report_filters_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let store = dir.path().join("events.ndjson");
    bin()
        .arg("analyze")
        .arg(&input)
        .arg("--store")
        .arg(&store)
        .status()
        .unwrap();

    let all = bin().arg("report").arg("--store").arg(&store).output().unwrap();
    assert_eq!(all.status.code(), Some(1));
    assert!(stdout(&all).contains("3 events"));

    let h2 = bin()
        .args(["report", "--gas", "H2", "--store"])
        .arg(&store)
        .output()
        .unwrap();
    assert!(stdout(&h2).contains("3 events"));

    let none = bin()
        .args(["report", "--gas", "CO", "--store"])
        .arg(&store)
        .output()
        .unwrap();
    assert_eq!(none.status.code(), Some(0));
    assert!(stdout(&none).contains("0 events"));

    let ranged = bin()
        .args([
            "report",
            "--from",
            "2019-01-25T00:00:00Z",
            "--csv",
            "--store",
        ])
        .arg(&store)
        .output()
        .unwrap();
    let text = stdout(&ranged);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("time,transformer_id,gas,"));
    assert_eq!(lines.count(), 1, "{text}");

    let bad_gas = bin()
        .args(["report", "--gas", "O2", "--store"])
        .arg(&store)
        .output()
        .unwrap();
    assert_eq!(bad_gas.status.code(), Some(2));
}

#[test]
fn check_config_accepts_shipped_example() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/dga.toml");
    let output = bin()
        .arg("check-config")
        .arg("--config")
        .arg(&shipped)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    assert!(stdout(&output).contains("config ok"));
}

#[test]
fn check_config_reports_field_level_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[thresholds.limits.H2]\nconcentration = [500.0, 400.0, 1000.0]\ntrend = [8.33, 16.66, 25.0]\n",
    )
    .unwrap();
    let output = bin()
        .arg("check-config")
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("limits.H2.concentration"), "{err}");
}

#[test]
fn malformed_config_fails_commands_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "not = [valid\n").unwrap();
    let input = gen(dir.path(), "stable", 3);
    let output = bin()
        .arg("analyze")
        .arg(&input)
        .arg("--config")
        .arg(&path)
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn failed_deliveries_leave_events_stored() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let config = dir.path().join("dead-sink.toml");
    // Nothing listens on this port; no retries so the run stays fast.
    std::fs::write(
        &config,
        "[notify]\nretry_backoff_secs = []\n\n[[notify.sinks]]\nkind = \"webhook\"\nurl = \"http://127.0.0.1:1/hook\"\ntimeout_secs = 1\n",
    )
    .unwrap();
    let store = dir.path().join("events.ndjson");
    let output = bin()
        .arg("replay")
        .arg(&input)
        .args(["--speed", "max"])
        .arg("--config")
        .arg(&config)
        .arg("--store")
        .arg(&store)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    assert!(stdout(&output).contains("notifications: 0 delivered, 3 failed"));
    // The store is untouched by delivery failures.
    let events = dga_monitor::EventStore::open(&store).unwrap();
    assert_eq!(events.len(), 3);
}

#[test]
fn ndjson_input_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.ndjson");
    let mut lines = String::new();
    for (t, conc, trend) in [
        ("2019-01-24T00:00:00Z", 2.0, 0.0),
        ("2019-01-24T08:02:00Z", 60.0, 16.0),
        ("2019-01-24T10:55:00Z", 85.0, 31.0),
        ("2019-01-25T10:14:00Z", 334.0, 228.0),
    ] {
        lines.push_str(&format!(
            "{{\"timestamp\":\"{t}\",\"transformer_id\":\"TX-1C\",\"species\":\"H2\",\"kind\":\"concentration\",\"value\":{conc}}}\n"
        ));
        lines.push_str(&format!(
            "{{\"timestamp\":\"{t}\",\"transformer_id\":\"TX-1C\",\"species\":\"H2\",\"kind\":\"trend\",\"value\":{trend}}}\n"
        ));
    }
    std::fs::write(&path, lines).unwrap();
    let output = bin()
        .arg("analyze")
        .arg(&path)
        .args(["--format", "ndjson"])
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    assert!(stdout(&output).contains("3 events"));
}

#[cfg(unix)]
#[test]
fn closed_stdout_pipe_does_not_panic() {
    use std::io::Read;
    use std::os::unix::process::ExitStatusExt;

    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let mut child = bin()
        .arg("analyze")
        .arg(&input)
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // Read one byte, then close the pipe mid-output.
    let mut out = child.stdout.take().unwrap();
    let mut byte = [0u8; 1];
    let _ = out.read(&mut byte);
    drop(out);
    let status = child.wait().unwrap();
    let mut err = String::new();
    child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    assert!(!err.contains("panicked"), "{err}");
    // Either it finished before the close or it died on SIGPIPE.
    assert!(
        status.code() == Some(1) || status.signal() == Some(libc::SIGPIPE),
        "{status:?}"
    );
}

#[test]
fn quiet_suppresses_informational_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "ramp-failure", 3);
    let output = bin()
        .arg("analyze")
        .arg(&input)
        .arg("--quiet")
        .arg("--store")
        .arg(dir.path().join("events.ndjson"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(stdout(&output).is_empty());
}
