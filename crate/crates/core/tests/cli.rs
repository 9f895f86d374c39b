use std::path::Path;
use std::process::{Command, Output};

fn timeloc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timeloc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TLS_PROFILE_STORE")
        .output()
        .expect("spawn timeloc")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

#[test]
fn scenario_files_parse() {
    for name in ["simple.toml", "mixture.toml", "relocation.toml"] {
        let text = std::fs::read_to_string(scenario(name)).unwrap();
        timeloc::simulator::ScenarioSpec::from_toml(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn simulate_writes_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = timeloc(&["simulate", "--scenario", &scenario("simple.toml"), "--days", "2", "--seed", "7", "--out", "d"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace.jsonl", "accel.jsonl", "ground_truth.csv"] {
        assert!(dir.path().join("d").join(f).exists(), "{f}");
    }
    let gt = std::fs::read_to_string(dir.path().join("d/ground_truth.csv")).unwrap();
    assert!(gt.starts_with("day_id,arrival_ts,door_ts,mode\n"));
    assert_eq!(gt.lines().count(), 3);
}

#[test]
fn same_seed_same_bytes_different_seed_different_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |seed: &str, out: &str| {
        assert!(timeloc(&["simulate", "--scenario", "mixture", "--days", "3", "--seed", seed, "--out", out], dir.path()).status.success())
    };
    sim("4", "a");
    sim("4", "b");
    sim("5", "c");
    let read = |d: &str| std::fs::read(dir.path().join(d).join("trace.jsonl")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn short_dataset_fails_evaluation_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert!(timeloc(&["simulate", "--scenario", "simple", "--days", "6", "--out", "d"], dir.path()).status.success());
    let out = timeloc(&["evaluate", "--method", "tls", "--traces", "d", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("evaluation needs more than 7"));
    assert!(!dir.path().join("r").exists());
}

#[test]
fn usage_errors_exit_2_with_help() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["frobnicate"][..], &["evaluate", "--method", "tls"], &["simulate", "--nope"], &[]] {
        let out = timeloc(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"), "{args:?}");
    }
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = timeloc(&["mine-home", "--traces", "missing"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(dir.path().join("bad.toml"), "window_days = 0\n").unwrap();
    let out = timeloc(&["--config", "bad.toml", "simulate", "--scenario", "simple", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn profile_store_from_env_config_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    assert!(timeloc(&["simulate", "--scenario", "simple", "--days", "8", "--out", "d"], cwd).status.success());
    let run = |args: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_timeloc"));
        c.args(args).current_dir(cwd).env_remove("TLS_PROFILE_STORE");
        if let Some(v) = env {
            c.env("TLS_PROFILE_STORE", v);
        }
        c.output().unwrap()
    };
    assert!(run(&["build-profile", "--traces", "d"], Some("from_env")).status.success());
    assert!(cwd.join("from_env/device0.profile.json").exists());
    std::fs::write(cwd.join("run.toml"), "profile_store = \"from_config\"\ndevice_id = \"phone\"\n").unwrap();
    assert!(run(&["--config", "run.toml", "build-profile", "--traces", "d"], Some("from_env")).status.success());
    assert!(cwd.join("from_config/phone.profile.json").exists());
    assert!(run(&["--config", "run.toml", "build-profile", "--traces", "d", "--store", "from_flag"], None).status.success());
    assert!(cwd.join("from_flag/phone.profile.json").exists());

    let out = run(&["predict", "--store", "from_flag", "--device", "phone", "--bssid", "0a:01:52:00:00:05", "--tdr", "60"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("method,tl_seconds,source,probes\ntls,"));
    assert!(text.trim_end().ends_with(",2"));
}

#[test]
fn mine_home_prints_tally_and_winner() {
    let dir = tempfile::tempdir().unwrap();
    assert!(timeloc(&["simulate", "--scenario", "simple", "--days", "3", "--out", "d"], dir.path()).status.success());
    let out = timeloc(&["mine-home", "--traces", "d"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("bssid,votes\n"));
    assert!(text.contains("winner,5c:63:bf:10:20:01,1.0000"));
}

#[test]
fn fsm_run_and_detect_door_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    assert!(timeloc(&["fsm-run", "--scenario", &scenario("simple.toml"), "--seed", "3", "--out", "f"], cwd).status.success());
    let stats = std::fs::read_to_string(cwd.join("f/stats.csv")).unwrap();
    assert!(stats.starts_with("wifi_scans,gps_reads,accel_samples,wakeups\n"));
    assert!(timeloc(&["simulate", "--scenario", "simple", "--days", "2", "--out", "d"], cwd).status.success());
    assert!(timeloc(&["detect-door", "--traces", "d", "--out", "r"], cwd).status.success());
    let door = std::fs::read_to_string(cwd.join("r/door_events.csv")).unwrap();
    assert!(door.starts_with("ts,cond1,cond2,cond3\n"));
}
