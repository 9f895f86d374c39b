//! Command-line front end. Every subcommand reads files, runs one library
//! operation and writes its results under `--out` or the profile store.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::door::{detect_door_events, DoorParams};
use crate::error::{Error, Result};
use crate::eval::{evaluate, sweep_rssi_filter, write_cdf_csv, write_report_csv, Dataset, NnPredictor, RssiLevel, TlsPredictor};
use crate::fsm::run_fsm_day;
use crate::home::vote_home_ap;
use crate::nn::{filter_env, nn_predict};
use crate::simulator::{read_ground_truth, synth_dataset, write_ground_truth, ScenarioSpec};
use crate::time_map::{LegOptions, ProfileBuilder, ProfileStore, DEFAULT_WINDOW_DAYS};
use crate::trace::{parse_accel_file, parse_trace_file, slice_into_days, write_accel_file, write_trace_file, Bssid, DayTrace, ScanRecord};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const ACCEL_FILE: &str = "accel.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const STORE_ENV: &str = "TLS_PROFILE_STORE";
pub const DEFAULT_STORE: &str = "profiles";
pub const DEFAULT_DEVICE: &str = "device0";
pub const DEFAULT_RSSI_DBM: i32 = -70;

/// Settings shared by the subcommands. Loaded from `--config`, then
/// overridden by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario_path: Option<PathBuf>,
    pub seed: u64,
    pub profile_store: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub rssi_threshold_dbm: i32,
    pub window_days: usize,
    pub device_id: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario_path: None,
            seed: 0,
            profile_store: std::env::var_os(STORE_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_STORE.into()),
            output_dir: None,
            rssi_threshold_dbm: DEFAULT_RSSI_DBM,
            window_days: DEFAULT_WINDOW_DAYS,
            device_id: DEFAULT_DEVICE.into(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_days < 1 {
            return Err(Error::Config("window_days must be at least 1".into()));
        }
        Ok(())
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(s) = &o.store {
            self.profile_store = s.clone();
        }
        if let Some(d) = &o.out {
            self.output_dir = Some(d.clone());
        }
        if let Some(r) = o.rssi {
            self.rssi_threshold_dbm = r;
        }
        if let Some(w) = o.window {
            self.window_days = w;
        }
        if let Some(d) = &o.device {
            self.device_id = d.clone();
        }
    }

    fn output_dir(&self) -> Result<&Path> {
        self.output_dir.as_deref().ok_or_else(|| Error::Config("no output directory; pass --out".into()))
    }

    fn store(&self) -> ProfileStore {
        ProfileStore::new(&self.profile_store)
    }
}

#[derive(Clone, Debug, Default, Args)]
struct Overrides {
    /// Master seed [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Profile store directory [default: $TLS_PROFILE_STORE or ./profiles]
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RSSI filter threshold in dBm, inclusive [default: -70]
    #[arg(long, global = true, allow_hyphen_values = true)]
    rssi: Option<i32>,
    /// Sliding window length in days [default: 7]
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Device id naming the stored profile [default: device0]
    #[arg(long, global = true)]
    device: Option<String>,
}

#[derive(Debug, Parser)]
#[command(name = "timeloc", version, about = "Time-to-home prediction from WiFi scan traces")]
struct Cli {
    /// TOML run configuration; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Tls,
    Nn,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset: trace.jsonl, accel.jsonl, ground_truth.csv
    Simulate {
        /// Scenario TOML file, or the built-in name "simple" or "mixture"
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Override the scenario's day count
        #[arg(long)]
        days: Option<u32>,
    },
    /// Vote the home AP from nightly dwell; prints the tally and winner as CSV
    MineHome {
        #[arg(long)]
        traces: PathBuf,
    },
    /// Fold a dataset into the device's stored profile
    BuildProfile {
        #[arg(long)]
        traces: PathBuf,
    },
    /// Predict seconds to home from one lost AP (tls) or one scan (nn)
    Predict {
        #[arg(long, value_enum, default_value = "tls")]
        method: Method,
        /// Lost BSSID (tls)
        #[arg(long)]
        bssid: Option<Bssid>,
        /// Observed seconds the BSSID was in range (tls)
        #[arg(long, allow_hyphen_values = true)]
        tdr: Option<i64>,
        /// Scan record in trace JSONL form (nn)
        #[arg(long)]
        scan: Option<String>,
        /// History traces (nn)
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Door-opening events as CSV ts,cond1,cond2,cond3
    DetectDoor {
        #[arg(long)]
        traces: PathBuf,
        /// Home BSSID; mined from the traces when omitted
        #[arg(long)]
        home: Option<Bssid>,
    },
    /// Run the sensing state machine over one simulated day
    FsmRun {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Day index within the scenario
        #[arg(long, default_value_t = 0)]
        day: u32,
    },
    /// Evaluate one method on a dataset; writes report.csv and cdf_<method>.csv
    Evaluate {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        traces: PathBuf,
    },
    /// Evaluate both methods at several RSSI levels; writes sweep.csv
    Sweep {
        #[arg(long)]
        traces: PathBuf,
        /// Comma-separated levels, "all" or dBm [default: all,-70]
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        levels: Option<Vec<RssiLevel>>,
    },
}

/// Runs the CLI on `args` (program name first) and returns the exit code:
/// 0 on success, 1 on a validation or runtime error, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main_from_args() -> i32 {
    run(std::env::args_os())
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_toml(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cli.overrides);
    cfg.validate()?;
    match cli.command {
        Command::Simulate { scenario, days } => simulate(&cfg, scenario, days),
        Command::MineHome { traces } => mine_home(&cfg, &traces),
        Command::BuildProfile { traces } => build_profile(&cfg, &traces),
        Command::Predict { method, bssid, tdr, scan, traces } => predict(&cfg, method, bssid, tdr, scan, traces),
        Command::DetectDoor { traces, home } => detect_door(&cfg, &traces, home),
        Command::FsmRun { scenario, day } => fsm_run(&cfg, scenario, day),
        Command::Evaluate { method, traces } => run_evaluate(&cfg, method, &traces),
        Command::Sweep { traces, levels } => sweep(&cfg, &traces, levels),
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    if !path.exists() {
        match path.to_str() {
            Some("simple") => return Ok(ScenarioSpec::simple_walk(30)),
            Some("mixture") => return Ok(ScenarioSpec::walk_cycle_mixture(120)),
            _ => {}
        }
    }
    ScenarioSpec::from_toml(&fs::read_to_string(path)?)
}

fn scenario_of(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<ScenarioSpec> {
    let path = flag.or_else(|| cfg.scenario_path.clone()).ok_or_else(|| Error::Config("no scenario; pass --scenario".into()))?;
    load_scenario(&path)
}

/// Reads `trace.jsonl` and, when present, `accel.jsonl` from `dir`.
pub fn load_traces(dir: &Path) -> Result<Vec<DayTrace>> {
    let scans = parse_trace_file(BufReader::new(File::open(dir.join(TRACE_FILE))?))?;
    let accel_path = dir.join(ACCEL_FILE);
    let accel = if accel_path.exists() { parse_accel_file(BufReader::new(File::open(accel_path)?))? } else { Vec::new() };
    slice_into_days(scans, accel)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let truth = read_ground_truth(File::open(dir.join(GROUND_TRUTH_FILE))?)?;
    Ok(Dataset::new(load_traces(dir)?, truth))
}

pub fn write_dataset(dir: &Path, traces: &[DayTrace], truth: &[crate::simulator::GroundTruth]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_traces(dir, traces)?;
    let mut w = BufWriter::new(File::create(dir.join(GROUND_TRUTH_FILE))?);
    write_ground_truth(&mut w, truth)?;
    w.flush()?;
    Ok(())
}

fn write_traces(dir: &Path, traces: &[DayTrace]) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(TRACE_FILE))?);
    write_trace_file(&mut w, traces.iter().flat_map(|t| &t.scans))?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join(ACCEL_FILE))?);
    write_accel_file(&mut w, traces.iter().flat_map(|t| &t.accel))?;
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn simulate(cfg: &RunConfig, scenario: Option<PathBuf>, days: Option<u32>) -> Result<()> {
    let mut spec = scenario_of(cfg, scenario)?;
    if let Some(d) = days {
        spec.n_days = d;
    }
    let (traces, truth) = synth_dataset(&spec, cfg.seed)?;
    let out = cfg.output_dir()?;
    write_dataset(out, &traces, &truth)?;
    println!("wrote {} day(s) to {}", traces.len(), out.display());
    Ok(())
}

fn mine_home(cfg: &RunConfig, traces: &Path) -> Result<()> {
    let vote = vote_home_ap(&load_traces(traces)?)?;
    let mut text = String::from("bssid,votes\n");
    for (b, v) in &vote.tally {
        text.push_str(&format!("{b},{v}\n"));
    }
    text.push_str(&format!("winner,{},{:.4}\n", vote.winner, vote.confidence));
    match &cfg.output_dir {
        Some(dir) => create(dir, "home_vote.csv")?.write_all(text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn build_profile(cfg: &RunConfig, traces: &Path) -> Result<()> {
    let days = load_traces(traces)?;
    let mut builder = ProfileBuilder::new(LegOptions::with_threshold(Some(cfg.rssi_threshold_dbm)), cfg.window_days);
    for d in days {
        builder.push(d)?;
    }
    let profile = builder.into_profile().ok_or(Error::NoNightData)?;
    let path = cfg.store().save(&cfg.device_id, &profile)?;
    println!("home {} built_at {} -> {}", profile.home_bssid, profile.built_at, path.display());
    Ok(())
}

fn predict(
    cfg: &RunConfig,
    method: Method,
    bssid: Option<Bssid>,
    tdr: Option<i64>,
    scan: Option<String>,
    traces: Option<PathBuf>,
) -> Result<()> {
    let profile = cfg.store().load(&cfg.device_id)?;
    let line = match method {
        Method::Tls => {
            let bssid = bssid.ok_or_else(|| Error::Config("tls prediction needs --bssid".into()))?;
            let p = profile.predict(&bssid, tdr.unwrap_or(0))?;
            let source = match p.source {
                crate::time_map::PredictionSource::Window(d) => d.to_string(),
                crate::time_map::PredictionSource::Fallback => "fallback".into(),
            };
            format!("tls,{},{},{}", p.tl_seconds, source, p.lookups)
        }
        Method::Nn => {
            let text = scan.ok_or_else(|| Error::Config("nn prediction needs --scan".into()))?;
            let record: ScanRecord = parse_trace_file(text.as_bytes())?
                .pop()
                .ok_or_else(|| Error::Config("--scan holds no record".into()))?;
            let dir = traces.ok_or_else(|| Error::Config("nn prediction needs --traces".into()))?;
            let days = load_traces(&dir)?;
            let recent = &days[days.len().saturating_sub(cfg.window_days)..];
            let history = crate::nn::history_from_traces(recent, &profile.home_bssid, cfg.rssi_threshold_dbm);
            let p = nn_predict(&history, &filter_env(&record, cfg.rssi_threshold_dbm), cfg.seed)?;
            format!("nn,{},history,{}", p.tl_seconds, p.comparisons)
        }
    };
    println!("method,tl_seconds,source,probes\n{line}");
    Ok(())
}

fn detect_door(cfg: &RunConfig, traces: &Path, home: Option<Bssid>) -> Result<()> {
    let days = load_traces(traces)?;
    let home = match home {
        Some(h) => h,
        None => vote_home_ap(&days)?.winner,
    };
    let params = DoorParams::default();
    let mut w = create(cfg.output_dir()?, "door_events.csv")?;
    writeln!(w, "ts,cond1,cond2,cond3")?;
    for d in &days {
        for e in detect_door_events(d, &home, &params)? {
            let c = e.conditions_met;
            writeln!(w, "{},{},{},{}", e.ts, c.home_visible, c.fluctuating_while_standing, c.count_peak)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fsm_run(cfg: &RunConfig, scenario: Option<PathBuf>, day: u32) -> Result<()> {
    let spec = scenario_of(cfg, scenario)?;
    if day >= spec.n_days {
        return Err(Error::Config(format!("day {day} is outside the scenario's {} day(s)", spec.n_days)));
    }
    let plan = spec.plan_day(day, cfg.seed)?;
    let run = run_fsm_day(&plan, cfg.seed);
    let out = cfg.output_dir()?;
    fs::create_dir_all(out)?;
    write_traces(out, std::slice::from_ref(&run.trace))?;
    let mut w = create(out, "stats.csv")?;
    let s = run.stats;
    writeln!(w, "wifi_scans,gps_reads,accel_samples,wakeups\n{},{},{},{}", s.wifi_scans, s.gps_reads, s.accel_samples, s.wakeups)?;
    w.flush()?;
    Ok(())
}

fn run_evaluate(cfg: &RunConfig, method: Method, traces: &Path) -> Result<()> {
    let data = load_dataset(traces)?;
    let level = RssiLevel::Dbm(cfg.rssi_threshold_dbm);
    let report = match method {
        Method::Tls => evaluate(&mut TlsPredictor::new(level, cfg.window_days), &data, level)?,
        Method::Nn => evaluate(&mut NnPredictor::new(level, cfg.window_days, cfg.seed), &data, level)?,
    };
    let out = cfg.output_dir()?;
    let mut w = create(out, "report.csv")?;
    write_report_csv(&mut w, [&report])?;
    w.flush()?;
    let mut w = create(out, &format!("cdf_{}.csv", report.method.to_lowercase()))?;
    write_cdf_csv(&mut w, &report)?;
    w.flush()?;
    Ok(())
}

fn sweep(cfg: &RunConfig, traces: &Path, levels: Option<Vec<RssiLevel>>) -> Result<()> {
    let data = load_dataset(traces)?;
    let levels = levels.unwrap_or_else(|| vec![RssiLevel::All, RssiLevel::Dbm(DEFAULT_RSSI_DBM)]);
    let rows = sweep_rssi_filter(&data, &levels, cfg.window_days, cfg.seed)?;
    let mut w = create(cfg.output_dir()?, "sweep.csv")?;
    write_report_csv(&mut w, rows.iter().flat_map(|r| [&r.tls, &r.nn]))?;
    w.flush()?;
    Ok(())
}
