//! Runs the sensing state machine over one simulated commute day and compares
//! its sensor use with scanning every five seconds.
//!
//! cargo run --example fsm_duty_cycle -- [seed]

use chrono::DateTime;
use timeloc::fsm::{fixed_cadence_scans, run_fsm_day};
use timeloc::simulator::ScenarioSpec;

fn main() -> timeloc::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let plan = ScenarioSpec::simple_walk(1).plan_day(0, seed)?;
    let run = run_fsm_day(&plan, seed);
    for (state, at) in &run.transitions {
        let t = DateTime::from_timestamp(*at, 0).expect("in range");
        println!("{}  {state:?}", t.format("%m-%d %H:%M:%S"));
    }
    let baseline = fixed_cadence_scans(&plan, 5);
    let s = run.stats;
    println!("wifi scans {} ({:.1}% of {baseline} at a fixed 5 s cadence)", s.wifi_scans, 100.0 * s.wifi_scans as f64 / baseline as f64);
    println!("gps reads {}, accel samples {}, wakeups {}", s.gps_reads, s.accel_samples, s.wakeups);
    println!("true arrival {}, door {}", plan.arrival_ts(), plan.door_ts());
    Ok(())
}
