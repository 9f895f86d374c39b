//! Door-opening detection on simulated days with a planted door event.
//!
//! cargo run --release --example detect_door -- [days] [seed]

use timeloc::door::{detect_door_events, DoorParams};
use timeloc::simulator::{synth_dataset, ScenarioSpec};

fn main() -> timeloc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let days: u32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let scenario = ScenarioSpec::simple_walk(days);
    let (traces, truth) = synth_dataset(&scenario, seed)?;
    let home = scenario.route.home_bssid;
    let params = DoorParams::default();
    let (mut hits, mut false_pos) = (0, 0);
    for (t, g) in traces.iter().zip(&truth) {
        let events = detect_door_events(t, &home, &params)?;
        let hit = events.iter().any(|e| (e.ts - g.door_ts).abs() <= 10);
        let fp = events.iter().filter(|e| (e.ts - g.door_ts).abs() > 10).count();
        hits += usize::from(hit);
        false_pos += fp;
        let offsets: Vec<i64> = events.iter().map(|e| e.ts - g.door_ts).collect();
        println!("{} door {} detected {:?}", g.day_id, g.door_ts, offsets);
    }
    println!("recall {:.3}  false positives/day {:.3}", hits as f64 / traces.len() as f64, false_pos as f64 / traces.len() as f64);
    Ok(())
}
