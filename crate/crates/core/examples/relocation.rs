//! Moves the user to a new home mid-dataset and shows the nightly update
//! switching the profile's home AP.
//!
//! cargo run --example relocation -- [move_day] [seed]

use timeloc::simulator::{synth_dataset, ScenarioSpec};
use timeloc::time_map::{LegOptions, ProfileBuilder};

fn main() -> timeloc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let move_day: u32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let scenario = ScenarioSpec::simple_walk(move_day + 8).with_relocation(move_day);
    let (traces, _) = synth_dataset(&scenario, seed)?;
    let mut builder = ProfileBuilder::new(LegOptions::with_threshold(Some(-70)), 7);
    for (i, t) in traces.into_iter().enumerate() {
        builder.push(t)?;
        if let Some(p) = builder.profile() {
            let marker = if i as u32 == move_day { "  <- moved" } else { "" };
            println!("day {i:>2} {}  home {}  fallback {}{marker}", p.built_at, p.home_bssid, p.fallback.len());
        }
    }
    Ok(())
}
