//! Generates a synthetic dataset and writes it in the trace file formats.
//!
//! cargo run --example simulate_dataset -- <out_dir> [simple|mixture|relocation] [days] [seed]

use std::path::PathBuf;

use timeloc::cli::write_dataset;
use timeloc::simulator::{synth_dataset, ScenarioSpec};

fn main() -> timeloc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(1).map(String::as_str).unwrap_or("dataset"));
    let days: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(14);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(7);
    let scenario = match args.get(2).map(String::as_str).unwrap_or("simple") {
        "mixture" => ScenarioSpec::walk_cycle_mixture(days),
        "relocation" => ScenarioSpec::simple_walk(days).with_relocation(days / 2),
        _ => ScenarioSpec::simple_walk(days),
    };
    let (traces, truth) = synth_dataset(&scenario, seed)?;
    write_dataset(&out, &traces, &truth)?;
    let scans: usize = traces.iter().map(|t| t.scans.len()).sum();
    println!("{} days, {scans} scans -> {}", traces.len(), out.display());
    for g in truth.iter().take(5) {
        println!("  {} {} arrival {} door {}", g.day_id, g.mode.name, g.arrival_ts, g.door_ts);
    }
    println!("scenario as TOML:\n{}", scenario.to_toml()?);
    Ok(())
}
