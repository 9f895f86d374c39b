//! NN and TLS across RSSI filter levels on the mixture scenario.
//!
//! cargo run --release --example rssi_sweep -- [days] [seed]

use timeloc::eval::{sweep_rssi_filter, Dataset, RssiLevel};
use timeloc::simulator::{synth_dataset, ScenarioSpec};

fn main() -> timeloc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let days: u32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let (traces, truth) = synth_dataset(&ScenarioSpec::walk_cycle_mixture(days), seed)?;
    let levels = [RssiLevel::All, RssiLevel::Dbm(-80), RssiLevel::Dbm(-70), RssiLevel::Dbm(-60)];
    println!("level  nn_median  nn_probes  tls_median  tls_probes");
    for row in sweep_rssi_filter(&Dataset::new(traces, truth), &levels, 7, seed)? {
        println!(
            "{:<6} {:>9.1} {:>10.1} {:>11.1} {:>11.1}",
            row.level.to_string(),
            row.nn.median_abs_s,
            row.nn.probe_cost,
            row.tls.median_abs_s,
            row.tls.probe_cost
        );
    }
    Ok(())
}
