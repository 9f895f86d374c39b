//! TLS against the nearest-neighbor baseline on the simple and mixture
//! scenarios.
//!
//! cargo run --release --example evaluate_tls_vs_nn -- [days] [seed]

use timeloc::eval::{evaluate, Dataset, NnPredictor, RssiLevel, TlsPredictor};
use timeloc::simulator::{synth_dataset, ScenarioSpec};

fn main() -> timeloc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let days: u32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let level = RssiLevel::Dbm(-70);
    for scenario in [ScenarioSpec::simple_walk(days), ScenarioSpec::walk_cycle_mixture(days)] {
        let (traces, truth) = synth_dataset(&scenario, seed)?;
        let data = Dataset::new(traces, truth);
        let tls = evaluate(&mut TlsPredictor::new(level, 7), &data, level)?;
        let nn = evaluate(&mut NnPredictor::new(level, 7, seed), &data, level)?;
        println!("detour_prob {}", scenario.detour_prob);
        for r in [&tls, &nn] {
            println!(
                "  {:<3} n={:<5} median={:>6.1}s within100={:.3} early={:.3} max={:>6.0}s probes={:.1} unanswered={}",
                r.method, r.n, r.median_abs_s, r.pct_within_100s, r.early_fraction, r.max_abs_s, r.probe_cost, r.unanswered
            );
        }
    }
    Ok(())
}
