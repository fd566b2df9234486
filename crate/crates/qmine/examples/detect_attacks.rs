//! Detection rates of Bob's measurement and copying attacks, and of the
//! attack where he answers with a fixed basis state.
//!
//!     cargo run --example detect_attacks [trials]

use qmine::harness::{default_battery, run_experiment, RunOptions};

fn main() -> qmine::Result<()> {
    let trials: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let names = [
        "honest-test1",
        "honest-test2",
        "attack2-data",
        "attack2-joint",
        "attack3-full-copy",
        "attack3-data-copy",
        "attack1-mu",
        "attack1-outside",
    ];
    for spec in default_battery().into_iter().filter(|s| names.contains(&s.name.as_str())) {
        let spec = qmine::harness::ExperimentSpec { trials, ..spec };
        let r = run_experiment(&spec, &RunOptions::default())?;
        let d = &r.metrics["detection"];
        println!("{:<20} detection {:.4} [{:.4}, {:.4}]", r.name, d.estimate, d.ci_lo, d.ci_hi);
    }
    Ok(())
}
