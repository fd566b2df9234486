//! Bob measures the test register and resends his best guess. The pass rate
//! stays under 1/4 + 3/(4n(2^k - 1)).
//!
//!     cargo run --example recovery_attack [trials]

use qmine::harness::{default_battery, recovery_bound, run_experiment, RunOptions};

fn main() -> qmine::Result<()> {
    let trials: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4000);
    for spec in default_battery().into_iter().filter(|s| s.name.starts_with("recovery-")) {
        let (n, k) = (spec.params.n, spec.params.k);
        let spec = qmine::harness::ExperimentSpec { trials, ..spec };
        let r = run_experiment(&spec, &RunOptions::default())?;
        let p = &r.metrics["pass"];
        println!(
            "{:<30} pass {:.4} [{:.4}, {:.4}]  bound {:.4}",
            r.name,
            p.estimate,
            p.ci_lo,
            p.ci_hi,
            recovery_bound(n, k)
        );
    }
    Ok(())
}
