//! Runs the invariant suite, then again with the sign of G flipped to show
//! which checks notice.
//!
//!     cargo run --example verify_invariants

use qmine::harness::{invariant_suite, SuiteCaps};

fn main() -> qmine::Result<()> {
    let caps = SuiteCaps { n: 3, k: 3, t: 3 };
    let good = invariant_suite(caps, false)?;
    for c in &good.checks {
        println!("{} {} [{}] {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.params, c.detail);
    }
    let bad = invariant_suite(caps, true)?;
    let caught: Vec<&str> = bad.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    println!("with -G: {} checks fail: {:?}", caught.len(), caught);
    Ok(())
}
