//! Support of a few itemsets over the basket data, estimated by the protocol
//! with each strategy and compared with the exact value.
//!
//!     cargo run --example count_support

use qmine::oracles::Database;
use qmine::protocol::{estimate_support, ProtocolParams, StrategyKind};
use qmine::BitString;

fn main() -> qmine::Result<()> {
    let db = Database::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/basket.txt").as_ref())?;
    let t_eff = 7;
    println!("{:<6} {:<14} {:>6} {:>8} {:>6}", "items", "strategy", "exact", "estimate", "tests");
    for items in ["1000", "0100", "1100", "0110", "1111"] {
        let itemset: BitString = items.parse()?;
        let exact = qmine::mining::exact_support(&db, &itemset)?;
        for kind in [StrategyKind::Trivial, StrategyKind::OneConfusing, StrategyKind::TwoConfusing, StrategyKind::HbarTrap] {
            let params = ProtocolParams::new(db.n(), db.k(), t_eff + kind.hidden_qubits(), 2024);
            let est = estimate_support(&db, &itemset, &params, kind)?;
            println!(
                "{items:<6} {:<14} {exact:>6.3} {:>8.3} {:>6}",
                format!("{kind:?}"),
                est.s_combined,
                est.outcome.tests
            );
        }
    }
    Ok(())
}
