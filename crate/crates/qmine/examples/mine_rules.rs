//! Association rules mined once with exact supports and once with every
//! support answered by a protocol run.
//!
//!     cargo run --example mine_rules

use qmine::mining::{association_rules, frequent_itemsets, SupportOracle};
use qmine::oracles::Database;
use qmine::protocol::{ProtocolParams, StrategyKind};

const S_MIN: f64 = 0.3;
const C_MIN: f64 = 0.7;

fn show(label: &str, oracle: &SupportOracle) -> qmine::Result<()> {
    let levels = frequent_itemsets(oracle, S_MIN)?;
    let rules = association_rules(&levels, oracle, C_MIN)?;
    println!("{label}: {} queries", oracle.queries());
    for fi in levels.iter().flatten() {
        println!("  frequent {} s = {:.3}", fi.itemset, fi.support);
    }
    for r in &rules {
        println!("  rule {} => {} s = {:.3} c = {:.3}", r.antecedent, r.consequent, r.support, r.confidence);
    }
    Ok(())
}

fn main() -> qmine::Result<()> {
    let db = Database::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/basket.txt").as_ref())?;
    show("exact", &SupportOracle::exact(db.clone()))?;
    let params = ProtocolParams::new(db.n(), db.k(), 8, 5);
    show("protocol", &SupportOracle::protocol(db, params, StrategyKind::Trivial))?;
    Ok(())
}
