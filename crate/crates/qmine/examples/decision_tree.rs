//! Decision tree over labeled records, grown from support queries on the
//! records with the label appended as an extra item.
//!
//!     cargo run --example decision_tree

use qmine::mining::{decision_tree, DecisionNode, SupportOracle};
use qmine::oracles::Database;
use qmine::protocol::{ProtocolParams, StrategyKind};

fn print(node: &DecisionNode, depth: usize) {
    let pad = "  ".repeat(depth);
    match node {
        DecisionNode::Leaf { label } => println!("{pad}-> {}", u8::from(*label)),
        DecisionNode::Split { attribute, zero, one, .. } => {
            println!("{pad}item {attribute} = 0");
            print(zero, depth + 1);
            println!("{pad}item {attribute} = 1");
            print(one, depth + 1);
        }
    }
}

fn main() -> qmine::Result<()> {
    // label = a0 AND (a1 OR a2), a3 is noise
    let rows: Vec<String> = (0..16u32)
        .map(|r| {
            let bits = format!("{r:04b}");
            let b: Vec<bool> = bits.chars().map(|c| c == '1').collect();
            format!("{bits} {}", u8::from(b[0] && (b[1] || b[2])))
        })
        .collect();
    let db = Database::parse(&rows.join("\n"))?;

    let exact = SupportOracle::exact(db.clone()).labeled()?;
    let tree = decision_tree(&exact, 0.2)?;
    println!("exact supports, {} queries, depth {}", exact.queries(), tree.depth());
    print(&tree, 1);

    let params = ProtocolParams::new(db.n(), db.k() + 1, 8, 9);
    let proto = SupportOracle::protocol(db.clone(), params, StrategyKind::Trivial).labeled()?;
    let tree2 = decision_tree(&proto, 0.2)?;
    let agree = db.transactions().iter().filter(|r| tree.predict(r) == tree2.predict(r)).count();
    println!("protocol supports, {} queries, depth {}, agrees on {agree}/{} records", proto.queries(), tree2.depth(), db.len());
    print(&tree2, 1);
    Ok(())
}
