//! A cheating Alice tests in every loop with the pair (μ, 11), μ fixed per
//! control qubit, and majority-votes the f_i(μ) each test reveals. Against
//! the trivial strategy every vote equals f(μ). A confusing strategy mixes
//! other functions into the same control blocks, so the votes stop tracking f.
//!
//!     cargo run --example bob_privacy

use qmine::adversary::FloodAlice;
use qmine::oracles::{Database, Predicate};
use qmine::protocol::{make_strategy, run_main, HonestBob, ProtocolParams, Strategy, StrategyKind};
use qmine::rng::stream;

fn main() -> qmine::Result<()> {
    let db = Database::from_strs(&["11", "01", "10", "00"])?;
    let f = Predicate::contains("01".parse()?);
    let t = 5;
    let mus = vec![0b00, 0b01, 0b10, 0b00, 0b01];
    for kind in [StrategyKind::Trivial, StrategyKind::OneConfusing, StrategyKind::TwoConfusing] {
        let mut matched = 0;
        let mut total = 0;
        for seed in 0..20u64 {
            let s = match kind {
                StrategyKind::Trivial => Strategy::trivial(f.clone(), t),
                _ => make_strategy(&f, kind, t, 2, &mut stream(seed, &[1]))?,
            };
            let mut alice = FloodAlice::new(mus.clone(), 2)?;
            run_main(&db, &s, &mut alice, &mut HonestBob::new(), &ProtocolParams::new(2, 2, t, seed))?;
            for (j, mu) in mus.iter().enumerate() {
                if let Some(v) = alice.recovered(j) {
                    total += 1;
                    matched += usize::from(v == f.on(*mu));
                }
            }
        }
        println!("{kind:?}: votes equal to f(μ) on {matched}/{total} probed qubits");
    }
    Ok(())
}
