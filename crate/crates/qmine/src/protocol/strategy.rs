//! Bob's function schedules f_0..f_{T−1}.
//!
//! Write Q_g = G·U_D·U_g·U_D for one loop with function g. Then Q_h = G,
//! Q_h·Q_h = I, and a palindrome f₁..f_j h f_j..f₁ multiplies out to G, so a
//! palindrome followed by h is the identity. A control qubit's block of loops
//! is built from units that each net Q_f² or I, which lets Bob hide noise
//! functions in the schedule without changing what the measured control
//! qubits see.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{control_block, diffusion_g, u_d, u_f_phase, Database, Predicate};
use crate::qsim::{distance, RegisterLayout, Role, StateVector, STATE_TOL};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Trivial,
    OneConfusing,
    TwoConfusing,
    /// One trap qubit whose block is drawn from {h, h̄}.
    HbarTrap,
}

impl StrategyKind {
    /// Control qubits the kind removes from phase estimation.
    pub fn hidden_qubits(self) -> u32 {
        match self {
            StrategyKind::Trivial => 0,
            StrategyKind::OneConfusing | StrategyKind::HbarTrap => 1,
            StrategyKind::TwoConfusing => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub target: Predicate,
    pub t: u32,
    pub funcs: Vec<Predicate>,
    /// Control qubits whose block nets the identity.
    pub confusing: Vec<usize>,
    /// Control qubits whose block nets ±I and are checked in the X basis.
    pub traps: Vec<usize>,
}

impl Strategy {
    pub fn trivial(f: Predicate, t: u32) -> Self {
        Self {
            kind: StrategyKind::Trivial,
            funcs: vec![f.clone(); 1 << t],
            target: f,
            t,
            confusing: vec![],
            traps: vec![],
        }
    }

    pub fn total_loops(&self) -> usize {
        1 << self.t
    }

    pub fn is_hidden(&self, j: usize) -> bool {
        self.confusing.contains(&j) || self.traps.contains(&j)
    }

    /// Control qubits read by phase estimation, most significant first.
    pub fn measured_controls(&self) -> Vec<usize> {
        (0..self.t as usize).filter(|&j| !self.is_hidden(j)).collect()
    }

    pub fn effective_t(&self) -> usize {
        1 << self.measured_controls().len()
    }

    /// Q_f power that measured qubit `w`'s block must net.
    pub fn exponent(&self, w: usize) -> usize {
        let below = (w + 1..self.t as usize).filter(|&u| self.is_hidden(u)).count();
        1 << (self.t as usize - 1 - w - below)
    }

    pub fn block(&self, j: usize) -> &[Predicate] {
        let (start, len) = control_block(j, self.t);
        &self.funcs[start..start + len]
    }

    /// Expected X-basis outcome of a trap qubit: true for |−⟩.
    pub fn trap_sign(&self, j: usize) -> bool {
        self.block(j).iter().filter(|f| **f == Predicate::AllOne).count() % 2 == 1
    }

    /// Generated blocks for every control qubit except those in `overrides`.
    pub fn with_blocks(
        f: Predicate,
        t: u32,
        k: u32,
        kind: StrategyKind,
        confusing: Vec<usize>,
        traps: Vec<usize>,
        overrides: &[(usize, Vec<Predicate>)],
        rng: &mut Rng,
    ) -> Result<Self> {
        for &u in confusing.iter().chain(&traps) {
            if u + 1 >= t as usize {
                return Err(Error::InvalidParams(format!("hidden qubit {u} must be below t−1 = {}", t - 1)));
            }
        }
        let mut s = Self { kind, target: f.clone(), t, funcs: vec![f.clone(); 1 << t], confusing, traps };
        for j in 0..t as usize {
            let (start, len) = control_block(j, t);
            let block = if let Some((_, b)) = overrides.iter().find(|(q, _)| *q == j) {
                if b.len() != len {
                    return Err(Error::InvalidParams(format!("block for qubit {j} needs {len} functions")));
                }
                b.clone()
            } else if s.traps.contains(&j) {
                (0..len).map(|_| if rng.gen() { Predicate::AllOne } else { Predicate::AllZero }).collect()
            } else if s.confusing.contains(&j) {
                noise_block(len, k, rng)
            } else {
                measured_block(&f, len, s.exponent(j), k, rng)
            };
            s.funcs[start..start + len].clone_from_slice(&block);
        }
        if s.funcs[(1 << t) - 1] != f {
            return Err(Error::InvalidParams("the last loop must use the target function".into()));
        }
        Ok(s)
    }
}

fn random_table(k: u32, rng: &mut Rng) -> Predicate {
    Predicate::Table { values: (0..1u64 << k).map(|_| rng.gen()).collect() }
}

/// `len` (even) loops netting the identity, built from h,h / a,h,a,h /
/// a,b,h,b,a,h units with random noise functions a, b.
pub fn noise_block(len: usize, k: u32, rng: &mut Rng) -> Vec<Predicate> {
    noise_units(len, k, rng).concat()
}

fn noise_units(len: usize, k: u32, rng: &mut Rng) -> Vec<Vec<Predicate>> {
    assert!(len.is_multiple_of(2));
    let h = Predicate::AllZero;
    let mut units = Vec::new();
    let mut room = len;
    while room > 0 {
        let options: Vec<usize> = [2, 4, 6].into_iter().filter(|&u| u <= room).collect();
        let size = *options.choose(rng).expect("room is even and positive");
        units.push(match size {
            2 => vec![h.clone(), h.clone()],
            4 => {
                let a = random_table(k, rng);
                vec![a.clone(), h.clone(), a, h.clone()]
            }
            _ => {
                let a = random_table(k, rng);
                let b = random_table(k, rng);
                vec![a.clone(), b.clone(), h.clone(), b, a, h.clone()]
            }
        });
        room -= size;
    }
    units
}

fn measured_block(f: &Predicate, len: usize, e: usize, k: u32, rng: &mut Rng) -> Vec<Predicate> {
    if e == len {
        return vec![f.clone(); len];
    }
    // e is even whenever a hidden qubit sits below, so f,f pairs suffice
    let mut units: Vec<Vec<Predicate>> = (0..e / 2).map(|_| vec![f.clone(), f.clone()]).collect();
    units.extend(noise_units(len - e, k, rng));
    units.shuffle(rng);
    units.concat()
}

/// Draws a strategy of the given kind; hidden qubits are chosen uniformly
/// below t−1.
pub fn make_strategy(f: &Predicate, kind: StrategyKind, t: u32, k: u32, rng: &mut Rng) -> Result<Strategy> {
    let need = kind.hidden_qubits() + 1;
    if t < need {
        return Err(Error::InvalidParams(format!("{kind:?} needs t >= {need}, got {t}")));
    }
    let mut pool: Vec<usize> = (0..t as usize - 1).collect();
    pool.shuffle(rng);
    let mut hidden: Vec<usize> = pool.into_iter().take(kind.hidden_qubits() as usize).collect();
    hidden.sort_unstable();
    let (confusing, traps) = match kind {
        StrategyKind::HbarTrap => (vec![], hidden),
        _ => (hidden, vec![]),
    };
    if kind == StrategyKind::Trivial {
        return Ok(Strategy::trivial(f.clone(), t));
    }
    Strategy::with_blocks(f.clone(), t, k, kind, confusing, traps, &[], rng)
}

/// Applies Q_{g} = G·U_D(y)·U_g·U_D(y) for each g in order, with `g_apply`
/// standing in for G.
pub fn apply_block(
    funcs: &[Predicate],
    db: &Database,
    y: u64,
    state: &mut StateVector,
    layout: &RegisterLayout,
    g_apply: &dyn Fn(&mut StateVector, &RegisterLayout) -> Result<()>,
) -> Result<()> {
    let ud = u_d(db, y);
    for f in funcs {
        ud.apply(state, layout)?;
        u_f_phase(f, db.n(), db.k()).apply(state, layout, 0)?;
        ud.apply(state, layout)?;
        g_apply(state, layout)?;
    }
    Ok(())
}

/// Checks every control qubit's block against its required net operator:
/// Q_f^{exponent} for measured qubits, I for confusing qubits, ±I for traps.
pub fn verify_strategy(s: &Strategy, db: &Database, y: u64) -> Result<()> {
    let n = db.n();
    verify_strategy_with(s, db, y, &move |st, l| diffusion_g(n).apply(st, l, 0))
}

/// As [`verify_strategy`] with a replacement for G on the left-hand side; the
/// reference side always uses the true G.
pub fn verify_strategy_with(
    s: &Strategy,
    db: &Database,
    y: u64,
    g_apply: &dyn Fn(&mut StateVector, &RegisterLayout) -> Result<()>,
) -> Result<()> {
    let (n, k) = (db.n() as usize, db.k() as usize);
    let layout = RegisterLayout::from_widths(&[(Role::Address, n), (Role::Data, k)]);
    let inputs: Vec<StateVector> = if n + k <= 6 {
        (0..1usize << (n + k)).map(|i| StateVector::basis(n + k, i)).collect()
    } else {
        let mut rng = crate::rng::stream(y, &[crate::rng::TAG_STRATEGY]);
        (0..4).map(|_| StateVector::random(n + k, &mut rng)).collect()
    };
    let g_true = |st: &mut StateVector, l: &RegisterLayout| diffusion_g(n as u32).apply(st, l, 0);
    for j in 0..s.t as usize {
        let block = s.block(j);
        for input in &inputs {
            let mut lhs = input.clone();
            apply_block(block, db, y, &mut lhs, &layout, g_apply)?;
            let mut rhs = input.clone();
            if s.traps.contains(&j) {
                if s.trap_sign(j) {
                    rhs.amps_mut().iter_mut().for_each(|a| *a = -*a);
                }
            } else if !s.confusing.contains(&j) {
                let reps = vec![s.target.clone(); s.exponent(j)];
                apply_block(&reps, db, y, &mut rhs, &layout, &g_true)?;
            }
            if distance(&lhs, &rhs) > STATE_TOL {
                return Err(Error::Verification(format!(
                    "control qubit {j}: block does not net the required operator"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn db() -> Database {
        Database::from_strs(&["1", "0", "1", "1"]).unwrap()
    }

    #[test]
    fn trivial_and_generated_kinds_verify() {
        let f = Predicate::contains("1".parse().unwrap());
        let mut rng = stream(5, &[]);
        for kind in [StrategyKind::Trivial, StrategyKind::OneConfusing, StrategyKind::TwoConfusing, StrategyKind::HbarTrap]
        {
            for t in 3..=5 {
                let s = make_strategy(&f, kind, t, 1, &mut rng).unwrap();
                assert_eq!(s.funcs.len(), 1 << t);
                assert_eq!(s.funcs[(1 << t) - 1], f);
                verify_strategy(&s, &db(), 1).unwrap();
                assert_eq!(s.effective_t(), 1 << (t - kind.hidden_qubits()));
            }
        }
    }

    #[test]
    fn worked_layout_t4() {
        let f = Predicate::contains("1".parse().unwrap());
        let fp = Predicate::Table { values: vec![true, false] };
        let h = Predicate::AllZero;
        let mut rng = stream(1, &[]);
        let c0 = vec![h.clone(), h.clone(), f.clone(), f.clone(), h.clone(), h.clone(), f.clone(), f.clone()];
        let c1 = vec![fp.clone(), h.clone(), fp, h];
        let s = Strategy::with_blocks(
            f.clone(),
            4,
            1,
            StrategyKind::OneConfusing,
            vec![1],
            vec![],
            &[(0, c0), (1, c1)],
            &mut rng,
        )
        .unwrap();
        assert_eq!(s.block(2), &[f.clone(), f.clone()]);
        assert_eq!(s.exponent(0), 4);
        verify_strategy(&s, &db(), 2).unwrap();
    }

    #[test]
    fn broken_block_is_reported() {
        let f = Predicate::contains("1".parse().unwrap());
        let mut s = Strategy::trivial(f, 3);
        s.funcs[5] = Predicate::AllZero;
        let err = verify_strategy(&s, &db(), 0).unwrap_err();
        assert!(err.to_string().contains("qubit 1"));
    }

    #[test]
    fn insufficient_t() {
        let f = Predicate::AllOne;
        let mut rng = stream(1, &[]);
        assert!(make_strategy(&f, StrategyKind::OneConfusing, 1, 1, &mut rng).is_err());
        assert!(make_strategy(&f, StrategyKind::TwoConfusing, 2, 1, &mut rng).is_err());
        assert!(make_strategy(&f, StrategyKind::TwoConfusing, 3, 1, &mut rng).is_ok());
    }
}
