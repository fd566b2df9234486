//! Alice's two test procedures and the controlled swap test.

use rand::Rng as _;

use super::{honest_query, AbortReason, BobBehavior, BobCtx, Register, TestMode};
use super::transcript::DetectionReason;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::qsim::{fidelity, Gate, Role, StateVector};
use crate::rng::Rng;
use crate::teststates::{test_state, TestParams};

#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    pub detection: Option<DetectionReason>,
    /// Alice's outcomes on the two returned states (empty in fidelity mode).
    pub outcomes: Vec<BitString>,
    /// Bob aborted after the "Repeat" message.
    pub abort: Option<AbortReason>,
}

impl TestResult {
    pub fn passed(&self) -> bool {
        self.detection.is_none() && self.abort.is_none()
    }
}

/// Runs one `TestBob1`: two copies of |c⟩ ⊗ U_t|0⟩ go through Bob's query
/// slot (the second after a "Repeat"); Alice undoes U_t on each and measures
/// the n+k address and data qubits. Detection iff v₀ ≠ w₀ or any other bit is 1.
pub fn test_bob1(
    bob: &mut dyn BobBehavior,
    ctx: &BobCtx,
    tp: &TestParams,
    c: u64,
    mode: TestMode,
    alice_rng: &mut Rng,
    bob_rng: &mut Rng,
) -> Result<TestResult> {
    let (n, k, t) = (ctx.n, ctx.k, ctx.t);
    let u = tp.unitary(n, k)?;
    let fresh = Register::test(t, n, k, c, test_state(tp, n, k)?)?;

    let mut returned = Vec::with_capacity(2);
    for copy in [1u8, 2] {
        if copy == 2 {
            if let Some(a) = bob.on_repeat(ctx.loop_index) {
                return Ok(TestResult { detection: None, outcomes: vec![], abort: Some(a) });
            }
        }
        let mut reg = fresh.clone();
        bob.query(&BobCtx { copy, ..*ctx }, &mut reg, bob_rng)?;
        returned.push(reg);
    }

    match mode {
        TestMode::Fidelity => {
            let mut honest = fresh.clone();
            honest_query(ctx, &mut honest)?;
            for reg in &returned {
                let f = fidelity(&honest.state, &reg.state)?;
                if alice_rng.gen::<f64>() >= f {
                    return Ok(TestResult {
                        detection: Some(DetectionReason::Fidelity),
                        outcomes: vec![],
                        abort: None,
                    });
                }
            }
            Ok(TestResult { detection: None, outcomes: vec![], abort: None })
        }
        TestMode::Measure => {
            let mut outcomes = Vec::with_capacity(2);
            for mut reg in returned {
                u.apply_adjoint(&mut reg.state, &reg.layout)?;
                let q = reg.address_data_qubits()?;
                outcomes.push(reg.state.measure(&q, alice_rng)?.bits);
            }
            let (v, w) = (outcomes[0], outcomes[1]);
            let width = n + k;
            let rest = BitString::ones(width).with_bit(0, false);
            let detection = if v.bit(0) != w.bit(0) {
                Some(DetectionReason::V0Mismatch)
            } else if v.and(&rest).value() != 0 || w.and(&rest).value() != 0 {
                Some(DetectionReason::StrayOne)
            } else {
                None
            };
            Ok(TestResult { detection, outcomes, abort: None })
        }
    }
}

/// Controlled swap test on `joint`, whose qubit `anc` must already hold |+⟩:
/// controlled SWAP of `a[i]` with `b[i]`, H on the ancilla, measure it.
/// Pr(1) = (1 − |⟨φ|ψ⟩|²)/2 for product inputs |φ⟩|ψ⟩.
pub fn swap_test(joint: &mut StateVector, anc: usize, a: &[usize], b: &[usize], rng: &mut Rng) -> Result<u8> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    for (&x, &y) in a.iter().zip(b) {
        joint.apply_gate(Gate::Swap, &[x, y], &[anc])?;
    }
    joint.apply_gate(Gate::H, &[anc], &[])?;
    Ok(joint.measure(&[anc], rng)?.bits.value() as u8)
}

/// |+⟩ ⊗ φ ⊗ ψ followed by [`swap_test`] over all of φ and ψ.
pub fn swap_test_states(phi: &StateVector, psi: &StateVector, rng: &mut Rng) -> Result<(u8, StateVector)> {
    if phi.num_qubits() != psi.num_qubits() {
        return Err(Error::DimensionMismatch(phi.num_qubits(), psi.num_qubits()));
    }
    let w = phi.num_qubits();
    let mut joint = StateVector::zero(1).tensor(phi).tensor(psi);
    joint.apply_gate(Gate::H, &[0], &[])?;
    let a: Vec<usize> = (1..=w).collect();
    let b: Vec<usize> = (w + 1..=2 * w).collect();
    let bit = swap_test(&mut joint, 0, &a, &b, rng)?;
    Ok((bit, joint))
}

/// Runs one `TestBob2` in the final window: Bob applies U'_f (with his fresh
/// ancilla) to two copies of U_t|0⟩, Alice undoes U_t, swap-tests the two
/// (n+k+1)-qubit registers and then measures every address and data qubit
/// except address qubit 0.
pub fn test_bob2(
    bob: &mut dyn BobBehavior,
    ctx: &BobCtx,
    tp: &TestParams,
    c: u64,
    alice_rng: &mut Rng,
    bob_rng: &mut Rng,
) -> Result<TestResult> {
    let (n, k, t) = (ctx.n, ctx.k, ctx.t);
    let u = tp.unitary(n, k)?;
    let fresh = Register::test(t, n, k, c, test_state(tp, n, k)?)?;
    let mut regs = Vec::with_capacity(2);
    for copy in [1u8, 2] {
        if copy == 2 {
            if let Some(a) = bob.on_repeat(ctx.loop_index) {
                return Ok(TestResult { detection: None, outcomes: vec![], abort: Some(a) });
            }
        }
        let mut reg = fresh.clone();
        bob.final_query(&BobCtx { copy, ..*ctx }, &mut reg, bob_rng)?;
        if reg.layout.get(Role::Ancilla).is_none() {
            reg.append(Role::Ancilla, 1)?;
        }
        u.apply_adjoint(&mut reg.state, &reg.layout)?;
        regs.push(reg);
    }

    let w1 = regs[0].layout.num_qubits();
    let compared = |r: &Register, off: usize| -> Result<Vec<usize>> {
        let mut q = r.address_data_qubits()?;
        q.push(r.segment(Role::Ancilla)?.offset);
        Ok(q.into_iter().map(|x| x + off).collect())
    };
    let a = compared(&regs[0], 1)?;
    let b = compared(&regs[1], 1 + w1)?;
    let mut joint = StateVector::zero(1).tensor(&regs[0].state).tensor(&regs[1].state);
    joint.apply_gate(Gate::H, &[0], &[])?;
    let bit = swap_test(&mut joint, 0, &a, &b, alice_rng)?;

    let mut rest: Vec<usize> = a[1..n as usize + k as usize].to_vec();
    rest.extend_from_slice(&b[1..n as usize + k as usize]);
    let m = joint.measure(&rest, alice_rng)?.bits;
    let detection = if bit == 1 {
        Some(DetectionReason::SwapTest)
    } else if m.value() != 0 {
        Some(DetectionReason::StrayOne)
    } else {
        None
    };
    Ok(TestResult { detection, outcomes: vec![BitString::new(1, bit as u64)?, m], abort: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::Predicate;
    use crate::protocol::{HonestBob, Slot};
    use crate::rng::stream;

    fn ctx(f: &Predicate, n: u32, k: u32, t: u32, slot: Slot) -> BobCtx<'_> {
        BobCtx { loop_index: Some(1), control: Some(0), func: f, n, k, t, slot, copy: 1 }
    }

    #[test]
    fn honest_passes_both_tests() {
        let mut ar = stream(1, &[1]);
        let mut br = stream(1, &[2]);
        let mut bob = HonestBob::new();
        for (i, f) in [Predicate::contains("01".parse().unwrap()), Predicate::AllOne, Predicate::AllZero]
            .iter()
            .enumerate()
        {
            for _ in 0..30 {
                let tp = TestParams::random(2, 2, &mut ar);
                let c = ((i as u64) % 4) | 0b100;
                let r = test_bob1(&mut bob, &ctx(f, 2, 2, 3, Slot::Test), &tp, c, TestMode::Measure, &mut ar, &mut br)
                    .unwrap();
                assert!(r.passed());
                let fm = f.on(tp.mu) != f.on(tp.nu);
                assert_eq!(r.outcomes[0].bit(0), fm);
                let r = test_bob2(&mut bob, &ctx(f, 2, 2, 3, Slot::FinalTest), &tp, c, &mut ar, &mut br).unwrap();
                assert!(r.passed());
            }
        }
    }

    #[test]
    fn swap_test_identical_and_orthogonal() {
        let mut rng = stream(4, &[]);
        let s = StateVector::random(2, &mut rng);
        for _ in 0..50 {
            let (bit, _) = swap_test_states(&s, &s, &mut rng).unwrap();
            assert_eq!(bit, 0);
        }
        let zero = StateVector::zero(1);
        let one = StateVector::basis(1, 1);
        let ones: usize = (0..2000).map(|_| swap_test_states(&zero, &one, &mut rng).unwrap().0 as usize).sum();
        assert!((ones as f64 / 2000.0 - 0.5).abs() < 0.05);
        assert!(swap_test_states(&zero, &StateVector::zero(2), &mut rng).is_err());
    }
}
